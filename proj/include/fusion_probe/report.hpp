#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fusion_probe/fusion_add.hpp"
#include "fusion_probe/fusion_corr.hpp"
#include "fusion_probe/kgembed.hpp"

namespace fusion_probe::report {

using Json = nlohmann::ordered_json;

Json to_json(const corr::CorrFusionReport& r);
Json to_json(const additive::LooStats& s);
Json to_json(const additive::AddFusionReport& r);
Json to_json(const kg::EvalMetrics& m);

corr::CorrFusionReport corr_from_json(const Json& j);
additive::LooStats loo_from_json(const Json& j);
additive::AddFusionReport additive_from_json(const Json& j);

/// component,observed,perm_min,perm_max,perm_mean (components numbered from 1).
std::string pcc_table_csv(const corr::CorrFusionReport& r);
/// statistic,observed,perm_min,perm_max,perm_mean,p_value
std::string statistics_csv(const additive::AddFusionReport& r);
/// replica,l2,cosine,retrieval@K... one row per permutation.
std::string permutations_csv(const additive::AddFusionReport& r);
/// component,attribute,score
std::string attribute_scores_csv(const std::vector<std::vector<corr::AttributeScores>>& per_component);

/// Static SVG histogram of `values` with a dashed vertical marker at `observed`.
std::string histogram_svg(const std::string& title, const std::vector<double>& values,
                          double observed, int bins = 20);

}  // namespace fusion_probe::report
