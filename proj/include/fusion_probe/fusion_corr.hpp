#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fusion_probe/datamodel.hpp"
#include "fusion_probe/numerics.hpp"

namespace fusion_probe::corr {

using CcaResult = numerics::CcaResult<double>;

struct CorrFusionReport {
  Eigen::VectorXd observed_pcc;   // per canonical component, true alignment
  Eigen::MatrixXd permuted_pcc;   // n_perm x k, one row per shuffled alignment
  Eigen::VectorXd observed_rho;   // canonical correlations of the true fit
  double p_value = 1.0;           // component-1 statistic, +1 corrected
  int n_perm = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> dropped_columns;  // constant attribute columns ignored by CCA

  Index components() const { return observed_pcc.size(); }
};

/// Pearson correlation between the projected views, one value per component.
Eigen::VectorXd projected_pcc(const Eigen::MatrixXd& a, const Eigen::MatrixXd& u,
                              const CcaResult& cca);

/// Fits CCA on `a` and `u` and returns projected_pcc of the fit.
Eigen::VectorXd fit_pcc(const Eigen::MatrixXd& a, const Eigen::MatrixXd& u,
                        std::optional<double> ridge, CcaResult* fit = nullptr);

/// CCA permutation test. Replica i re-pairs rows with
/// permute_alignment(ds, derive_seed(seed, i)) and refits CCA from scratch.
/// p = (1 + #{replicas with component-1 PCC >= observed}) / (1 + n_perm).
CorrFusionReport detect_correlation_fusion(const AlignedDataset& ds, int n_perm,
                                           std::optional<double> ridge, std::uint64_t seed,
                                           unsigned threads = 1);

struct AttributeScores {
  std::string attribute;
  std::vector<double> scores;  // embedding-side canonical scores of rows where attribute == 1
};

/// For every attribute column, the canonical embedding scores on
/// `component` of the rows carrying that attribute.
std::vector<AttributeScores> component_attribute_distribution(const AlignedDataset& ds,
                                                              const CcaResult& cca,
                                                              Index component);

}  // namespace fusion_probe::corr
