#include "fusion_probe/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "fusion_probe/datamodel.hpp"
#include "fusion_probe/error.hpp"

namespace fusion_probe::report {
namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

struct Summary {
  double min = 0.0, max = 0.0, mean = 0.0;
};

Summary summarize(const std::vector<double>& v) {
  if (v.empty()) return {};
  Summary s;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  return s;
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<double> statistic_column(const additive::AddFusionReport& r, const std::string& name) {
  std::vector<double> out;
  out.reserve(r.permuted.size());
  for (const auto& s : r.permuted) {
    if (name == "l2") {
      out.push_back(s.mean_l2);
    } else if (name == "cosine") {
      out.push_back(s.mean_cosine);
    } else {
      out.push_back(s.retrieval_acc.at(std::stoi(name.substr(name.find('@') + 1))));
    }
  }
  return out;
}

double observed_statistic(const additive::AddFusionReport& r, const std::string& name) {
  if (name == "l2") return r.observed.mean_l2;
  if (name == "cosine") return r.observed.mean_cosine;
  return r.observed.retrieval_acc.at(std::stoi(name.substr(name.find('@') + 1)));
}

std::vector<std::string> statistic_names(const additive::AddFusionReport& r) {
  std::vector<std::string> names{"l2", "cosine"};
  for (int k : r.ks) names.push_back("retrieval@" + std::to_string(k));
  return names;
}

}  // namespace

Json to_json(const corr::CorrFusionReport& r) {
  Json j;
  j["kind"] = "correlation";
  j["n_perm"] = r.n_perm;
  j["seed"] = r.seed;
  j["p_value"] = r.p_value;
  j["observed_pcc"] = to_vector(r.observed_pcc);
  j["observed_rho"] = to_vector(r.observed_rho);
  Json rows = Json::array();
  for (Index i = 0; i < r.permuted_pcc.rows(); ++i) {
    rows.push_back(to_vector(r.permuted_pcc.row(i).transpose()));
  }
  j["permuted_pcc"] = std::move(rows);
  j["dropped_columns"] = r.dropped_columns;
  return j;
}

Json to_json(const additive::LooStats& s) {
  Json j;
  j["mean_l2"] = s.mean_l2;
  j["mean_cosine"] = s.mean_cosine;
  j["mean_rank"] = s.mean_rank;
  Json acc = Json::object();
  for (const auto& [k, v] : s.retrieval_acc) acc[std::to_string(k)] = v;
  j["retrieval_acc"] = std::move(acc);
  j["unsupported_rows"] = s.unsupported_rows;
  return j;
}

Json to_json(const additive::AddFusionReport& r) {
  Json j;
  j["kind"] = "additive";
  j["n_perm"] = r.n_perm;
  j["seed"] = r.seed;
  j["ks"] = r.ks;
  Json p = Json::object();
  for (const auto& [name, v] : r.p_values) p[name] = v;
  j["p_values"] = std::move(p);
  j["observed"] = to_json(r.observed);
  Json perm = Json::array();
  for (const auto& s : r.permuted) perm.push_back(to_json(s));
  j["permuted"] = std::move(perm);
  return j;
}

Json to_json(const kg::EvalMetrics& m) {
  Json j;
  j["count"] = m.count;
  j["rmse"] = m.rmse ? Json(*m.rmse) : Json(nullptr);
  Json hits = Json::object();
  for (const auto& [k, v] : m.hits_at) hits[std::to_string(k)] = v;
  j["hits"] = std::move(hits);
  j["mr"] = m.mr;
  j["mrr"] = m.mrr;
  return j;
}

corr::CorrFusionReport corr_from_json(const Json& j) {
  if (j.value("kind", "") != "correlation") throw DataError("report is not a correlation report");
  corr::CorrFusionReport r;
  r.n_perm = j.at("n_perm").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.p_value = j.at("p_value").get<double>();
  const auto obs = j.at("observed_pcc").get<std::vector<double>>();
  r.observed_pcc = Eigen::Map<const Eigen::VectorXd>(obs.data(), static_cast<Index>(obs.size()));
  const auto rho = j.at("observed_rho").get<std::vector<double>>();
  r.observed_rho = Eigen::Map<const Eigen::VectorXd>(rho.data(), static_cast<Index>(rho.size()));
  const auto& rows = j.at("permuted_pcc");
  r.permuted_pcc.resize(static_cast<Index>(rows.size()), r.observed_pcc.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = rows[i].get<std::vector<double>>();
    if (static_cast<Index>(row.size()) != r.observed_pcc.size()) {
      throw DataError("permuted_pcc row " + std::to_string(i) + " has the wrong length");
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      r.permuted_pcc(static_cast<Index>(i), static_cast<Index>(c)) = row[c];
    }
  }
  r.dropped_columns = j.value("dropped_columns", std::vector<std::string>{});
  return r;
}

additive::LooStats loo_from_json(const Json& j) {
  additive::LooStats s;
  s.mean_l2 = j.at("mean_l2").get<double>();
  s.mean_cosine = j.at("mean_cosine").get<double>();
  s.mean_rank = j.at("mean_rank").get<double>();
  for (const auto& [k, v] : j.at("retrieval_acc").items()) s.retrieval_acc[std::stoi(k)] = v.get<double>();
  s.unsupported_rows = j.at("unsupported_rows").get<std::size_t>();
  return s;
}

additive::AddFusionReport additive_from_json(const Json& j) {
  if (j.value("kind", "") != "additive") throw DataError("report is not an additive report");
  additive::AddFusionReport r;
  r.n_perm = j.at("n_perm").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.ks = j.at("ks").get<std::vector<int>>();
  for (const auto& [name, v] : j.at("p_values").items()) r.p_values[name] = v.get<double>();
  r.observed = loo_from_json(j.at("observed"));
  for (const auto& s : j.at("permuted")) r.permuted.push_back(loo_from_json(s));
  return r;
}

std::string pcc_table_csv(const corr::CorrFusionReport& r) {
  std::string out = "component,observed,perm_min,perm_max,perm_mean\n";
  for (Index c = 0; c < r.components(); ++c) {
    const Eigen::VectorXd col = r.permuted_pcc.col(c);
    const Summary s = summarize(to_vector(col));
    out += std::to_string(c + 1) + "," + format_double(r.observed_pcc(c)) + "," + format_double(s.min) +
           "," + format_double(s.max) + "," + format_double(s.mean) + "\n";
  }
  return out;
}

std::string statistics_csv(const additive::AddFusionReport& r) {
  std::string out = "statistic,observed,perm_min,perm_max,perm_mean,p_value\n";
  for (const auto& name : statistic_names(r)) {
    const Summary s = summarize(statistic_column(r, name));
    out += name + "," + format_double(observed_statistic(r, name)) + "," + format_double(s.min) + "," +
           format_double(s.max) + "," + format_double(s.mean) + "," +
           format_double(r.p_values.at(name)) + "\n";
  }
  return out;
}

std::string permutations_csv(const additive::AddFusionReport& r) {
  const auto names = statistic_names(r);
  std::string out = "replica";
  for (const auto& n : names) out += "," + n;
  out += "\n";
  std::vector<std::vector<double>> cols;
  for (const auto& n : names) cols.push_back(statistic_column(r, n));
  for (std::size_t i = 0; i < r.permuted.size(); ++i) {
    out += std::to_string(i);
    for (const auto& c : cols) out += "," + format_double(c[i]);
    out += "\n";
  }
  return out;
}

std::string attribute_scores_csv(const std::vector<std::vector<corr::AttributeScores>>& per_component) {
  std::string out = "component,attribute,score\n";
  for (std::size_t c = 0; c < per_component.size(); ++c) {
    for (const auto& entry : per_component[c]) {
      for (double s : entry.scores) {
        out += std::to_string(c + 1) + "," + entry.attribute + "," + format_double(s) + "\n";
      }
    }
  }
  return out;
}

std::string histogram_svg(const std::string& title, const std::vector<double>& values,
                          double observed, int bins) {
  constexpr double width = 480, height = 320, left = 50, right = 20, top = 40, bottom = 50;
  bins = std::max(1, bins);
  double lo = observed, hi = observed;
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    auto b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
    counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))]++;
  }
  const int peak = std::max(1, *std::max_element(counts.begin(), counts.end()));
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  auto x_of = [&](double v) { return left + (v - lo) / (hi - lo) * plot_w; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(width, 0) +
                    "\" height=\"" + fixed(height, 0) + "\" viewBox=\"0 0 " + fixed(width, 0) + " " +
                    fixed(height, 0) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fixed(width / 2, 1) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">" + escape_xml(title) + "</text>\n";
  const double bar_w = plot_w / bins;
  for (int b = 0; b < bins; ++b) {
    const double h = plot_h * counts[static_cast<std::size_t>(b)] / peak;
    svg += "<rect class=\"bin\" x=\"" + fixed(left + b * bar_w) + "\" y=\"" + fixed(top + plot_h - h) +
           "\" width=\"" + fixed(bar_w) + "\" height=\"" + fixed(h) +
           "\" fill=\"#8da0cb\" stroke=\"#4a5a8a\" stroke-width=\"0.5\"/>\n";
  }
  svg += "<line x1=\"" + fixed(left) + "\" y1=\"" + fixed(top + plot_h) + "\" x2=\"" + fixed(left + plot_w) +
         "\" y2=\"" + fixed(top + plot_h) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fixed(left) + "\" y1=\"" + fixed(top) + "\" x2=\"" + fixed(left) + "\" y2=\"" +
         fixed(top + plot_h) + "\" stroke=\"black\"/>\n";
  for (double v : {lo, (lo + hi) / 2, hi}) {
    svg += "<text x=\"" + fixed(x_of(v)) + "\" y=\"" + fixed(top + plot_h + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + fixed(v, 3) +
           "</text>\n";
  }
  svg += "<text x=\"" + fixed(left - 8) + "\" y=\"" + fixed(top + 10) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + std::to_string(peak) +
         "</text>\n";
  svg += "<line class=\"observed\" x1=\"" + fixed(x_of(observed)) + "\" y1=\"" + fixed(top) + "\" x2=\"" +
         fixed(x_of(observed)) + "\" y2=\"" + fixed(top + plot_h) +
         "\" stroke=\"#d62728\" stroke-width=\"2\" stroke-dasharray=\"6,4\"/>\n";
  svg += "<text x=\"" + fixed(x_of(observed) + 4) + "\" y=\"" + fixed(top + 12) +
         "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#d62728\">observed " +
         fixed(observed, 4) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace fusion_probe::report
