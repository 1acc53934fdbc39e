#include "fusion_probe/fusion_corr.hpp"

#include "fusion_probe/error.hpp"
#include "fusion_probe/parallel.hpp"
#include "fusion_probe/random.hpp"

namespace fusion_probe::corr {

Eigen::VectorXd projected_pcc(const Eigen::MatrixXd& a, const Eigen::MatrixXd& u,
                              const CcaResult& cca) {
  const Eigen::MatrixXd sa = numerics::project(a, cca.mean_a, cca.proj_a);
  const Eigen::MatrixXd su = numerics::project(u, cca.mean_u, cca.proj_u);
  Eigen::VectorXd out(cca.components());
  for (Index c = 0; c < cca.components(); ++c) {
    try {
      out(c) = numerics::pearson(sa.col(c), su.col(c));
    } catch (const ArgumentError&) {
      out(c) = 0.0;  // degenerate component with no spread
    }
  }
  return out;
}

Eigen::VectorXd fit_pcc(const Eigen::MatrixXd& a, const Eigen::MatrixXd& u,
                        std::optional<double> ridge, CcaResult* fit) {
  CcaResult cca = numerics::cca_fit(a, u, ridge);
  Eigen::VectorXd pcc = projected_pcc(a, u, cca);
  if (fit) *fit = std::move(cca);
  return pcc;
}

CorrFusionReport detect_correlation_fusion(const AlignedDataset& ds, int n_perm,
                                           std::optional<double> ridge, std::uint64_t seed,
                                           unsigned threads) {
  if (n_perm < 1) throw ArgumentError("detect_correlation_fusion: n_perm must be >= 1");
  if (ds.rows() < 3) throw ArgumentError("detect_correlation_fusion: need at least 3 rows");

  CorrFusionReport report;
  report.n_perm = n_perm;
  report.seed = seed;
  const Eigen::MatrixXd& a = ds.design();
  CcaResult fit;
  report.observed_pcc = fit_pcc(a, ds.targets(), ridge, &fit);
  report.observed_rho = fit.correlations;
  for (Index c : fit.dropped_a) {
    report.dropped_columns.push_back(ds.attributes().column_names[static_cast<std::size_t>(c)]);
  }

  const Index k = report.components();
  report.permuted_pcc = Eigen::MatrixXd::Zero(n_perm, k);
  parallel_for(static_cast<std::size_t>(n_perm), threads, [&](std::size_t i) {
    const AlignedDataset shuffled = permute_alignment(ds, derive_seed(seed, i));
    const Eigen::VectorXd pcc = fit_pcc(a, shuffled.targets(), ridge);
    const Index m = std::min(k, pcc.size());
    report.permuted_pcc.row(static_cast<Index>(i)).head(m) = pcc.head(m).transpose();
  });

  std::size_t extreme = 0;
  if (k > 0) {
    for (Index i = 0; i < n_perm; ++i) {
      if (report.permuted_pcc(i, 0) >= report.observed_pcc(0)) ++extreme;
    }
  } else {
    extreme = static_cast<std::size_t>(n_perm);
  }
  report.p_value = static_cast<double>(1 + extreme) / static_cast<double>(1 + n_perm);
  return report;
}

std::vector<AttributeScores> component_attribute_distribution(const AlignedDataset& ds,
                                                              const CcaResult& cca,
                                                              Index component) {
  if (component < 0 || component >= cca.components()) {
    throw ArgumentError("component_attribute_distribution: component " +
                        std::to_string(component) + " out of range (k = " +
                        std::to_string(cca.components()) + ")");
  }
  const Eigen::MatrixXd u = ds.targets();
  const Eigen::VectorXd scores =
      (u.rowwise() - cca.mean_u.transpose()) * cca.proj_u.col(component);
  const auto& attrs = ds.attributes();
  std::vector<AttributeScores> out;
  out.reserve(attrs.column_names.size());
  for (Index c = 0; c < attrs.cols(); ++c) {
    AttributeScores entry{attrs.column_names[static_cast<std::size_t>(c)], {}};
    for (Index r = 0; r < ds.rows(); ++r) {
      if (attrs.values(r, c) != 0.0) entry.scores.push_back(scores(r));
    }
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace fusion_probe::corr
