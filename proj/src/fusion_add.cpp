#include "fusion_probe/fusion_add.hpp"

#include <algorithm>
#include <numeric>

#include "fusion_probe/error.hpp"
#include "fusion_probe/numerics.hpp"
#include "fusion_probe/parallel.hpp"
#include "fusion_probe/random.hpp"

namespace fusion_probe::additive {
namespace {

constexpr double kTieTolerance = 1e-12;
constexpr double kLeverageFloor = 1e-6;
constexpr Index kSimilarityBlock = 256;

Eigen::MatrixXd normalized_rows(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (Index r = 0; r < out.rows(); ++r) {
    const double norm = out.row(r).norm();
    if (norm > 0.0) {
      out.row(r) /= norm;
    } else {
      out.row(r).setZero();
    }
  }
  return out;
}

Eigen::MatrixXd drop_row(const Eigen::MatrixXd& m, Index row) {
  Eigen::MatrixXd out(m.rows() - 1, m.cols());
  out.topRows(row) = m.topRows(row);
  out.bottomRows(m.rows() - 1 - row) = m.bottomRows(m.rows() - 1 - row);
  return out;
}

Eigen::RowVectorXd naive_prediction(const Eigen::MatrixXd& a, const Eigen::MatrixXd& u, Index row,
                                    std::optional<double> rcond) {
  Decomposition comp;
  comp.component_vecs = numerics::lstsq_pinv(drop_row(a, row), drop_row(u, row), rcond);
  return compose(a.row(row).transpose(), comp);
}

}  // namespace

Decomposition decompose(const AlignedDataset& ds, std::optional<double> rcond) {
  const Eigen::MatrixXd u = ds.targets();
  Decomposition out;
  out.component_vecs = numerics::lstsq_pinv(ds.design(), u, rcond);
  out.residual_l2 = (ds.design() * out.component_vecs - u).squaredNorm();
  return out;
}

Eigen::RowVectorXd compose(const Eigen::VectorXd& attr_row, const Decomposition& comp) {
  if (attr_row.size() != comp.component_vecs.rows()) {
    throw ArgumentError("compose: attribute row has " + std::to_string(attr_row.size()) +
                        " entries, decomposition has " +
                        std::to_string(comp.component_vecs.rows()) + " components");
  }
  return attr_row.transpose() * comp.component_vecs;
}

Eigen::MatrixXd loo_predictions(const Eigen::MatrixXd& a, const Eigen::MatrixXd& u,
                                std::optional<double> rcond, LooPath path,
                                std::size_t* unsupported, unsigned threads) {
  if (a.rows() != u.rows()) throw ArgumentError("loo: design and targets differ in rows");
  const Index n = a.rows();
  if (n < 2) throw ArgumentError("loo: need at least 2 rows");
  Eigen::MatrixXd pred(n, u.cols());

  // Leverage h_ii of every row; h_ii == 1 means row i carries a direction no
  // other row spans, so its attributes have no support elsewhere.
  Eigen::VectorXd leverage = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd fitted = Eigen::MatrixXd::Zero(n, u.cols());
  if (a.cols() > 0) {
    const auto dec = numerics::svd(a);
    const Index r = numerics::numerical_rank(
        dec.singular_values, rcond.value_or(numerics::default_rcond<double>(n, a.cols())));
    const Eigen::MatrixXd basis = dec.u_basis.leftCols(r);
    leverage = basis.rowwise().squaredNorm();
    fitted = basis * (basis.transpose() * u);
  }
  std::vector<Index> fallback;
  for (Index i = 0; i < n; ++i) {
    if (1.0 - leverage(i) < kLeverageFloor || path == LooPath::naive) fallback.push_back(i);
  }
  if (unsupported) {
    *unsupported = static_cast<std::size_t>(
        (1.0 - leverage.array() < kLeverageFloor).count());
  }
  if (path == LooPath::fast) {
    for (Index i = 0; i < n; ++i) {
      const double h = leverage(i);
      if (1.0 - h < kLeverageFloor) continue;
      pred.row(i) = (fitted.row(i) - h * u.row(i)) / (1.0 - h);
    }
  }
  parallel_for(fallback.size(), threads, [&](std::size_t j) {
    const Index i = fallback[j];
    pred.row(i) = naive_prediction(a, u, i, rcond);
  });
  return pred;
}

LooStats score_reconstructions(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& targets,
                               const std::vector<int>& ks) {
  const Index n = targets.rows();
  const Eigen::MatrixXd pn = normalized_rows(predicted);
  const Eigen::MatrixXd tn = normalized_rows(targets);
  std::vector<double> l2(static_cast<std::size_t>(n)), cosine(l2.size()), rank(l2.size());

  for (Index start = 0; start < n; start += kSimilarityBlock) {
    const Index rows = std::min(kSimilarityBlock, n - start);
    const Eigen::MatrixXd sims = pn.middleRows(start, rows) * tn.transpose();
    for (Index b = 0; b < rows; ++b) {
      const Index i = start + b;
      const double target = sims(b, i);
      Index above = 0, ties = 0;
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double s = sims(b, j);
        if (s > target + kTieTolerance) {
          ++above;
        } else if (s >= target - kTieTolerance) {
          ++ties;
        }
      }
      const auto k = static_cast<std::size_t>(i);
      rank[k] = 1.0 + static_cast<double>(above) + 0.5 * static_cast<double>(ties);
      cosine[k] = target;
      l2[k] = (predicted.row(i) - targets.row(i)).squaredNorm();
    }
  }

  LooStats out;
  out.mean_l2 = pairwise_mean(l2);
  out.mean_cosine = pairwise_mean(cosine);
  out.mean_rank = pairwise_mean(rank);
  for (int kk : ks) {
    const auto hits =
        std::count_if(rank.begin(), rank.end(), [kk](double r) { return r <= static_cast<double>(kk); });
    out.retrieval_acc[kk] = static_cast<double>(hits) / static_cast<double>(std::max<Index>(n, 1));
  }
  return out;
}

LooStats loo_evaluate(const AlignedDataset& ds, const std::vector<int>& ks,
                      std::optional<double> rcond, LooPath path, unsigned threads) {
  const Eigen::MatrixXd u = ds.targets();
  std::size_t unsupported = 0;
  const Eigen::MatrixXd pred = loo_predictions(ds.design(), u, rcond, path, &unsupported, threads);
  LooStats stats = score_reconstructions(pred, u, ks);
  stats.unsupported_rows = unsupported;
  return stats;
}

AlignedDataset group_by_attributes(const AlignedDataset& ds, const std::vector<std::string>& columns) {
  if (columns.empty()) throw ArgumentError("group_by_attributes: no columns selected");
  const auto& attrs = ds.attributes();
  std::vector<Index> selected;
  for (const auto& want : columns) {
    bool matched = false;
    for (Index c = 0; c < attrs.cols(); ++c) {
      const auto& name = attrs.column_names[static_cast<std::size_t>(c)];
      if (name == want || name.rfind(want + "=", 0) == 0) {
        if (std::find(selected.begin(), selected.end(), c) == selected.end()) selected.push_back(c);
        matched = true;
      }
    }
    if (!matched) throw ArgumentError("group_by_attributes: no column matches '" + want + "'");
  }
  std::sort(selected.begin(), selected.end());

  const Eigen::MatrixXd u = ds.targets();
  std::map<std::string, std::vector<Index>> groups;  // id -> member rows
  for (Index r = 0; r < ds.rows(); ++r) {
    std::string id;
    for (Index c : selected) {
      if (attrs.values(r, c) == 0.0) continue;
      if (!id.empty()) id += '|';
      id += attrs.column_names[static_cast<std::size_t>(c)];
    }
    groups[id.empty() ? "(none)" : id].push_back(r);
  }

  auto ga = std::make_shared<AttributeMatrix>();
  auto ge = std::make_shared<EmbeddingMatrix>();
  const auto g = static_cast<Index>(groups.size());
  for (Index c : selected) ga->column_names.push_back(attrs.column_names[static_cast<std::size_t>(c)]);
  ga->values.resize(g, static_cast<Index>(selected.size()));
  ge->vectors.resize(g, u.cols());
  Index row = 0;
  for (const auto& [id, members] : groups) {
    ga->ids.push_back(id);
    ge->ids.push_back(id);
    for (std::size_t j = 0; j < selected.size(); ++j) {
      ga->values(row, static_cast<Index>(j)) = attrs.values(members.front(), selected[j]);
    }
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(u.cols());
    for (Index m : members) sum += u.row(m);
    ge->vectors.row(row) = sum / static_cast<double>(members.size());
    ++row;
  }
  std::vector<Index> identity(static_cast<std::size_t>(g));
  std::iota(identity.begin(), identity.end(), Index{0});
  return AlignedDataset(std::move(ga), std::move(ge), std::move(identity));
}

AddFusionReport detect_additive_fusion(const AlignedDataset& ds, int n_perm,
                                       const std::vector<int>& ks, std::uint64_t seed,
                                       std::optional<double> rcond, unsigned threads) {
  if (n_perm < 1) throw ArgumentError("detect_additive_fusion: n_perm must be >= 1");
  if (ds.rows() < 2) throw ArgumentError("detect_additive_fusion: need at least 2 rows");

  AddFusionReport report;
  report.ks = ks;
  report.seed = seed;
  report.n_perm = n_perm;
  report.observed = loo_evaluate(ds, ks, rcond, LooPath::fast, threads);
  report.permuted.resize(static_cast<std::size_t>(n_perm));
  parallel_for(static_cast<std::size_t>(n_perm), threads, [&](std::size_t i) {
    const AlignedDataset shuffled = permute_alignment(ds, derive_seed(seed, i));
    report.permuted[i] = loo_evaluate(shuffled, ks, rcond, LooPath::fast, 1);
  });

  auto p_value = [&](auto&& at_least_as_extreme) {
    const auto hits = std::count_if(report.permuted.begin(), report.permuted.end(), at_least_as_extreme);
    return static_cast<double>(1 + hits) / static_cast<double>(1 + n_perm);
  };
  const LooStats& obs = report.observed;
  report.p_values["l2"] = p_value([&](const LooStats& s) { return s.mean_l2 <= obs.mean_l2; });
  report.p_values["cosine"] =
      p_value([&](const LooStats& s) { return s.mean_cosine >= obs.mean_cosine; });
  for (int k : ks) {
    report.p_values["retrieval@" + std::to_string(k)] = p_value([&](const LooStats& s) {
      return s.retrieval_acc.at(k) >= obs.retrieval_acc.at(k);
    });
  }
  return report;
}

}  // namespace fusion_probe::additive
