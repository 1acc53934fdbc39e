#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fusion_probe/datamodel.hpp"

namespace fusion_probe::additive {

struct Decomposition {
  Eigen::MatrixXd component_vecs;  // p x d, one vector per attribute column
  double residual_l2 = 0.0;        // ||A X - U||_F^2
};

/// Minimum-norm least-squares solution of A X = U for the aligned dataset.
Decomposition decompose(const AlignedDataset& ds, std::optional<double> rcond = std::nullopt);

/// Sum of the component vectors of the active attributes, attr_row^T X.
Eigen::RowVectorXd compose(const Eigen::VectorXd& attr_row, const Decomposition& comp);

struct LooStats {
  double mean_l2 = 0.0;      // mean ||u_hat - u||^2
  double mean_cosine = 0.0;  // mean cos(u_hat, u); 0 when either vector is zero
  double mean_rank = 0.0;    // mean retrieval rank of the target
  std::map<int, double> retrieval_acc;  // K -> fraction of rows with rank <= K
  std::size_t unsupported_rows = 0;     // rows whose attributes leave the span of the others
};

enum class LooPath {
  naive,  // refit the system without each row
  fast,   // leverage identity on one SVD; naive fallback for leverage ~ 1 rows
};

/// Leave-one-out reconstructions u_hat_i (n x d): row i is predicted from a
/// decomposition fitted on every other row.
Eigen::MatrixXd loo_predictions(const Eigen::MatrixXd& a, const Eigen::MatrixXd& u,
                                std::optional<double> rcond, LooPath path,
                                std::size_t* unsupported = nullptr, unsigned threads = 1);

/// Scores reconstructions against targets. Retrieval ranks each target
/// among all n target rows by cosine similarity to its reconstruction, with
/// average-rank ties (cosines within 1e-12 count as tied).
LooStats score_reconstructions(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& targets,
                               const std::vector<int>& ks);

LooStats loo_evaluate(const AlignedDataset& ds, const std::vector<int>& ks,
                      std::optional<double> rcond = std::nullopt, LooPath path = LooPath::fast,
                      unsigned threads = 1);

/// One row per attribute combination present among the selected columns.
/// A column is selected when its name equals an entry of `columns` or starts
/// with "<entry>=" (the one-hot naming scheme). Group embeddings are member
/// means; group ids join the active column names with '|' ("(none)" when no
/// selected column is active). Groups are sorted by id.
AlignedDataset group_by_attributes(const AlignedDataset& ds, const std::vector<std::string>& columns);

struct AddFusionReport {
  LooStats observed;
  std::vector<LooStats> permuted;
  std::map<std::string, double> p_values;  // "l2", "cosine", "retrieval@K"
  std::vector<int> ks;
  std::uint64_t seed = 0;
  int n_perm = 0;
};

/// Leave-one-out permutation test. Lower l2 and higher cosine / retrieval
/// count as more extreme; p = (1 + #{at least as extreme}) / (1 + n_perm).
AddFusionReport detect_additive_fusion(const AlignedDataset& ds, int n_perm,
                                       const std::vector<int>& ks, std::uint64_t seed,
                                       std::optional<double> rcond = std::nullopt,
                                       unsigned threads = 1);

}  // namespace fusion_probe::additive
