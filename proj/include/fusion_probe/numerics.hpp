#pragma once

// Dense kernels shared by the fusion detectors. Everything here is templated
// on the scalar type and works on plain Eigen matrices; no state is kept
// between calls.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fusion_probe/error.hpp"

namespace fusion_probe::numerics {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, std::string_view what) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (!std::isfinite(static_cast<double>(m(r, c)))) {
        throw DataError(std::string(what) + ": non-finite entry at (" + std::to_string(r) +
                        ", " + std::to_string(c) + ")");
      }
    }
  }
}

template <class Scalar>
struct SvdResult {
  Matrix<Scalar> u_basis;          // rows x min(rows, cols), orthonormal columns
  Vector<Scalar> singular_values;  // non-increasing, non-negative
  Matrix<Scalar> v_basis;          // cols x min(rows, cols), orthonormal columns
};

/// Thin SVD, m = U diag(s) V^T.
template <class Derived>
SvdResult<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() < 1 || m.cols() < 1) throw ArgumentError("svd: empty matrix");
  require_finite(m, "svd");
  Eigen::BDCSVD<Matrix<Scalar>> dec(m.derived(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

/// Relative cutoff used when no rcond is given: max(n, p) * epsilon.
template <class Scalar>
Scalar default_rcond(Eigen::Index rows, Eigen::Index cols) {
  return static_cast<Scalar>(std::max(rows, cols)) * std::numeric_limits<Scalar>::epsilon();
}

/// Number of singular values strictly above rcond * sigma_max.
template <class Scalar>
Eigen::Index numerical_rank(const Vector<Scalar>& singular_values, Scalar rcond) {
  if (singular_values.size() == 0) return 0;
  const Scalar cutoff = rcond * singular_values(0);
  Eigen::Index r = 0;
  while (r < singular_values.size() && singular_values(r) > cutoff) ++r;
  return r;
}

/// Minimum-norm least-squares solution X of a X = u through the truncated
/// pseudo-inverse. Singular values at or below rcond * sigma_max are treated
/// as zero, which keeps rank-deficient one-hot designs well defined.
template <class DerivedA, class DerivedU>
Matrix<typename DerivedA::Scalar> lstsq_pinv(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedU>& u,
    std::optional<typename DerivedA::Scalar> rcond = std::nullopt) {
  using Scalar = typename DerivedA::Scalar;
  if (a.rows() != u.rows()) {
    throw ArgumentError("lstsq_pinv: design has " + std::to_string(a.rows()) +
                        " rows but targets have " + std::to_string(u.rows()));
  }
  const Scalar tol = rcond.value_or(default_rcond<Scalar>(a.rows(), a.cols()));
  if (!(tol >= Scalar(0))) throw ArgumentError("lstsq_pinv: rcond must be >= 0");
  require_finite(u, "lstsq_pinv targets");
  if (a.rows() == 0 || a.cols() == 0) return Matrix<Scalar>::Zero(a.cols(), u.cols());

  const auto dec = svd(a);
  const Eigen::Index r = numerical_rank(dec.singular_values, tol);
  if (r == 0) return Matrix<Scalar>::Zero(a.cols(), u.cols());
  const Vector<Scalar> inv = dec.singular_values.head(r).cwiseInverse();
  Matrix<Scalar> coeff = dec.u_basis.leftCols(r).transpose() * u;
  coeff = inv.asDiagonal() * coeff;
  return dec.v_basis.leftCols(r) * coeff;
}

template <class DerivedX, class DerivedY>
typename DerivedX::Scalar pearson(const Eigen::MatrixBase<DerivedX>& x,
                                  const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  if (x.size() != y.size()) throw ArgumentError("pearson: length mismatch");
  if (x.size() < 3) throw ArgumentError("pearson: need at least 3 observations");
  const Vector<Scalar> xc = x.reshaped().array() - x.mean();
  const Vector<Scalar> yc = y.reshaped().array() - y.mean();
  const Scalar sx = xc.norm();
  const Scalar sy = yc.norm();
  if (sx == Scalar(0) || sy == Scalar(0)) throw ArgumentError("pearson: zero variance");
  const Scalar r = xc.dot(yc) / (sx * sy);
  return std::clamp(r, Scalar(-1), Scalar(1));
}

template <class Scalar>
struct CcaResult {
  Matrix<Scalar> proj_a;        // p x k canonical directions for the first view
  Matrix<Scalar> proj_u;        // d x k canonical directions for the second view
  Vector<Scalar> correlations;  // k canonical correlations, non-increasing
  Vector<Scalar> mean_a;        // column means removed before fitting
  Vector<Scalar> mean_u;
  std::vector<Eigen::Index> dropped_a;  // constant columns, zero rows in proj_a
  std::vector<Eigen::Index> dropped_u;

  Eigen::Index components() const { return correlations.size(); }
};

namespace detail {

template <class Scalar>
struct WhitenedView {
  Matrix<Scalar> basis;       // n x r orthonormal basis of the centered view
  Vector<Scalar> shrink;      // s / sqrt(s^2 + (n-1) ridge), in [0, 1]
  Matrix<Scalar> directions;  // q x r, maps centered rows to whitened scores
};

template <class Scalar>
WhitenedView<Scalar> whiten(const Matrix<Scalar>& centered, std::optional<Scalar> ridge) {
  const Eigen::Index n = centered.rows();
  const auto dec = svd(centered);
  const Scalar dof = static_cast<Scalar>(n - 1);
  const Vector<Scalar> var = dec.singular_values.array().square() / dof;
  const Scalar lambda =
      ridge.value_or(Scalar(1e-8) * var.sum() / static_cast<Scalar>(centered.cols()));
  const Eigen::Index r =
      numerical_rank(dec.singular_values, default_rcond<Scalar>(n, centered.cols()));

  WhitenedView<Scalar> view;
  view.basis = dec.u_basis.leftCols(r);
  const Vector<Scalar> reg = var.head(r).array() + lambda;
  view.shrink = (var.head(r).array() / reg.array()).sqrt();
  view.directions = dec.v_basis.leftCols(r) * reg.cwiseSqrt().cwiseInverse().asDiagonal();
  return view;
}

template <class Scalar>
Matrix<Scalar> drop_constant_columns(const Matrix<Scalar>& m, std::vector<Eigen::Index>& dropped,
                                     std::vector<Eigen::Index>& kept) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (m.col(c).maxCoeff() == m.col(c).minCoeff()) {
      dropped.push_back(c);
    } else {
      kept.push_back(c);
    }
  }
  Matrix<Scalar> out(m.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(kept[j]);
  return out;
}

}  // namespace detail

/// Regularized CCA between the row-aligned views a (n x p) and u (n x d).
///
/// Both views are column-centered and whitened through their SVD with
/// `ridge` added to the covariance eigenvalues s^2 / (n - 1). When `ridge`
/// is omitted it defaults to 1e-8 * trace(cov) / dim for each view. The
/// component count is the smaller of the two numerical ranks. Constant
/// columns are dropped (reported in dropped_a / dropped_u) and get zero
/// weight. Each proj_a column is signed so that its largest-magnitude entry
/// is non-negative; the matching proj_u column is flipped with it.
template <class DerivedA, class DerivedU>
CcaResult<typename DerivedA::Scalar> cca_fit(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedU>& u,
    std::optional<typename DerivedA::Scalar> ridge = std::nullopt) {
  using Scalar = typename DerivedA::Scalar;
  if (a.rows() != u.rows()) throw ArgumentError("cca_fit: views have different row counts");
  if (a.rows() < 3) throw ArgumentError("cca_fit: need at least 3 rows");
  if (ridge && !(*ridge >= Scalar(0))) throw ArgumentError("cca_fit: ridge must be >= 0");
  require_finite(a, "cca_fit view a");
  require_finite(u, "cca_fit view u");

  CcaResult<Scalar> out;
  out.mean_a = a.colwise().mean().transpose();
  out.mean_u = u.colwise().mean().transpose();
  std::vector<Eigen::Index> kept_a, kept_u;
  const Matrix<Scalar> ac = detail::drop_constant_columns<Scalar>(
      (a.rowwise() - out.mean_a.transpose()).eval(), out.dropped_a, kept_a);
  const Matrix<Scalar> uc = detail::drop_constant_columns<Scalar>(
      (u.rowwise() - out.mean_u.transpose()).eval(), out.dropped_u, kept_u);

  out.proj_a = Matrix<Scalar>::Zero(a.cols(), 0);
  out.proj_u = Matrix<Scalar>::Zero(u.cols(), 0);
  out.correlations.resize(0);
  if (ac.cols() == 0 || uc.cols() == 0) return out;

  const auto wa = detail::whiten<Scalar>(ac, ridge);
  const auto wu = detail::whiten<Scalar>(uc, ridge);
  const Eigen::Index k = std::min(wa.basis.cols(), wu.basis.cols());
  if (k == 0) return out;

  const Matrix<Scalar> cross =
      wa.shrink.asDiagonal() * (wa.basis.transpose() * wu.basis) * wu.shrink.asDiagonal();
  const auto dec = svd(cross);

  const Matrix<Scalar> dir_a = wa.directions * dec.u_basis.leftCols(k);
  const Matrix<Scalar> dir_u = wu.directions * dec.v_basis.leftCols(k);
  out.proj_a = Matrix<Scalar>::Zero(a.cols(), k);
  out.proj_u = Matrix<Scalar>::Zero(u.cols(), k);
  for (std::size_t j = 0; j < kept_a.size(); ++j) out.proj_a.row(kept_a[j]) = dir_a.row(static_cast<Eigen::Index>(j));
  for (std::size_t j = 0; j < kept_u.size(); ++j) out.proj_u.row(kept_u[j]) = dir_u.row(static_cast<Eigen::Index>(j));
  out.correlations = dec.singular_values.head(k);

  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index arg = 0;
    out.proj_a.col(c).cwiseAbs().maxCoeff(&arg);
    if (out.proj_a(arg, c) < Scalar(0)) {
      out.proj_a.col(c) *= Scalar(-1);
      out.proj_u.col(c) *= Scalar(-1);
    }
  }
  return out;
}

/// Canonical scores of raw rows `view` under fitted directions.
template <class DerivedV, class Scalar>
Matrix<Scalar> project(const Eigen::MatrixBase<DerivedV>& view, const Vector<Scalar>& mean,
                       const Matrix<Scalar>& directions) {
  return (view.rowwise() - mean.transpose()) * directions;
}

}  // namespace fusion_probe::numerics
