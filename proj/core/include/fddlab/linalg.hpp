#pragma once

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "fddlab/types.hpp"

namespace fddlab::linalg {

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Each eigenvector is phase-normalized so that its
/// largest-magnitude entry (lowest index on ties) is real and positive.
struct HermitianEigen {
  RVector values;
  CMatrix vectors;
};

HermitianEigen eigh_descending(const CMatrix& a);

CMatrix kron(const CMatrix& a, const CMatrix& b);

/// (P ⊗ I_n) for a pilot P; maps vec(H) to vec(H Pᵀ) for H with n rows.
CMatrix pilot_operator(const CMatrix& pilot, Index n_rx);

inline CMatrix hermitian_part(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

double max_abs(const CMatrix& a);

/// Cholesky factor of a Hermitian positive-definite matrix together with its
/// log-determinant. Construction throws NumericError on failure.
class HermitianFactor {
 public:
  HermitianFactor() = default;
  explicit HermitianFactor(const CMatrix& a);

  Index dim() const { return llt_.rows(); }
  double log_det() const { return log_det_; }
  const Eigen::LLT<CMatrix>& llt() const { return llt_; }

  /// xᴴ A⁻¹ x via one triangular solve.
  double quadratic_form(const CVector& x) const;
  /// Column-wise xᴴ A⁻¹ x for all columns of X.
  RVector quadratic_forms(const CMatrix& x) const;
  /// log N_C(x; 0, A).
  double log_density(const CVector& x) const;
  CMatrix solve(const CMatrix& b) const { return llt_.solve(b); }

 private:
  Eigen::LLT<CMatrix> llt_;
  double log_det_ = 0.0;
};

/// exp(x), or exactly 0 once the result would be below ~1e-300. Keeps
/// normalized posteriors free of subnormals.
inline double flushed_exp(double x) { return x < -690.0 ? 0.0 : std::exp(x); }

/// log Σ exp(v) with max-subtraction; −∞ if every entry is −∞.
double log_sum_exp(const RVector& v);

}  // namespace fddlab::linalg
