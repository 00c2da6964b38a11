#include "fddlab/linalg.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace fddlab::linalg {

HermitianEigen eigh_descending(const CMatrix& a) {
  if (a.rows() != a.cols()) throw ConfigError("eigh_descending: matrix must be square");
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(a);
  if (solver.info() != Eigen::Success) throw NumericError("eigh_descending: solver did not converge");

  const Index n = a.rows();
  HermitianEigen out{RVector(n), CMatrix(n, n)};
  for (Index i = 0; i < n; ++i) {
    // Eigen returns ascending order.
    const Index src = n - 1 - i;
    out.values[i] = solver.eigenvalues()[src];
    CVector v = solver.eigenvectors().col(src);
    Index arg = 0;
    double best = -1.0;
    for (Index m = 0; m < n; ++m) {
      const double mag = std::abs(v[m]);
      if (mag > best * (1.0 + 1e-12)) {
        best = mag;
        arg = m;
      }
    }
    if (best > 0.0) v *= std::conj(v[arg]) / best;
    out.vectors.col(i) = v;
  }
  return out;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

CMatrix pilot_operator(const CMatrix& pilot, Index n_rx) {
  return kron(pilot, CMatrix::Identity(n_rx, n_rx));
}

double max_abs(const CMatrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

HermitianFactor::HermitianFactor(const CMatrix& a) : llt_(a) {
  if (llt_.info() != Eigen::Success) throw NumericError("Cholesky factorization failed (matrix not positive definite)");
  const auto& l = llt_.matrixLLT();
  double acc = 0.0;
  for (Index i = 0; i < l.rows(); ++i) acc += std::log(l(i, i).real());
  log_det_ = 2.0 * acc;
  if (!std::isfinite(log_det_)) throw NumericError("Cholesky factorization produced a non-finite determinant");
}

double HermitianFactor::quadratic_form(const CVector& x) const {
  return llt_.matrixL().solve(x).squaredNorm();
}

RVector HermitianFactor::quadratic_forms(const CMatrix& x) const {
  CMatrix w = llt_.matrixL().solve(x);
  return w.colwise().squaredNorm().transpose();
}

double HermitianFactor::log_density(const CVector& x) const {
  const double n = static_cast<double>(x.size());
  return -n * std::log(std::numbers::pi) - log_det_ - quadratic_form(x);
}

double log_sum_exp(const RVector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace fddlab::linalg
