#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include <Eigen/Eigenvalues>

#include "fddlab/rng.hpp"
#include "fddlab/types.hpp"

namespace fddlab::test {

inline CMatrix random_psd(Rng& rng, Index n, Index rank = -1) {
  const CMatrix a = complex_normal(rng, n, rank < 0 ? n : rank);
  return a * a.adjoint();
}

inline double max_abs_diff(const CMatrix& a, const CMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Kronecker product by its index definition.
inline CMatrix kron_loops(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      for (Index k = 0; k < b.rows(); ++k)
        for (Index l = 0; l < b.cols(); ++l) out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

inline double min_eig(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(a);
  return es.eigenvalues().minCoeff();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  std::filesystem::path root = std::filesystem::temp_directory_path() / "fddlab_tests";
  if (const char* env = std::getenv("FDDLAB_TEST_TMP")) root = env;
  const auto dir = root / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fddlab::test
