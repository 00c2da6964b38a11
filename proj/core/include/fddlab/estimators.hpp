#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "fddlab/channel_model.hpp"
#include "fddlab/observation.hpp"
#include "fddlab/pilots.hpp"
#include "fddlab/rng.hpp"

namespace fddlab {

/// Estimator identities used in result tables. `oracle` (ĥ = h) and `zero`
/// (ĥ = 0) are harness calibration references, not channel estimators.
enum class EstimatorKind { gmm, genie_lmmse, sample_lmmse, omp, oracle, zero };

std::string_view to_string(EstimatorKind kind);
EstimatorKind estimator_from_string(std::string_view id);

/// Received pilot block y = (P ⊗ I_{N_rx})h + n, n ~ N_C(0, σ²I).
struct Observation {
  CVector y;
  std::reference_wrapper<const PilotMatrix> pilot;
  double sigma2;
  int n_rx;

  const PilotMatrix& pilot_matrix() const { return pilot.get(); }
};

struct Estimate {
  CVector h_hat;
  EstimatorKind estimator = EstimatorKind::zero;
};

/// Draws the noise from `rng`.
Observation simulate_observation(const CVector& h, const PilotMatrix& pilot, int n_rx, double sigma2, Rng& rng);
/// Uses n = σ·w for a given CN(0, I) vector w (at least n_p·N_rx long; extra entries are ignored).
Observation simulate_observation(const CVector& h, const PilotMatrix& pilot, int n_rx, double sigma2,
                                 const CVector& unit_noise);

/// Y = H·Pᵀ + N for H of size N_rx × N_tx.
CMatrix observe_matrix(const CMatrix& channel, const CMatrix& pilot, const CMatrix& noise);

/// LMMSE filter C Aᴴ(A C Aᴴ + σ²I)⁻¹ for A = P ⊗ I_{N_rx}.
CMatrix lmmse_filter(const CMatrix& covariance, const PilotMatrix& pilot, int n_rx, double sigma2);

Estimate genie_lmmse(const Observation& obs, const CMatrix& scenario_cov);

/// Σ_k p(k|y)·W_k y with the responsibilities that produced it.
std::pair<Estimate, Responsibilities> gmm_estimate(const Observation& obs, const GmmModel& model,
                                                   const ObservationGmm& obs_model);

/// (1/L) Σ h hᴴ over the dataset columns.
CMatrix sample_covariance(const CMatrix& samples);

Estimate sample_cov_lmmse(const Observation& obs, const CMatrix& sample_cov);

struct OmpConfig {
  enum class Sparsity { fixed, genie };
  int oversampling = 2;
  Sparsity mode = Sparsity::fixed;
  /// Atom count in fixed mode; 0 means n_p.
  int sparsity = 0;
};

/// Unit-norm atoms d_tx ⊗ d_rx over oversampled angular grids, with spatial
/// frequencies sin θ uniformly spaced on [-1, 1).
class OmpDictionary {
 public:
  OmpDictionary(int n_tx, int n_rx, int oversampling = 2);

  const CMatrix& atoms() const { return atoms_; }
  int n_tx() const { return n_tx_; }
  int n_rx() const { return n_rx_; }
  Index size() const { return atoms_.cols(); }

 private:
  int n_tx_;
  int n_rx_;
  CMatrix atoms_;
};

struct OmpTrace {
  std::vector<Index> support;
  std::vector<double> residual_norms;  ///< ‖r‖ after each iteration, starting with ‖y‖
};

/// Greedy atom selection with a least-squares refit each iteration. In genie
/// mode `true_h` selects the iteration count with the smallest error.
Estimate omp_estimate(const Observation& obs, const OmpDictionary& dictionary, const OmpConfig& config,
                      const CVector* true_h = nullptr, OmpTrace* trace = nullptr);

}  // namespace fddlab
