#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "fddlab/channel_model.hpp"
#include "fddlab/linalg.hpp"
#include "fddlab/types.hpp"

namespace fddlab {

/// Weights and zero-mean covariances of one mixture.
struct MixtureSide {
  RVector weights;
  std::vector<CMatrix> covariances;

  int size() const { return static_cast<int>(covariances.size()); }
  Index dim() const { return covariances.empty() ? 0 : covariances.front().rows(); }
};

/// Zero-mean complex Gaussian mixture over vec(H) ∈ C^N, N = n_tx·n_rx.
///
/// Either unconstrained (one N×N covariance per component) or Kronecker
/// factored, where component k = i·K_rx + j has covariance tx_i ⊗ rx_j.
/// Instances are immutable; Cholesky factors of every component covariance and
/// eigendecompositions of every transmit-side covariance are computed once at
/// construction.
class GmmModel {
 public:
  static GmmModel full(MixtureSide mixture, int n_tx, int n_rx);
  static GmmModel factored(MixtureSide tx, MixtureSide rx, RVector weights);

  int n_components() const { return static_cast<int>(weights_.size()); }
  Index dim() const { return static_cast<Index>(n_tx_) * n_rx_; }
  int n_tx() const { return n_tx_; }
  int n_rx() const { return n_rx_; }
  bool is_factored() const { return tx_.has_value(); }
  /// Feedback bits needed to address every component: ceil(log2 K).
  int feedback_bits() const;

  const RVector& weights() const { return weights_; }
  const CMatrix& covariance(int k) const { return covariances_.at(static_cast<std::size_t>(k)); }
  const MixtureSide& tx_factor() const;
  const MixtureSide& rx_factor() const;
  /// (i, j) with k = i·K_rx + j. Only for factored models.
  std::pair<int, int> factor_indices(int k) const;

  /// True when a transmit-side covariance exists per component (factored, or n_rx == 1).
  bool has_tx_covariances() const { return is_factored() || n_rx_ == 1; }
  const CMatrix& tx_covariance(int k) const;
  const linalg::HermitianEigen& tx_eigen(int k) const;

  /// Cholesky factor of component k's covariance, or nullopt if it is singular.
  const std::optional<linalg::HermitianFactor>& density_factor(int k) const {
    return factors_.at(static_cast<std::size_t>(k));
  }

 private:
  GmmModel() = default;
  void finalize();

  int n_tx_ = 0;
  int n_rx_ = 0;
  RVector weights_;
  std::vector<CMatrix> covariances_;
  std::optional<MixtureSide> tx_;
  std::optional<MixtureSide> rx_;
  std::vector<std::optional<linalg::HermitianFactor>> factors_;
  std::vector<linalg::HermitianEigen> tx_eigen_;
};

struct FitConfig {
  int max_iters = 100;
  double rel_ll_tol = 1e-5;
  double reg_epsilon = 1e-6;
  std::uint64_t seed = 0;
  /// After a Kronecker fit, one EM pass over the full data re-estimates the
  /// expanded weights with covariances frozen.
  bool refine_weights = true;
  /// Throw NumericError if the penalized log-likelihood ever drops by more than 1e-8 relative.
  bool check_monotone = false;
  /// Called with (side, iteration, mean log-likelihood); side is "full", "tx" or "rx".
  std::function<void(const char*, int, double)> on_iteration;
};

struct FitTrace {
  /// Mean per-sample log-likelihood, less the loading penalty, after initialization and after every M-step.
  std::vector<double> log_likelihood;
  int iterations = 0;
  int reseeds = 0;
  bool converged = false;
};

struct FitResult {
  GmmModel model;
  FitTrace trace;     ///< full fit, or the transmit side of a Kronecker fit
  FitTrace rx_trace;  ///< empty unless Kronecker
};

/// Zero-mean EM on the columns of `samples` (N × L).
FitResult fit_em(const CMatrix& samples, int n_components, const FitConfig& config, int n_tx, int n_rx);
FitResult fit_em(const Dataset& dataset, int n_components, const FitConfig& config);

/// Separate transmit/receive mixtures on row/column views of H, expanded by Kronecker products.
FitResult fit_kronecker(const Dataset& dataset, int k_tx, int k_rx, const FitConfig& config);

/// Mean per-sample log-likelihood of the samples (columns) under the model.
double mean_log_likelihood(const GmmModel& model, const CMatrix& samples);

struct Responsibilities {
  RVector probs;

  int size() const { return static_cast<int>(probs.size()); }
};

struct FeedbackIndex {
  int k_star = 0;
  int bit_width = 0;
};

/// Normalizes log(π_k) + log N_C(·) terms in the log domain; throws NumericError if all are −∞.
Responsibilities normalize_log_posteriors(const RVector& log_terms);

Responsibilities responsibilities_channel(const GmmModel& model, const CVector& h);

/// Argmax with ties resolved toward the lowest index.
FeedbackIndex map_feedback(const Responsibilities& resp);

void save_model(const GmmModel& model, std::ostream& sink);
GmmModel load_model(std::istream& source);

}  // namespace fddlab
