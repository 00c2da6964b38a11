#pragma once

#include <cstddef>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "fddlab/gmm.hpp"
#include "fddlab/linalg.hpp"
#include "fddlab/pilots.hpp"

namespace fddlab {

/// LMMSE quantities for one covariance observed through A = P ⊗ I:
/// Σ = A C Aᴴ + σ²I (+ tiny loading), its Cholesky factor, and W = C Aᴴ Σ⁻¹.
struct LmmseSystem {
  CMatrix innovation;
  linalg::HermitianFactor factor;
  CMatrix filter;
};

/// Relative diagonal loading applied to every innovation matrix.
inline constexpr double kInnovationLoading = 1e-12;

LmmseSystem make_lmmse_system(const CMatrix& covariance, const CMatrix& pilot_op, double sigma2);

/// Mixture of the observations y = (P ⊗ I)h + n induced by a channel mixture.
class ObservationGmm {
 public:
  ObservationGmm(const GmmModel& model, const PilotMatrix& pilot, double sigma2);

  int n_components() const { return static_cast<int>(systems_.size()); }
  Index obs_dim() const { return obs_dim_; }
  double sigma2() const { return sigma2_; }
  const std::string& pilot_id() const { return pilot_id_; }
  const CMatrix& pilot_matrix() const { return pilot_matrix_; }
  const RVector& log_weights() const { return log_weights_; }

  const CMatrix& covariance(int k) const { return systems_.at(static_cast<std::size_t>(k)).innovation; }
  const linalg::HermitianFactor& factor(int k) const { return systems_.at(static_cast<std::size_t>(k)).factor; }
  /// Per-component LMMSE filter W_k (N × n_p·N_rx).
  const CMatrix& filter(int k) const { return systems_.at(static_cast<std::size_t>(k)).filter; }

 private:
  std::string pilot_id_;
  CMatrix pilot_matrix_;
  double sigma2_;
  Index obs_dim_;
  RVector log_weights_;
  std::vector<LmmseSystem> systems_;
};

ObservationGmm observation_model(const GmmModel& model, const PilotMatrix& pilot, double sigma2);

Responsibilities responsibilities_observation(const ObservationGmm& obs_model, const CVector& y);

/// Bounded LRU of observation mixtures keyed by (pilot id, σ²) for one model.
/// Lookups are thread-safe; concurrent misses may build the same entry twice.
class ObservationCache {
 public:
  explicit ObservationCache(const GmmModel& model, std::size_t capacity = 0);

  std::shared_ptr<const ObservationGmm> get(const PilotMatrix& pilot, double sigma2);

  const GmmModel& model() const { return model_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const;
  std::size_t hits() const;
  std::size_t misses() const;

 private:
  struct Entry {
    std::string key;
    std::shared_ptr<const ObservationGmm> value;
  };

  const GmmModel& model_;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::list<Entry> lru_;
  std::unordered_map<std::string, std::list<Entry>::iterator> index_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

}  // namespace fddlab
