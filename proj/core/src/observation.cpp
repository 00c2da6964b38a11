#include "fddlab/observation.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "fddlab/parallel.hpp"

namespace fddlab {

LmmseSystem make_lmmse_system(const CMatrix& covariance, const CMatrix& pilot_op, double sigma2) {
  if (pilot_op.cols() != covariance.rows()) throw ConfigError("LMMSE: pilot operator does not match covariance");
  if (!(sigma2 >= 0.0)) throw ConfigError("LMMSE: noise variance must be non-negative");
  const Index m = pilot_op.rows();
  const CMatrix ac = pilot_op * covariance;  // A C
  CMatrix innovation = linalg::hermitian_part(ac * pilot_op.adjoint());
  innovation.diagonal().array() += sigma2;

  const double avg = innovation.trace().real() / static_cast<double>(m);
  const double scale = std::max(std::abs(avg), std::numeric_limits<double>::min());
  const auto eig_floor = -1e-10 * scale;
  if (innovation.diagonal().real().minCoeff() < eig_floor)
    throw NumericError("LMMSE: innovation matrix has negative diagonal");
  innovation.diagonal().array() += kInnovationLoading * scale;

  linalg::HermitianFactor factor;
  try {
    factor = linalg::HermitianFactor(innovation);
  } catch (const NumericError&) {
    throw NumericError("LMMSE: innovation matrix is not positive definite beyond loading tolerance");
  }
  // W = C Aᴴ Σ⁻¹ = (Σ⁻¹ A C)ᴴ since C and Σ are Hermitian.
  CMatrix filter = factor.solve(ac).adjoint();
  return LmmseSystem{std::move(innovation), std::move(factor), std::move(filter)};
}

ObservationGmm::ObservationGmm(const GmmModel& model, const PilotMatrix& pilot, double sigma2)
    : pilot_id_(pilot.id()), pilot_matrix_(pilot.matrix()), sigma2_(sigma2) {
  if (pilot.n_tx() != model.n_tx()) throw ConfigError("observation_model: pilot width must equal N_tx");
  if (!(sigma2 > 0.0)) throw ConfigError("observation_model: sigma2 must be positive");
  const CMatrix op = linalg::pilot_operator(pilot.matrix(), model.n_rx());
  obs_dim_ = op.rows();
  log_weights_ = model.weights().array().log().matrix();
  systems_.resize(static_cast<std::size_t>(model.n_components()));
  parallel_for(systems_.size(), [&](std::size_t k) {
    systems_[k] = make_lmmse_system(model.covariance(static_cast<int>(k)), op, sigma2);
  });
}

ObservationGmm observation_model(const GmmModel& model, const PilotMatrix& pilot, double sigma2) {
  return ObservationGmm(model, pilot, sigma2);
}

Responsibilities responsibilities_observation(const ObservationGmm& obs_model, const CVector& y) {
  if (y.size() != obs_model.obs_dim()) throw ConfigError("responsibilities_observation: dimension mismatch");
  RVector terms(obs_model.n_components());
  for (int k = 0; k < obs_model.n_components(); ++k)
    terms[k] = obs_model.log_weights()[k] + obs_model.factor(k).log_density(y);
  return normalize_log_posteriors(terms);
}

ObservationCache::ObservationCache(const GmmModel& model, std::size_t capacity)
    : model_(model), capacity_(capacity == 0 ? 4 * static_cast<std::size_t>(model.n_components()) : capacity) {}

std::shared_ptr<const ObservationGmm> ObservationCache::get(const PilotMatrix& pilot, double sigma2) {
  const std::string key = pilot.id() + "@" + std::to_string(std::bit_cast<std::uint64_t>(sigma2));
  {
    std::lock_guard lock(mutex_);
    auto it = index_.find(key);
    if (it != index_.end() && it->second->value->pilot_matrix() == pilot.matrix()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      ++hits_;
      return it->second->value;
    }
    ++misses_;
  }
  auto built = std::make_shared<const ObservationGmm>(model_, pilot, sigma2);
  std::lock_guard lock(mutex_);
  if (auto it = index_.find(key); it != index_.end()) {
    lru_.erase(it->second);
    index_.erase(it);
  }
  lru_.push_front(Entry{key, built});
  index_[key] = lru_.begin();
  while (lru_.size() > capacity_) {
    index_.erase(lru_.back().key);
    lru_.pop_back();
  }
  return built;
}

std::size_t ObservationCache::size() const {
  std::lock_guard lock(mutex_);
  return lru_.size();
}

std::size_t ObservationCache::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

std::size_t ObservationCache::misses() const {
  std::lock_guard lock(mutex_);
  return misses_;
}

}  // namespace fddlab
