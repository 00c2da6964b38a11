#include "fddlab/estimators.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/QR>

namespace fddlab {

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::gmm:
      return "gmm";
    case EstimatorKind::genie_lmmse:
      return "glmmse";
    case EstimatorKind::sample_lmmse:
      return "slmmse";
    case EstimatorKind::omp:
      return "omp";
    case EstimatorKind::oracle:
      return "oracle";
    case EstimatorKind::zero:
      return "zero";
  }
  return "unknown";
}

EstimatorKind estimator_from_string(std::string_view id) {
  for (auto k : {EstimatorKind::gmm, EstimatorKind::genie_lmmse, EstimatorKind::sample_lmmse, EstimatorKind::omp,
                 EstimatorKind::oracle, EstimatorKind::zero})
    if (to_string(k) == id) return k;
  throw ConfigError("unknown estimator id '" + std::string(id) + "'");
}

Observation simulate_observation(const CVector& h, const PilotMatrix& pilot, int n_rx, double sigma2, Rng& rng) {
  return simulate_observation(h, pilot, n_rx, sigma2, complex_normal(rng, pilot.n_p() * n_rx));
}

Observation simulate_observation(const CVector& h, const PilotMatrix& pilot, int n_rx, double sigma2,
                                 const CVector& unit_noise) {
  if (n_rx < 1 || h.size() != pilot.n_tx() * n_rx) throw ConfigError("simulate_observation: dimension mismatch");
  if (!(sigma2 >= 0.0)) throw ConfigError("simulate_observation: negative noise variance");
  const Index m = pilot.n_p() * n_rx;
  if (unit_noise.size() < m) throw ConfigError("simulate_observation: noise vector too short");
  // (P ⊗ I)vec(H) = vec(H Pᵀ).
  Eigen::Map<const CMatrix> hm(h.data(), n_rx, pilot.n_tx());
  const CMatrix yh = hm * pilot.matrix().transpose();
  CVector y = Eigen::Map<const CVector>(yh.data(), m);
  if (sigma2 > 0.0) y += std::sqrt(sigma2) * unit_noise.head(m);
  return Observation{std::move(y), std::cref(pilot), sigma2, n_rx};
}

CMatrix observe_matrix(const CMatrix& channel, const CMatrix& pilot, const CMatrix& noise) {
  return channel * pilot.transpose() + noise;
}

CMatrix lmmse_filter(const CMatrix& covariance, const PilotMatrix& pilot, int n_rx, double sigma2) {
  return make_lmmse_system(covariance, linalg::pilot_operator(pilot.matrix(), n_rx), sigma2).filter;
}

Estimate genie_lmmse(const Observation& obs, const CMatrix& scenario_cov) {
  const CMatrix w = lmmse_filter(scenario_cov, obs.pilot_matrix(), obs.n_rx, obs.sigma2);
  return Estimate{w * obs.y, EstimatorKind::genie_lmmse};
}

std::pair<Estimate, Responsibilities> gmm_estimate(const Observation& obs, const GmmModel& model,
                                                   const ObservationGmm& obs_model) {
  if (obs_model.pilot_matrix() != obs.pilot_matrix().matrix() || obs_model.sigma2() != obs.sigma2)
    throw ConfigError("gmm_estimate: observation model was built for a different pilot or noise level");
  Responsibilities resp = responsibilities_observation(obs_model, obs.y);
  CVector h_hat = CVector::Zero(model.dim());
  for (int k = 0; k < obs_model.n_components(); ++k) {
    const double p = resp.probs[k];
    if (p == 0.0) continue;
    h_hat.noalias() += p * (obs_model.filter(k) * obs.y);
  }
  return {Estimate{std::move(h_hat), EstimatorKind::gmm}, std::move(resp)};
}

CMatrix sample_covariance(const CMatrix& samples) {
  if (samples.cols() < 1) throw ConfigError("sample_covariance: no samples");
  CMatrix c = CMatrix::Zero(samples.rows(), samples.rows());
  c.selfadjointView<Eigen::Lower>().rankUpdate(samples, 1.0 / static_cast<double>(samples.cols()));
  return c.selfadjointView<Eigen::Lower>();
}

Estimate sample_cov_lmmse(const Observation& obs, const CMatrix& sample_cov) {
  const CMatrix w = lmmse_filter(sample_cov, obs.pilot_matrix(), obs.n_rx, obs.sigma2);
  return Estimate{w * obs.y, EstimatorKind::sample_lmmse};
}

// --- OMP --------------------------------------------------------------------

namespace {

CMatrix angular_grid(int n, int oversampling) {
  // A single element has no angular resolution.
  const int g = n == 1 ? 1 : n * oversampling;
  CMatrix d(n, g);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (int j = 0; j < g; ++j) {
    const double u = -1.0 + 2.0 * j / g;
    for (int m = 0; m < n; ++m) d(m, j) = std::polar(norm, std::numbers::pi * m * u);
  }
  return d;
}

}  // namespace

OmpDictionary::OmpDictionary(int n_tx, int n_rx, int oversampling) : n_tx_(n_tx), n_rx_(n_rx) {
  if (n_tx < 1 || n_rx < 1 || oversampling < 1) throw ConfigError("OmpDictionary: invalid dimensions");
  atoms_ = linalg::kron(angular_grid(n_tx, oversampling), angular_grid(n_rx, oversampling));
}

Estimate omp_estimate(const Observation& obs, const OmpDictionary& dictionary, const OmpConfig& config,
                      const CVector* true_h, OmpTrace* trace) {
  const auto& pilot = obs.pilot_matrix();
  if (pilot.n_tx() != dictionary.n_tx() || obs.n_rx != dictionary.n_rx())
    throw ConfigError("omp_estimate: dictionary does not match the observation");
  const bool genie = config.mode == OmpConfig::Sparsity::genie;
  if (genie && true_h == nullptr) throw ConfigError("omp_estimate: genie sparsity needs the true channel");

  const CMatrix& d = dictionary.atoms();
  const CMatrix sensing = linalg::pilot_operator(pilot.matrix(), obs.n_rx) * d;
  const RVector col_norm = sensing.colwise().norm().transpose();
  if (!(col_norm.maxCoeff() > 0.0)) throw NumericError("omp_estimate: sensing matrix is zero");
  // Atoms the pilot cannot see are excluded; normalizing their round-off correlation would select them.
  const double visible = 1e-8 * col_norm.maxCoeff();

  const Index m = sensing.rows();
  int max_atoms = genie ? static_cast<int>(m) : (config.sparsity > 0 ? config.sparsity : static_cast<int>(pilot.n_p()));
  max_atoms = static_cast<int>(std::min<Index>(max_atoms, std::min(m, d.cols())));

  std::vector<Index> support;
  std::vector<char> used(static_cast<std::size_t>(d.cols()), 0);
  CVector residual = obs.y;
  CVector best = CVector::Zero(d.rows());
  double best_err = true_h ? true_h->squaredNorm() : 0.0;
  if (trace) {
    trace->support.clear();
    trace->residual_norms.assign(1, residual.norm());
  }
  const double y_norm = obs.y.norm();

  CVector h_hat = CVector::Zero(d.rows());
  for (int it = 0; it < max_atoms; ++it) {
    if (residual.norm() <= 1e-14 * std::max(y_norm, 1e-300)) break;
    const CVector corr = sensing.adjoint() * residual;
    Index arg = -1;
    double score = -1.0;
    for (Index j = 0; j < corr.size(); ++j) {
      if (used[static_cast<std::size_t>(j)] || col_norm[j] <= visible) continue;
      const double s = std::abs(corr[j]) / col_norm[j];
      if (s > score) {
        score = s;
        arg = j;
      }
    }
    if (arg < 0) break;
    used[static_cast<std::size_t>(arg)] = 1;
    support.push_back(arg);

    CMatrix a_s(m, static_cast<Index>(support.size()));
    CMatrix d_s(d.rows(), static_cast<Index>(support.size()));
    for (std::size_t i = 0; i < support.size(); ++i) {
      a_s.col(static_cast<Index>(i)) = sensing.col(support[i]);
      d_s.col(static_cast<Index>(i)) = d.col(support[i]);
    }
    const CVector x = a_s.colPivHouseholderQr().solve(obs.y);
    residual = obs.y - a_s * x;
    h_hat = d_s * x;
    if (trace) {
      trace->support = support;
      trace->residual_norms.push_back(residual.norm());
    }
    if (genie) {
      const double err = (*true_h - h_hat).squaredNorm();
      if (err < best_err) {
        best_err = err;
        best = h_hat;
      }
    }
  }
  return Estimate{genie ? best : h_hat, EstimatorKind::omp};
}

}  // namespace fddlab
