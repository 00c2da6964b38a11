#include "fddlab/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "fddlab/parallel.hpp"

namespace fddlab {

double snr_to_sigma2(double snr_db) {
  if (!std::isfinite(snr_db)) throw ConfigError("snr_db must be finite");
  return std::pow(10.0, -snr_db / 10.0);
}

void ProtocolConfig::validate() const {
  if (T < 0) throw ConfigError("protocol: T must be >= 0");
  if (eval_block < 0 || eval_block > T) throw ConfigError("protocol: eval_block must lie in [0, T]");
  if (n_p < 1) throw ConfigError("protocol: n_p must be >= 1");
  if (!(rho > 0.0)) throw ConfigError("protocol: rho must be positive");
  snr_to_sigma2(snr_db);
}

// --- BS / MT ----------------------------------------------------------------

BsState::BsState(const PilotCodebook& codebook, PilotMatrix initial)
    : codebook_(&codebook), initial_(std::move(initial)) {
  if (initial_.n_p() != codebook.n_p() || initial_.n_tx() != codebook.n_tx())
    throw ConfigError("BsState: initial pilot shape does not match the codebook");
}

BsState::BsState(const PilotCodebook& codebook)
    : BsState(codebook, dft_pilot(static_cast<int>(codebook.n_tx()), static_cast<int>(codebook.n_p()),
                                  codebook[0].rho())) {}

const PilotMatrix& BsState::pilot() const { return last_ ? (*codebook_)[last_->k_star] : initial_; }

void BsState::receive(const FeedbackIndex& feedback) {
  if (feedback.k_star < 0 || feedback.k_star >= codebook_->size())
    throw ConfigError("BsState: feedback index outside the codebook");
  last_ = feedback;
  bits_ += static_cast<std::uint64_t>(feedback.bit_width);
}

void BsState::reset() {
  last_.reset();
  bits_ = 0;
}

MtState::MtState(const GmmModel& model, ObservationCache& cache) : model_(&model), cache_(&cache) {
  if (&cache.model() != &model) throw ConfigError("MtState: cache belongs to a different model");
}

MtOutput MtState::process(const Observation& obs) {
  if (obs.pilot_matrix().n_tx() != model_->n_tx() || obs.n_rx != model_->n_rx())
    throw ConfigError("MtState: observation dimensions do not match the model");
  const auto obs_model = cache_->get(obs.pilot_matrix(), obs.sigma2);
  auto [estimate, resp] = gmm_estimate(obs, *model_, *obs_model);
  FeedbackIndex fb = map_feedback(resp);
  fb.bit_width = model_->feedback_bits();
  return MtOutput{std::move(resp), fb, std::move(estimate)};
}

// --- episodes ---------------------------------------------------------------

EpisodeDraws draw_episode(const ScenarioCovariance& scenario, int T, Rng& rng) {
  if (T < 0) throw ConfigError("draw_episode: T must be >= 0");
  EpisodeDraws d;
  const Index n = scenario.full().rows();
  d.channels.reserve(static_cast<std::size_t>(T) + 1);
  d.unit_noise.reserve(static_cast<std::size_t>(T) + 1);
  for (int t = 0; t <= T; ++t) {
    d.channels.push_back(scenario.sample(rng));
    d.unit_noise.push_back(complex_normal(rng, n));
  }
  return d;
}

std::vector<BlockRecord> run_episode(const EpisodeDraws& draws, BsState& bs, MtState& mt,
                                     const ProtocolConfig& config) {
  config.validate();
  const GmmModel& model = mt.model();
  if (bs.codebook().size() != model.n_components() || bs.codebook().n_tx() != model.n_tx() ||
      bs.codebook().n_p() != config.n_p)
    throw ConfigError("run_episode: codebook does not match the model or n_p");
  if (draws.channels.size() < static_cast<std::size_t>(config.T) + 1 || draws.unit_noise.size() != draws.channels.size())
    throw ConfigError("run_episode: not enough drawn blocks");
  if (draws.channels.front().size() != model.dim()) throw ConfigError("run_episode: channel dimension mismatch");

  const double sigma2 = snr_to_sigma2(config.snr_db);
  std::vector<BlockRecord> out;
  out.reserve(static_cast<std::size_t>(config.T) + 1);
  for (int t = 0; t <= config.T; ++t) {
    const auto idx = static_cast<std::size_t>(t);
    const PilotMatrix& pilot = bs.pilot();
    const Observation obs = simulate_observation(draws.channels[idx], pilot, model.n_rx(), sigma2, draws.unit_noise[idx]);
    MtOutput r = mt.process(obs);
    out.push_back(BlockRecord{t, (draws.channels[idx] - r.estimate.h_hat).squaredNorm(), r.feedback.k_star,
                              r.feedback.bit_width, pilot.id()});
    bs.receive(r.feedback);
  }
  return out;
}

std::vector<BlockRecord> run_episode(const ScenarioCovariance& scenario, BsState& bs, MtState& mt,
                                     const ProtocolConfig& config, Rng& rng) {
  config.validate();
  return run_episode(draw_episode(scenario, config.T, rng), bs, mt, config);
}

std::vector<BlockRecord> run_episode(const Scenario& scenario, BsState& bs, MtState& mt, const ProtocolConfig& config,
                                     Rng& rng, const QuadratureConfig& quadrature) {
  const ScenarioCovariance cov(scenario, UlaGeometry(mt.model().n_tx()), UlaGeometry(mt.model().n_rx()), quadrature);
  return run_episode(cov, bs, mt, config, rng);
}

// --- benchmark --------------------------------------------------------------

std::string_view to_string(PilotScheme scheme) {
  switch (scheme) {
    case PilotScheme::gmm:
      return "gmm";
    case PilotScheme::dft:
      return "dft";
    case PilotScheme::random:
      return "rnd";
    case PilotScheme::genie:
      return "genie";
  }
  return "unknown";
}

PilotScheme pilot_scheme_from_string(std::string_view id) {
  for (auto s : {PilotScheme::gmm, PilotScheme::dft, PilotScheme::random, PilotScheme::genie})
    if (to_string(s) == id) return s;
  if (id == "random") return PilotScheme::random;
  throw ConfigError("unknown pilot scheme '" + std::string(id) + "'");
}

namespace {

bool needs_model(const SchemeSpec& s) { return s.estimator == EstimatorKind::gmm || s.pilot == PilotScheme::gmm; }

void validate(const BenchmarkConfig& c, const BenchmarkArtifacts& a) {
  if (c.schemes.empty()) throw ConfigError("run_benchmark: empty scheme matrix");
  if (c.snr_db.empty()) throw ConfigError("run_benchmark: no SNR values");
  if (c.record_blocks.empty()) throw ConfigError("run_benchmark: no recorded blocks");
  if (c.n_eval < 1) throw ConfigError("run_benchmark: n_eval must be >= 1");
  if (c.n_tx < 1 || c.n_rx < 1) throw ConfigError("run_benchmark: invalid antenna counts");
  if (c.T < 0) throw ConfigError("run_benchmark: T must be >= 0");
  for (int t : c.record_blocks)
    if (t < 0 || t > c.T) throw ConfigError("run_benchmark: recorded block outside [0, T]");
  for (double s : c.snr_db) snr_to_sigma2(s);
  for (const auto& s : c.schemes) {
    if (s.n_p < 1 || s.n_p > c.n_tx) throw ConfigError("run_benchmark: n_p must lie in [1, N_tx]");
    if (needs_model(s)) {
      if (s.model_index < 0 || s.model_index >= static_cast<int>(a.models.size()))
        throw ConfigError("run_benchmark: scheme needs a model but model_index is invalid");
      const auto& m = a.models[static_cast<std::size_t>(s.model_index)];
      if (!m.model || m.model->n_tx() != c.n_tx || m.model->n_rx() != c.n_rx)
        throw ConfigError("run_benchmark: model dimensions do not match the benchmark");
      if (s.pilot == PilotScheme::gmm) {
        auto it = m.codebooks.find(s.n_p);
        if (it == m.codebooks.end()) throw ConfigError("run_benchmark: no codebook for n_p = " + std::to_string(s.n_p));
        if (it->second.size() != m.model->n_components() || it->second.n_tx() != c.n_tx)
          throw ConfigError("run_benchmark: codebook does not match its model");
      }
    }
    if (s.estimator == EstimatorKind::sample_lmmse) {
      if (!a.sample_covariance) throw ConfigError("run_benchmark: sample-covariance estimator needs a sample covariance");
      if (a.sample_covariance->rows() != static_cast<Index>(c.n_tx) * c.n_rx)
        throw ConfigError("run_benchmark: sample covariance dimension mismatch");
    }
  }
}

struct EpisodeData {
  EpisodeDraws draws;
  CMatrix full_cov;                                 // only when a genie-LMMSE scheme is present
  std::optional<linalg::HermitianEigen> tx_eigen;  // only when a genie-pilot scheme is present
};

}  // namespace

BenchmarkResult run_benchmark(const BenchmarkConfig& config, const BenchmarkArtifacts& artifacts) {
  validate(config, artifacts);
  const auto& schemes = config.schemes;
  const std::size_t n_schemes = schemes.size();
  const std::size_t J = static_cast<std::size_t>(config.n_eval);
  const Index n = static_cast<Index>(config.n_tx) * config.n_rx;

  std::vector<int> blocks = config.record_blocks;
  std::sort(blocks.begin(), blocks.end());
  blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
  const int max_block = blocks.back();

  bool want_full = false;
  bool want_eigen = false;
  for (const auto& s : schemes) {
    want_full |= s.estimator == EstimatorKind::genie_lmmse;
    want_eigen |= s.pilot == PilotScheme::genie;
  }

  // Per-episode scenario and draws, shared by every scheme and SNR.
  const UlaGeometry tx(config.n_tx);
  const UlaGeometry rx(config.n_rx);
  std::vector<EpisodeData> episodes(J);
  parallel_for(J, [&](std::size_t j) {
    Rng rng = make_stream(config.eval_seed, j);
    const Scenario scenario = draw_scenario(rng, config.scenario);
    const ScenarioCovariance cov(scenario, tx, rx, config.quadrature);
    EpisodeData& e = episodes[j];
    e.draws = draw_episode(cov, max_block, rng);
    if (want_full) e.full_cov = cov.full();
    if (want_eigen) e.tx_eigen = linalg::eigh_descending(cov.tx().matrix);
  });

  // Fixed pilots (same for every episode and block).
  std::vector<std::optional<PilotMatrix>> fixed(n_schemes);
  for (std::size_t s = 0; s < n_schemes; ++s) {
    const auto& sc = schemes[s];
    if (sc.pilot == PilotScheme::dft) fixed[s] = dft_pilot(config.n_tx, sc.n_p, config.rho);
    if (sc.pilot == PilotScheme::random)
      fixed[s] = random_pilot(config.n_tx, sc.n_p, config.rho, derive_seed(config.seed, stream::kPilot, sc.n_p));
  }

  std::optional<OmpDictionary> dictionary;
  for (const auto& s : schemes)
    if (s.estimator == EstimatorKind::omp && !dictionary)
      dictionary.emplace(config.n_tx, config.n_rx, config.omp.oversampling);

  std::vector<std::unique_ptr<ObservationCache>> caches;
  for (const auto& m : artifacts.models)
    caches.push_back(std::make_unique<ObservationCache>(*m.model, static_cast<std::size_t>(m.model->n_components()) + 4));

  // errors[(scheme * n_snr + snr) * n_blocks + b][j]
  const std::size_t n_snr = config.snr_db.size();
  const std::size_t n_blocks = blocks.size();
  std::vector<std::vector<double>> errors(n_schemes * n_snr * n_blocks, std::vector<double>(J, 0.0));
  auto slot = [&](std::size_t s, std::size_t q, std::size_t b) -> std::vector<double>& {
    return errors[(s * n_snr + q) * n_blocks + b];
  };

  for (std::size_t q = 0; q < n_snr; ++q) {
    const double sigma2 = snr_to_sigma2(config.snr_db[q]);

    // Sample-covariance filters for fixed pilots depend only on (pilot, σ²).
    std::vector<std::optional<CMatrix>> sample_filters(n_schemes);
    for (std::size_t s = 0; s < n_schemes; ++s)
      if (schemes[s].estimator == EstimatorKind::sample_lmmse && fixed[s])
        sample_filters[s] = lmmse_filter(*artifacts.sample_covariance, *fixed[s], config.n_rx, sigma2);

    parallel_for(J, [&](std::size_t j) {
      const EpisodeData& ep = episodes[j];
      for (std::size_t s = 0; s < n_schemes; ++s) {
        const SchemeSpec& sc = schemes[s];
        const GmmModel* model =
            sc.model_index >= 0 ? artifacts.models[static_cast<std::size_t>(sc.model_index)].model.get() : nullptr;
        ObservationCache* cache = sc.model_index >= 0 ? caches[static_cast<std::size_t>(sc.model_index)].get() : nullptr;

        std::optional<PilotMatrix> episode_pilot;
        if (sc.pilot == PilotScheme::genie) episode_pilot = genie_pilot(*ep.tx_eigen, sc.n_p, config.rho, j);

        auto estimate = [&](const Observation& obs, const CVector& h) -> CVector {
          switch (sc.estimator) {
            case EstimatorKind::gmm: {
              if (sc.pilot == PilotScheme::genie) {
                const ObservationGmm om(*model, obs.pilot_matrix(), sigma2);
                return gmm_estimate(obs, *model, om).first.h_hat;
              }
              return gmm_estimate(obs, *model, *cache->get(obs.pilot_matrix(), sigma2)).first.h_hat;
            }
            case EstimatorKind::genie_lmmse:
              return genie_lmmse(obs, ep.full_cov).h_hat;
            case EstimatorKind::sample_lmmse:
              if (sample_filters[s]) return *sample_filters[s] * obs.y;
              return sample_cov_lmmse(obs, *artifacts.sample_covariance).h_hat;
            case EstimatorKind::omp:
              return omp_estimate(obs, *dictionary, config.omp, &h).h_hat;
            case EstimatorKind::oracle:
              return h;
            case EstimatorKind::zero:
              return CVector::Zero(h.size());
          }
          return CVector::Zero(h.size());
        };

        auto record = [&](int t, const CVector& h, const CVector& h_hat) {
          const auto it = std::lower_bound(blocks.begin(), blocks.end(), t);
          if (it == blocks.end() || *it != t) return;
          slot(s, q, static_cast<std::size_t>(it - blocks.begin()))[j] =
              (h - h_hat).squaredNorm() / static_cast<double>(n);
        };

        if (sc.pilot == PilotScheme::gmm) {
          const PilotCodebook& cb = artifacts.models[static_cast<std::size_t>(sc.model_index)].codebooks.at(sc.n_p);
          BsState bs(cb);
          MtState mt(*model, *cache);
          for (int t = 0; t <= max_block; ++t) {
            const auto ti = static_cast<std::size_t>(t);
            const CVector& h = ep.draws.channels[ti];
            const Observation obs = simulate_observation(h, bs.pilot(), config.n_rx, sigma2, ep.draws.unit_noise[ti]);
            MtOutput out = mt.process(obs);
            if (sc.estimator == EstimatorKind::gmm)
              record(t, h, out.estimate.h_hat);
            else
              record(t, h, estimate(obs, h));
            bs.receive(out.feedback);
          }
        } else {
          const PilotMatrix& pilot = episode_pilot ? *episode_pilot : *fixed[s];
          for (int t : blocks) {
            const auto ti = static_cast<std::size_t>(t);
            const CVector& h = ep.draws.channels[ti];
            const Observation obs = simulate_observation(h, pilot, config.n_rx, sigma2, ep.draws.unit_noise[ti]);
            record(t, h, estimate(obs, h));
          }
        }
      }
    });
  }

  BenchmarkResult result;
  for (std::size_t s = 0; s < n_schemes; ++s) {
    const SchemeSpec& sc = schemes[s];
    const int K = sc.model_index >= 0
                      ? artifacts.models[static_cast<std::size_t>(sc.model_index)].model->n_components()
                      : 0;
    for (std::size_t q = 0; q < n_snr; ++q) {
      for (std::size_t b = 0; b < n_blocks; ++b) {
        std::vector<double>& e = slot(s, q, b);
        double sum = 0.0;
        for (double v : e) sum += v;
        const double mean = sum / static_cast<double>(J);
        double ss = 0.0;
        for (double v : e) ss += (v - mean) * (v - mean);
        const double se = J > 1 ? std::sqrt(ss / static_cast<double>(J - 1) / static_cast<double>(J)) : 0.0;
        result.records.push_back(NmseRecord{blocks[b], config.snr_db[q], std::string(to_string(sc.estimator)),
                                            std::string(to_string(sc.pilot)), sc.n_p, K, mean, config.n_eval,
                                            config.seed, se, static_cast<int>(s)});
        result.episode_errors.push_back(std::move(e));
      }
    }
  }
  return result;
}

PairedDifference paired_difference(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw ConfigError("paired_difference: size mismatch");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double se = a.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return PairedDifference{mean, 2.0 * se};
}

}  // namespace fddlab
