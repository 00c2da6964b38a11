#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fddlab/channel_model.hpp"
#include "fddlab/estimators.hpp"
#include "fddlab/gmm.hpp"
#include "fddlab/observation.hpp"
#include "fddlab/pilots.hpp"

namespace fddlab {

/// Noise variance for a unit-power pilot: σ² = 10^(−SNR/10).
double snr_to_sigma2(double snr_db);

struct ProtocolConfig {
  int T = 10;
  int eval_block = 5;
  double snr_db = 10.0;
  int n_p = 1;
  std::uint64_t seed = 0;
  double rho = 1.0;

  void validate() const;
};

/// Base-station side of the loop: DFT pilot at t = 0, then the codebook entry
/// addressed by the most recent feedback.
class BsState {
 public:
  BsState(const PilotCodebook& codebook, PilotMatrix initial);
  /// Uses dft_pilot(N_tx, n_p, ρ) of the codebook's shape as the initial pilot.
  explicit BsState(const PilotCodebook& codebook);

  const PilotMatrix& pilot() const;
  void receive(const FeedbackIndex& feedback);
  void reset();

  const std::optional<FeedbackIndex>& last_feedback() const { return last_; }
  std::uint64_t feedback_bits() const { return bits_; }
  const PilotCodebook& codebook() const { return *codebook_; }

 private:
  const PilotCodebook* codebook_;
  PilotMatrix initial_;
  std::optional<FeedbackIndex> last_;
  std::uint64_t bits_ = 0;
};

struct MtOutput {
  Responsibilities responsibilities;
  FeedbackIndex feedback;
  Estimate estimate;
};

/// Mobile-terminal side: responsibilities, MAP feedback and the mixture
/// estimate, all from the current observation only.
class MtState {
 public:
  MtState(const GmmModel& model, ObservationCache& cache);

  MtOutput process(const Observation& obs);
  const GmmModel& model() const { return *model_; }

 private:
  const GmmModel* model_;
  ObservationCache* cache_;
};

/// Channel h_t followed by unit noise w_t (length N) for every block t = 0..T,
/// drawn in that interleaved order so a shorter episode is a prefix of a longer one.
struct EpisodeDraws {
  std::vector<CVector> channels;
  std::vector<CVector> unit_noise;
};

EpisodeDraws draw_episode(const ScenarioCovariance& scenario, int T, Rng& rng);

struct BlockRecord {
  int t = 0;
  double sq_error = 0.0;  ///< ‖h − ĥ‖²
  int feedback = 0;
  int feedback_bits = 0;
  std::string pilot_id;
};

std::vector<BlockRecord> run_episode(const EpisodeDraws& draws, BsState& bs, MtState& mt,
                                     const ProtocolConfig& config);
std::vector<BlockRecord> run_episode(const ScenarioCovariance& scenario, BsState& bs, MtState& mt,
                                     const ProtocolConfig& config, Rng& rng);
std::vector<BlockRecord> run_episode(const Scenario& scenario, BsState& bs, MtState& mt, const ProtocolConfig& config,
                                     Rng& rng, const QuadratureConfig& quadrature = {});

enum class PilotScheme { gmm, dft, random, genie };

std::string_view to_string(PilotScheme scheme);
PilotScheme pilot_scheme_from_string(std::string_view id);

struct SchemeSpec {
  EstimatorKind estimator = EstimatorKind::gmm;
  PilotScheme pilot = PilotScheme::gmm;
  int n_p = 1;
  /// Index into BenchmarkArtifacts::models, or −1 for model-free schemes.
  int model_index = -1;
};

struct ModelArtifact {
  std::shared_ptr<const GmmModel> model;
  std::map<int, PilotCodebook> codebooks;  ///< keyed by n_p
};

struct BenchmarkArtifacts {
  std::vector<ModelArtifact> models;
  std::optional<CMatrix> sample_covariance;
};

struct BenchmarkConfig {
  int n_tx = 1;
  int n_rx = 1;
  int T = 10;
  std::vector<int> record_blocks{5};
  std::vector<double> snr_db{10.0};
  std::uint64_t n_eval = 1;
  /// Root of the per-episode scenario/channel/noise streams.
  std::uint64_t eval_seed = 0;
  /// Root of the random pilot draws; reported in every record.
  std::uint64_t seed = 0;
  double rho = 1.0;
  ScenarioConfig scenario;
  QuadratureConfig quadrature;
  OmpConfig omp;
  std::vector<SchemeSpec> schemes;
};

struct NmseRecord {
  int t = 0;
  double snr_db = 0.0;
  std::string estimator;
  std::string pilot_scheme;
  int n_p = 0;
  int K = 0;  ///< 0 for schemes without a mixture model
  double nmse = 0.0;
  std::uint64_t n_eval = 0;
  std::uint64_t seed = 0;
  double std_error = 0.0;
  int scheme_index = 0;
};

struct BenchmarkResult {
  std::vector<NmseRecord> records;
  /// Per-episode ‖h − ĥ‖²/N, aligned with `records`, for paired comparisons.
  std::vector<std::vector<double>> episode_errors;
};

/// Evaluates every scheme on the same J episodes (common random numbers).
BenchmarkResult run_benchmark(const BenchmarkConfig& config, const BenchmarkArtifacts& artifacts);

/// Mean and 2-standard-error half width of the paired difference a − b.
struct PairedDifference {
  double mean = 0.0;
  double two_se = 0.0;
};

PairedDifference paired_difference(const std::vector<double>& a, const std::vector<double>& b);

inline double to_db(double x) { return 10.0 * std::log10(x); }

}  // namespace fddlab
