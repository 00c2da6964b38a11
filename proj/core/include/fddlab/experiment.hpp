#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fddlab/channel_model.hpp"
#include "fddlab/estimators.hpp"
#include "fddlab/gmm.hpp"
#include "fddlab/protocol.hpp"

namespace fddlab {

/// Paper-scale training and evaluation set sizes; desk-scale runs report their ratio to these.
inline constexpr std::uint64_t kPaperTrainSize = 100000;
inline constexpr std::uint64_t kPaperEvalSize = 10000;
inline constexpr std::uint64_t kDeskTrainSize = 20000;
inline constexpr std::uint64_t kDeskEvalSize = 2000;

/// A pipeline stage ran before the stage that produces its inputs.
class MissingArtifactError : public Error {
 public:
  MissingArtifactError(const std::string& what, std::string stage) : Error(what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Mixture layout: K_tx transmit and K_rx receive components (K_rx = 1 for MISO).
struct ModelSpec {
  int k_tx = 1;
  int k_rx = 1;

  int K() const { return k_tx * k_rx; }
  /// File-name tag, e.g. "k16x4".
  std::string tag() const;
};

struct FitSettings {
  int max_iters = 100;
  double rel_ll_tol = 1e-5;
  double reg_epsilon = 1e-6;
};

struct ExperimentSpec {
  std::string preset;
  int n_tx = 16;
  int n_rx = 4;
  std::vector<ModelSpec> models;
  std::vector<int> n_p;
  std::vector<double> snr_db;
  int T = 10;
  std::vector<int> record_blocks;
  std::uint64_t train_size = kDeskTrainSize;
  std::uint64_t eval_size = kDeskEvalSize;
  std::uint64_t seed = 1;
  double rho = 1.0;
  ScenarioConfig scenario;
  QuadratureConfig quadrature;
  FitSettings fit;
  OmpConfig omp;
  /// model_index refers to `models`.
  std::vector<SchemeSpec> schemes;
  std::filesystem::path out_dir = "fddlab_out";
  bool force = false;

  std::uint64_t train_seed() const;
  std::uint64_t eval_seed() const;
  std::uint64_t fit_seed(const ModelSpec& m) const;
  bool is_desk_scale() const { return train_size < kPaperTrainSize || eval_size < kPaperEvalSize; }

  /// Throws ConfigError on dimensionally inconsistent settings.
  void validate() const;
};

/// Command-line overrides; unset fields keep the preset value.
struct Overrides {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<double>> snr_db;
  std::optional<std::vector<int>> n_p;
  /// One value for single-model presets; the K list for the component sweep.
  std::optional<std::vector<int>> k_tx;
  std::optional<int> k_rx;
  std::optional<std::uint64_t> train_size;
  std::optional<std::uint64_t> eval_size;
  std::optional<int> blocks;
  std::optional<int> em_iters;
  bool force = false;
};

std::vector<std::string> preset_names();
ExperimentSpec make_preset(std::string_view name, const Overrides& overrides = {});

namespace paths {
std::filesystem::path train_dataset(const ExperimentSpec& s);
std::filesystem::path eval_dataset(const ExperimentSpec& s);
std::filesystem::path dataset_meta(const ExperimentSpec& s);
std::filesystem::path model(const ExperimentSpec& s, const ModelSpec& m);
std::filesystem::path codebook(const ExperimentSpec& s, const ModelSpec& m, int n_p);
std::filesystem::path sweep_csv(const ExperimentSpec& s);
std::filesystem::path sweep_sidecar(const ExperimentSpec& s);
}  // namespace paths

DatasetConfig train_config(const ExperimentSpec& spec);
/// Unnormalized: sample j is block 0 of evaluation episode j.
DatasetConfig eval_config(const ExperimentSpec& spec);

/// Fits one model on the training set: full-covariance EM for MISO, Kronecker EM otherwise.
FitResult fit_model(const ExperimentSpec& spec, const ModelSpec& m, const Dataset& train, std::ostream* log);

struct GenerateReport {
  DatasetHeader train;
  DatasetHeader eval;
};

GenerateReport cmd_generate(const ExperimentSpec& spec, std::ostream& log);

struct FitReport {
  ModelSpec model;
  FitTrace trace;
  FitTrace rx_trace;
  std::filesystem::path file;
};

std::vector<FitReport> cmd_fit(const ExperimentSpec& spec, std::ostream& log);

void cmd_codebook(const ExperimentSpec& spec, std::ostream& log);

struct SweepReport {
  BenchmarkResult result;
  double runtime_s = 0.0;
};

SweepReport cmd_sweep(const ExperimentSpec& spec, std::ostream& log);

/// CSV with header t,snr_db,estimator,pilot_scheme,n_p,K,nmse,n_eval,seed; reals as %.17g.
void write_sweep_csv(const std::vector<NmseRecord>& records, std::ostream& sink);

struct ReplayResult {
  std::size_t row = 0;
  NmseRecord expected;
  NmseRecord replayed;
  bool identical = false;
};

/// Recomputes one CSV row from the sweep sidecar. Artifacts are loaded when their
/// content hash matches the sidecar, otherwise regenerated from the recorded seeds.
ReplayResult replay_row(const std::filesystem::path& sidecar, std::size_t row, std::ostream& log);

/// FNV-1a over a file's bytes, as recorded in the sidecar.
std::uint64_t file_hash(const std::filesystem::path& file);

}  // namespace fddlab
