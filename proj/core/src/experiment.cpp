#include "fddlab/experiment.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "fddlab/parallel.hpp"
#include "fddlab/pilots.hpp"

namespace fddlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSidecarFormat = "fddlab-sweep/1";
constexpr std::uint64_t kPaperBlock = 5;

std::vector<double> snr_range(double lo, double hi, double step) {
  std::vector<double> v;
  for (double s = lo; s <= hi + 1e-9; s += step) v.push_back(s);
  return v;
}

int eval_block(int T) { return std::min<int>(static_cast<int>(kPaperBlock), T); }

bool is_mimo_preset(std::string_view name) { return name == "fig1_mimo_16x4" || name == "fig2_blocks"; }

void build_schemes(ExperimentSpec& s) {
  s.schemes.clear();
  auto add = [&](EstimatorKind e, PilotScheme p, int n_p, int model) { s.schemes.push_back({e, p, n_p, model}); };
  if (s.preset == "fig1_mimo_16x4") {
    for (int n_p : s.n_p) {
      add(EstimatorKind::gmm, PilotScheme::gmm, n_p, 0);
      add(EstimatorKind::gmm, PilotScheme::dft, n_p, 0);
      add(EstimatorKind::gmm, PilotScheme::random, n_p, 0);
      add(EstimatorKind::sample_lmmse, PilotScheme::dft, n_p, -1);
      add(EstimatorKind::sample_lmmse, PilotScheme::random, n_p, -1);
      add(EstimatorKind::omp, PilotScheme::dft, n_p, -1);
      add(EstimatorKind::omp, PilotScheme::random, n_p, -1);
      add(EstimatorKind::genie_lmmse, PilotScheme::genie, n_p, -1);
    }
  } else if (s.preset == "fig2_blocks") {
    for (int n_p : s.n_p) {
      add(EstimatorKind::gmm, PilotScheme::gmm, n_p, 0);
      add(EstimatorKind::gmm, PilotScheme::dft, n_p, 0);
      add(EstimatorKind::gmm, PilotScheme::random, n_p, 0);
      add(EstimatorKind::genie_lmmse, PilotScheme::genie, n_p, -1);
    }
  } else if (s.preset == "fig3_miso_64") {
    for (int n_p : s.n_p) {
      add(EstimatorKind::gmm, PilotScheme::gmm, n_p, 0);
      add(EstimatorKind::gmm, PilotScheme::dft, n_p, 0);
      add(EstimatorKind::gmm, PilotScheme::random, n_p, 0);
      add(EstimatorKind::genie_lmmse, PilotScheme::genie, n_p, -1);
    }
  } else {
    for (int n_p : s.n_p) {
      for (std::size_t m = 0; m < s.models.size(); ++m) add(EstimatorKind::gmm, PilotScheme::gmm, n_p, static_cast<int>(m));
      add(EstimatorKind::genie_lmmse, PilotScheme::genie, n_p, -1);
    }
  }
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + p.string() + "' for writing");
  return f;
}

std::ifstream open_in(const fs::path& p, const std::string& stage) {
  if (!fs::exists(p))
    throw MissingArtifactError("missing '" + p.string() + "'; run `fddlab " + stage + "` with the same preset and flags first",
                               stage);
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open '" + p.string() + "'");
  return f;
}

Dataset load_dataset(const fs::path& p) {
  auto f = open_in(p, "generate");
  return read_dataset(f);
}

GmmModel load_model_file(const fs::path& p) {
  auto f = open_in(p, "fit");
  return load_model(f);
}

PilotCodebook load_codebook_file(const fs::path& p) {
  auto f = open_in(p, "codebook");
  return load_codebook(f);
}

// --- JSON -------------------------------------------------------------------

json spec_to_json(const ExperimentSpec& s) {
  json j;
  j["preset"] = s.preset;
  j["n_tx"] = s.n_tx;
  j["n_rx"] = s.n_rx;
  j["models"] = json::array();
  for (const auto& m : s.models) j["models"].push_back({{"k_tx", m.k_tx}, {"k_rx", m.k_rx}});
  j["n_p"] = s.n_p;
  j["snr_db"] = s.snr_db;
  j["T"] = s.T;
  j["record_blocks"] = s.record_blocks;
  j["train_size"] = s.train_size;
  j["eval_size"] = s.eval_size;
  j["seed"] = s.seed;
  j["rho"] = s.rho;
  j["scenario"] = {{"sigma_as_tx", s.scenario.sigma_as_tx},
                   {"sigma_as_rx", s.scenario.sigma_as_rx},
                   {"n_clusters", s.scenario.n_clusters}};
  j["quadrature_nodes"] = s.quadrature.nodes;
  j["fit"] = {{"max_iters", s.fit.max_iters}, {"rel_ll_tol", s.fit.rel_ll_tol}, {"reg_epsilon", s.fit.reg_epsilon}};
  j["omp"] = {{"oversampling", s.omp.oversampling},
              {"mode", s.omp.mode == OmpConfig::Sparsity::genie ? "genie" : "fixed"},
              {"sparsity", s.omp.sparsity}};
  j["schemes"] = json::array();
  for (const auto& sc : s.schemes)
    j["schemes"].push_back({{"estimator", to_string(sc.estimator)},
                            {"pilot_scheme", to_string(sc.pilot)},
                            {"n_p", sc.n_p},
                            {"model_index", sc.model_index}});
  return j;
}

ExperimentSpec spec_from_json(const json& j) {
  ExperimentSpec s;
  s.preset = j.at("preset").get<std::string>();
  s.n_tx = j.at("n_tx").get<int>();
  s.n_rx = j.at("n_rx").get<int>();
  for (const auto& m : j.at("models")) s.models.push_back({m.at("k_tx").get<int>(), m.at("k_rx").get<int>()});
  s.n_p = j.at("n_p").get<std::vector<int>>();
  s.snr_db = j.at("snr_db").get<std::vector<double>>();
  s.T = j.at("T").get<int>();
  s.record_blocks = j.at("record_blocks").get<std::vector<int>>();
  s.train_size = j.at("train_size").get<std::uint64_t>();
  s.eval_size = j.at("eval_size").get<std::uint64_t>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.rho = j.at("rho").get<double>();
  const auto& sc = j.at("scenario");
  s.scenario.sigma_as_tx = sc.at("sigma_as_tx").get<double>();
  s.scenario.sigma_as_rx = sc.at("sigma_as_rx").get<double>();
  s.scenario.n_clusters = sc.at("n_clusters").get<int>();
  s.quadrature.nodes = j.at("quadrature_nodes").get<int>();
  const auto& f = j.at("fit");
  s.fit.max_iters = f.at("max_iters").get<int>();
  s.fit.rel_ll_tol = f.at("rel_ll_tol").get<double>();
  s.fit.reg_epsilon = f.at("reg_epsilon").get<double>();
  const auto& o = j.at("omp");
  s.omp.oversampling = o.at("oversampling").get<int>();
  s.omp.mode = o.at("mode").get<std::string>() == "genie" ? OmpConfig::Sparsity::genie : OmpConfig::Sparsity::fixed;
  s.omp.sparsity = o.at("sparsity").get<int>();
  for (const auto& x : j.at("schemes"))
    s.schemes.push_back({estimator_from_string(x.at("estimator").get<std::string>()),
                         pilot_scheme_from_string(x.at("pilot_scheme").get<std::string>()), x.at("n_p").get<int>(),
                         x.at("model_index").get<int>()});
  return s;
}

json read_json(const fs::path& p, const std::string& stage) {
  auto f = open_in(p, stage);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw FormatError("'" + p.string() + "' is not valid JSON: " + e.what());
  }
}

// Checks that dataset.json was written for the same data-defining settings.
void check_dataset_meta(const ExperimentSpec& spec) {
  const json meta = read_json(paths::dataset_meta(spec), "generate");
  try {
    const bool same = meta.at("n_tx").get<int>() == spec.n_tx && meta.at("n_rx").get<int>() == spec.n_rx &&
                      meta.at("train_seed").get<std::uint64_t>() == spec.train_seed() &&
                      meta.at("eval_seed").get<std::uint64_t>() == spec.eval_seed() &&
                      meta.at("train_size").get<std::uint64_t>() == spec.train_size &&
                      meta.at("eval_size").get<std::uint64_t>() == spec.eval_size;
    if (!same)
      throw ConfigError("datasets in '" + spec.out_dir.string() +
                        "' were generated with different dimensions, sizes or seed; rerun `fddlab generate --force`");
  } catch (const json::exception& e) {
    throw FormatError(std::string("dataset.json: ") + e.what());
  }
}

void refuse_existing(const std::vector<fs::path>& files, bool force) {
  if (force) return;
  for (const auto& f : files)
    if (fs::exists(f)) throw ConfigError("'" + f.string() + "' already exists; pass --force to overwrite");
}

}  // namespace

// --- spec -------------------------------------------------------------------

std::string ModelSpec::tag() const { return "k" + std::to_string(k_tx) + "x" + std::to_string(k_rx); }

std::uint64_t ExperimentSpec::train_seed() const { return derive_seed(seed, stream::kTrain); }
std::uint64_t ExperimentSpec::eval_seed() const { return derive_seed(seed, stream::kEval); }
std::uint64_t ExperimentSpec::fit_seed(const ModelSpec& m) const {
  return derive_seed(seed, stream::kFit, static_cast<std::uint64_t>(m.k_tx), static_cast<std::uint64_t>(m.k_rx));
}

void ExperimentSpec::validate() const {
  if (n_tx < 1 || n_rx < 1) throw ConfigError("antenna counts must be >= 1");
  if (train_size < 1 || eval_size < 1) throw ConfigError("train and eval sizes must be >= 1");
  if (T < 0) throw ConfigError("--blocks must be >= 0");
  if (snr_db.empty()) throw ConfigError("no SNR values");
  if (n_p.empty()) throw ConfigError("no pilot counts");
  for (int p : n_p)
    if (p < 1 || p > n_tx) throw ConfigError("n_p = " + std::to_string(p) + " outside [1, N_tx = " + std::to_string(n_tx) + "]");
  for (const auto& m : models) {
    if (m.k_tx < 1 || m.k_rx < 1) throw ConfigError("component counts must be >= 1");
    if (n_rx == 1 && m.k_rx != 1) throw ConfigError("MISO models have K_rx = 1");
  }
  for (int t : record_blocks)
    if (t < 0 || t > T) throw ConfigError("recorded block outside [0, T]");
  for (const auto& s : schemes)
    if (s.model_index >= static_cast<int>(models.size())) throw ConfigError("scheme refers to a missing model");
}

std::vector<std::string> preset_names() { return {"fig1_mimo_16x4", "fig2_blocks", "fig3_miso_64", "fig4_k_sweep"}; }

ExperimentSpec make_preset(std::string_view name, const Overrides& o) {
  ExperimentSpec s;
  s.preset = std::string(name);
  if (is_mimo_preset(name)) {
    s.n_tx = 16;
    s.n_rx = 4;
    s.models = {{32, 4}};
    s.n_p = {4};
  } else if (name == "fig3_miso_64") {
    s.n_tx = 64;
    s.n_rx = 1;
    s.models = {{64, 1}};
    s.n_p = {16, 32, 48};
  } else if (name == "fig4_k_sweep") {
    s.n_tx = 64;
    s.n_rx = 1;
    for (int k = 1; k <= 128; k *= 2) s.models.push_back({k, 1});
    s.n_p = {16};
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  s.snr_db = (name == "fig1_mimo_16x4" || name == "fig3_miso_64") ? snr_range(-10.0, 30.0, 5.0)
                                                                  : std::vector<double>{0.0, 10.0, 20.0};

  if (o.out_dir) s.out_dir = *o.out_dir;
  if (o.seed) s.seed = *o.seed;
  if (o.snr_db) s.snr_db = *o.snr_db;
  if (o.n_p) s.n_p = *o.n_p;
  if (o.train_size) s.train_size = *o.train_size;
  if (o.eval_size) s.eval_size = *o.eval_size;
  if (o.blocks) s.T = *o.blocks;
  if (o.em_iters) s.fit.max_iters = *o.em_iters;
  s.force = o.force;
  if (o.k_tx) {
    if (o.k_tx->empty()) throw ConfigError("--ktx needs at least one value");
    if (name == "fig4_k_sweep") {
      s.models.clear();
      for (int k : *o.k_tx) s.models.push_back({k, 1});
    } else {
      if (o.k_tx->size() != 1) throw ConfigError("--ktx takes a single value for preset " + std::string(name));
      s.models.front().k_tx = o.k_tx->front();
    }
  }
  if (o.k_rx) {
    if (s.n_rx == 1 && *o.k_rx != 1) throw ConfigError("--krx must be 1 for the MISO presets");
    for (auto& m : s.models) m.k_rx = *o.k_rx;
  }

  if (name == "fig2_blocks") {
    s.record_blocks.clear();
    for (int t = 0; t <= s.T; ++t) s.record_blocks.push_back(t);
  } else {
    s.record_blocks = {eval_block(std::max(s.T, 0))};
  }
  build_schemes(s);
  s.validate();
  return s;
}

namespace paths {
fs::path train_dataset(const ExperimentSpec& s) { return s.out_dir / "train.fddch"; }
fs::path eval_dataset(const ExperimentSpec& s) { return s.out_dir / "eval.fddch"; }
fs::path dataset_meta(const ExperimentSpec& s) { return s.out_dir / "dataset.json"; }
fs::path model(const ExperimentSpec& s, const ModelSpec& m) { return s.out_dir / ("model_" + m.tag() + ".fddgmm"); }
fs::path codebook(const ExperimentSpec& s, const ModelSpec& m, int n_p) {
  return s.out_dir / ("codebook_" + m.tag() + "_np" + std::to_string(n_p) + ".fddpcb");
}
fs::path sweep_csv(const ExperimentSpec& s) { return s.out_dir / "sweep.csv"; }
fs::path sweep_sidecar(const ExperimentSpec& s) { return s.out_dir / "sweep.json"; }
}  // namespace paths

DatasetConfig train_config(const ExperimentSpec& spec) {
  DatasetConfig c;
  c.n_samples = spec.train_size;
  c.n_tx = spec.n_tx;
  c.n_rx = spec.n_rx;
  c.scenario = spec.scenario;
  c.quadrature = spec.quadrature;
  c.seed = spec.train_seed();
  c.normalize = true;
  return c;
}

DatasetConfig eval_config(const ExperimentSpec& spec) {
  DatasetConfig c = train_config(spec);
  c.n_samples = spec.eval_size;
  c.seed = spec.eval_seed();
  c.normalize = false;
  return c;
}

std::uint64_t file_hash(const fs::path& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw IoError("cannot open '" + file.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

// --- commands ---------------------------------------------------------------

namespace {

void warn_scale(const ExperimentSpec& spec, std::ostream& log) {
  if (spec.is_desk_scale())
    log << "warning: desk scale (L = " << spec.train_size << ", J = " << spec.eval_size
        << "); paper scale is L = " << kPaperTrainSize << ", J = " << kPaperEvalSize << "\n";
}

void print_header(std::ostream& log, const char* label, const fs::path& p, const DatasetHeader& h) {
  log << label << ": " << p.string() << "  n_tx=" << h.n_tx << " n_rx=" << h.n_rx << " samples=" << h.n_samples
      << " dim=" << static_cast<std::uint64_t>(h.n_tx) * h.n_rx << "\n";
}

}  // namespace

GenerateReport cmd_generate(const ExperimentSpec& spec, std::ostream& log) {
  spec.validate();
  const fs::path train = paths::train_dataset(spec);
  const fs::path eval = paths::eval_dataset(spec);
  const fs::path meta = paths::dataset_meta(spec);
  refuse_existing({train, eval, meta}, spec.force);
  fs::create_directories(spec.out_dir);
  warn_scale(spec, log);

  GenerateReport r;
  {
    auto f = open_out(train);
    r.train = generate_dataset(train_config(spec), f);
  }
  {
    auto f = open_out(eval);
    r.eval = generate_dataset(eval_config(spec), f);
  }
  json j = {{"preset", spec.preset},         {"n_tx", spec.n_tx},
            {"n_rx", spec.n_rx},             {"train_size", spec.train_size},
            {"eval_size", spec.eval_size},   {"seed", spec.seed},
            {"train_seed", spec.train_seed()}, {"eval_seed", spec.eval_seed()},
            {"sigma_as_tx", spec.scenario.sigma_as_tx}, {"sigma_as_rx", spec.scenario.sigma_as_rx},
            {"n_clusters", spec.scenario.n_clusters},   {"quadrature_nodes", spec.quadrature.nodes}};
  open_out(meta) << j.dump(2) << "\n";
  print_header(log, "train", train, r.train);
  print_header(log, "eval ", eval, r.eval);
  return r;
}

FitResult fit_model(const ExperimentSpec& spec, const ModelSpec& m, const Dataset& train, std::ostream* log) {
  if (static_cast<std::uint64_t>(m.K()) > static_cast<std::uint64_t>(train.size()))
    throw ConfigError("K = " + std::to_string(m.K()) + " exceeds the training size L = " + std::to_string(train.size()));
  FitConfig fc;
  fc.max_iters = spec.fit.max_iters;
  fc.rel_ll_tol = spec.fit.rel_ll_tol;
  fc.reg_epsilon = spec.fit.reg_epsilon;
  fc.seed = spec.fit_seed(m);
  if (log) {
    const std::string tag = m.tag();
    fc.on_iteration = [log, tag](const char* side, int it, double ll) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "  %s %-4s iter %3d  mean log-likelihood %.10f\n", tag.c_str(), side, it, ll);
      *log << buf << std::flush;
    };
  }
  if (train.n_rx == 1) {
    if (m.k_rx != 1) throw ConfigError("MISO fit needs K_rx = 1");
    return fit_em(train, m.k_tx, fc);
  }
  return fit_kronecker(train, m.k_tx, m.k_rx, fc);
}

std::vector<FitReport> cmd_fit(const ExperimentSpec& spec, std::ostream& log) {
  spec.validate();
  check_dataset_meta(spec);
  std::vector<fs::path> outputs;
  for (const auto& m : spec.models) outputs.push_back(paths::model(spec, m));
  refuse_existing(outputs, spec.force);

  const Dataset train = load_dataset(paths::train_dataset(spec));
  if (train.n_tx != spec.n_tx || train.n_rx != spec.n_rx)
    throw ConfigError("training set dimensions do not match the preset");
  std::vector<FitReport> reports;
  for (const auto& m : spec.models) {
    log << "fit " << m.tag() << " (K = " << m.K() << ", "
        << (spec.n_rx == 1 ? "full covariances" : "Kronecker factored") << ") on L = " << train.size() << "\n";
    FitResult fr = fit_model(spec, m, train, &log);
    const fs::path file = paths::model(spec, m);
    {
      auto f = open_out(file);
      save_model(fr.model, f);
    }
    log << "  -> " << file.string() << "  iterations " << fr.trace.iterations
        << (fr.trace.converged ? " (converged)" : " (iteration cap)") << "\n";
    reports.push_back(FitReport{m, std::move(fr.trace), std::move(fr.rx_trace), file});
  }
  return reports;
}

void cmd_codebook(const ExperimentSpec& spec, std::ostream& log) {
  spec.validate();
  std::vector<fs::path> outputs;
  for (const auto& m : spec.models)
    for (int n_p : spec.n_p) outputs.push_back(paths::codebook(spec, m, n_p));
  refuse_existing(outputs, spec.force);

  for (const auto& m : spec.models) {
    const GmmModel model = load_model_file(paths::model(spec, m));
    if (model.n_tx() != spec.n_tx || model.n_rx() != spec.n_rx || model.n_components() != m.K())
      throw ConfigError("model '" + paths::model(spec, m).string() + "' does not match the preset");
    for (int n_p : spec.n_p) {
      const PilotCodebook cb = build_codebook(model, n_p, spec.rho);
      const fs::path file = paths::codebook(spec, m, n_p);
      {
        auto f = open_out(file);
        save_codebook(cb, f);
      }
      std::ifstream back(file, std::ios::binary);
      const PilotCodebook reread = load_codebook(back);
      if (reread.size() != cb.size()) throw FormatError("codebook revalidation failed for '" + file.string() + "'");
      log << "codebook " << m.tag() << " n_p=" << n_p << ": " << cb.size() << " entries of " << n_p << "x" << spec.n_tx
          << " -> " << file.string() << "\n";
    }
  }
}

namespace {

struct LoadedArtifacts {
  BenchmarkArtifacts artifacts;
  json manifest;
};

bool needs_sample_cov(const std::vector<SchemeSpec>& schemes) {
  return std::any_of(schemes.begin(), schemes.end(),
                     [](const SchemeSpec& s) { return s.estimator == EstimatorKind::sample_lmmse; });
}

BenchmarkConfig benchmark_config(const ExperimentSpec& spec) {
  BenchmarkConfig c;
  c.n_tx = spec.n_tx;
  c.n_rx = spec.n_rx;
  c.T = spec.T;
  c.record_blocks = spec.record_blocks;
  c.snr_db = spec.snr_db;
  c.n_eval = spec.eval_size;
  c.eval_seed = spec.eval_seed();
  c.seed = spec.seed;
  c.rho = spec.rho;
  c.scenario = spec.scenario;
  c.quadrature = spec.quadrature;
  c.omp = spec.omp;
  c.schemes = spec.schemes;
  return c;
}

// Episode 0's first channel must be the first evaluation sample.
void check_eval_dataset(const ExperimentSpec& spec) {
  auto f = open_in(paths::eval_dataset(spec), "generate");
  const Dataset eval = read_dataset(f);
  if (eval.n_tx != spec.n_tx || eval.n_rx != spec.n_rx || eval.size() != static_cast<Index>(spec.eval_size))
    throw ConfigError("evaluation set does not match the preset; rerun `fddlab generate --force`");
  Rng rng = make_stream(spec.eval_seed(), 0);
  const Scenario scenario = draw_scenario(rng, spec.scenario);
  const ScenarioCovariance cov(scenario, UlaGeometry(spec.n_tx), UlaGeometry(spec.n_rx), spec.quadrature);
  if (cov.sample(rng) != eval.samples.col(0))
    throw ConfigError("evaluation set was not generated from the recorded eval seed; rerun `fddlab generate --force`");
}

}  // namespace

void write_sweep_csv(const std::vector<NmseRecord>& records, std::ostream& sink) {
  sink << "t,snr_db,estimator,pilot_scheme,n_p,K,nmse,n_eval,seed\n";
  for (const auto& r : records)
    sink << r.t << ',' << fmt_double(r.snr_db) << ',' << r.estimator << ',' << r.pilot_scheme << ',' << r.n_p << ','
         << r.K << ',' << fmt_double(r.nmse) << ',' << r.n_eval << ',' << r.seed << '\n';
  if (!sink) throw IoError("CSV write failed");
}

SweepReport cmd_sweep(const ExperimentSpec& spec, std::ostream& log) {
  spec.validate();
  refuse_existing({paths::sweep_csv(spec), paths::sweep_sidecar(spec)}, spec.force);
  check_dataset_meta(spec);
  check_eval_dataset(spec);
  warn_scale(spec, log);

  BenchmarkArtifacts art;
  json manifest = {{"models", json::array()}, {"codebooks", json::array()}};
  std::vector<bool> used(spec.models.size(), false);
  for (const auto& s : spec.schemes)
    if (s.model_index >= 0) used[static_cast<std::size_t>(s.model_index)] = true;
  for (std::size_t i = 0; i < spec.models.size(); ++i) {
    const ModelSpec& m = spec.models[i];
    ModelArtifact ma;
    if (used[i]) {
      const fs::path mp = paths::model(spec, m);
      ma.model = std::make_shared<const GmmModel>(load_model_file(mp));
      if (ma.model->n_components() != m.K() || ma.model->n_tx() != spec.n_tx || ma.model->n_rx() != spec.n_rx)
        throw ConfigError("model '" + mp.string() + "' does not match the preset; rerun `fddlab fit --force`");
      manifest["models"].push_back({{"tag", m.tag()}, {"file", mp.filename().string()}, {"hash", file_hash(mp)}});
      for (int n_p : spec.n_p) {
        const fs::path cp = paths::codebook(spec, m, n_p);
        PilotCodebook cb = load_codebook_file(cp);
        if (cb.size() != m.K() || cb.n_p() != n_p)
          throw ConfigError("codebook '" + cp.string() + "' does not match the preset; rerun `fddlab codebook --force`");
        manifest["codebooks"].push_back(
            {{"tag", m.tag()}, {"n_p", n_p}, {"file", cp.filename().string()}, {"hash", file_hash(cp)}});
        ma.codebooks.emplace(n_p, std::move(cb));
      }
    } else {
      ma.model = nullptr;
    }
    art.models.push_back(std::move(ma));
  }
  if (needs_sample_cov(spec.schemes)) {
    const fs::path tp = paths::train_dataset(spec);
    art.sample_covariance = sample_covariance(load_dataset(tp).samples);
    manifest["train"] = {{"file", tp.filename().string()}, {"hash", file_hash(tp)}};
  }

  log << "sweep " << spec.preset << ": " << spec.schemes.size() << " schemes x " << spec.snr_db.size() << " SNRs x "
      << spec.record_blocks.size() << " blocks, J = " << spec.eval_size << ", threads = " << worker_count() << "\n";
  const auto t0 = std::chrono::steady_clock::now();
  SweepReport report;
  report.result = run_benchmark(benchmark_config(spec), art);
  report.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  {
    auto f = open_out(paths::sweep_csv(spec));
    write_sweep_csv(report.result.records, f);
  }

  json rows = json::array();
  for (std::size_t i = 0; i < report.result.records.size(); ++i) {
    const auto& r = report.result.records[i];
    rows.push_back({{"row", i},
                    {"t", r.t},
                    {"snr_db", r.snr_db},
                    {"estimator", r.estimator},
                    {"pilot_scheme", r.pilot_scheme},
                    {"n_p", r.n_p},
                    {"K", r.K},
                    {"scheme_index", r.scheme_index},
                    {"nmse", r.nmse},
                    {"std_error", r.std_error}});
  }
  json side = {{"format", kSidecarFormat},
               {"spec", spec_to_json(spec)},
               {"seeds",
                {{"seed", spec.seed}, {"train_seed", spec.train_seed()}, {"eval_seed", spec.eval_seed()}}},
               {"desk_scale",
                {{"train", static_cast<double>(spec.train_size) / static_cast<double>(kPaperTrainSize)},
                 {"eval", static_cast<double>(spec.eval_size) / static_cast<double>(kPaperEvalSize)}}},
               {"runtime_s", report.runtime_s},
               {"threads", worker_count()},
               {"artifacts", manifest},
               {"rows", rows}};
  open_out(paths::sweep_sidecar(spec)) << side.dump(2) << "\n";
  log << "wrote " << paths::sweep_csv(spec).string() << " (" << report.result.records.size() << " rows) in "
      << report.runtime_s << " s\n";
  return report;
}

// --- replay -----------------------------------------------------------------

ReplayResult replay_row(const fs::path& sidecar, std::size_t row, std::ostream& log) {
  const json side = read_json(sidecar, "sweep");
  if (side.value("format", "") != kSidecarFormat) throw FormatError("'" + sidecar.string() + "' is not a sweep sidecar");
  ExperimentSpec spec = spec_from_json(side.at("spec"));
  spec.out_dir = sidecar.parent_path();
  const json& rows = side.at("rows");
  if (row >= rows.size()) throw ConfigError("row " + std::to_string(row) + " not in sidecar");
  const json& r = rows.at(row);

  NmseRecord expected;
  expected.t = r.at("t").get<int>();
  expected.snr_db = r.at("snr_db").get<double>();
  expected.estimator = r.at("estimator").get<std::string>();
  expected.pilot_scheme = r.at("pilot_scheme").get<std::string>();
  expected.n_p = r.at("n_p").get<int>();
  expected.K = r.at("K").get<int>();
  expected.nmse = r.at("nmse").get<double>();
  expected.std_error = r.at("std_error").get<double>();
  expected.n_eval = spec.eval_size;
  expected.seed = spec.seed;
  expected.scheme_index = r.at("scheme_index").get<int>();

  SchemeSpec scheme = spec.schemes.at(static_cast<std::size_t>(expected.scheme_index));
  const json& manifest = side.at("artifacts");
  auto hash_of = [&](const char* list, const std::string& tag, int n_p) -> std::optional<std::uint64_t> {
    for (const auto& a : manifest.at(list))
      if (a.at("tag").get<std::string>() == tag && (n_p < 0 || a.at("n_p").get<int>() == n_p))
        return a.at("hash").get<std::uint64_t>();
    return std::nullopt;
  };
  auto usable = [](const fs::path& p, std::optional<std::uint64_t> h) { return h && fs::exists(p) && file_hash(p) == *h; };

  std::optional<Dataset> train;
  auto training_set = [&]() -> const Dataset& {
    if (!train) {
      const fs::path tp = paths::train_dataset(spec);
      std::optional<std::uint64_t> h;
      if (manifest.contains("train")) h = manifest["train"].at("hash").get<std::uint64_t>();
      if (usable(tp, h) || (fs::exists(tp) && !h)) {
        train = load_dataset(tp);
        if (train->size() != static_cast<Index>(spec.train_size) || train->n_tx != spec.n_tx) train.reset();
      }
      if (!train) {
        log << "replay: regenerating the training set from seed " << spec.train_seed() << "\n";
        train = generate_channels(train_config(spec));
      }
    }
    return *train;
  };

  BenchmarkArtifacts art;
  if (scheme.model_index >= 0) {
    const ModelSpec m = spec.models.at(static_cast<std::size_t>(scheme.model_index));
    ModelArtifact ma;
    const fs::path mp = paths::model(spec, m);
    if (usable(mp, hash_of("models", m.tag(), -1))) {
      ma.model = std::make_shared<const GmmModel>(load_model_file(mp));
    } else {
      log << "replay: refitting " << m.tag() << "\n";
      ma.model = std::make_shared<const GmmModel>(fit_model(spec, m, training_set(), nullptr).model);
    }
    const fs::path cp = paths::codebook(spec, m, scheme.n_p);
    if (usable(cp, hash_of("codebooks", m.tag(), scheme.n_p)))
      ma.codebooks.emplace(scheme.n_p, load_codebook_file(cp));
    else if (scheme.pilot == PilotScheme::gmm)
      ma.codebooks.emplace(scheme.n_p, build_codebook(*ma.model, scheme.n_p, spec.rho));
    art.models.push_back(std::move(ma));
    scheme.model_index = 0;
  }
  if (scheme.estimator == EstimatorKind::sample_lmmse) art.sample_covariance = sample_covariance(training_set().samples);

  BenchmarkConfig cfg = benchmark_config(spec);
  cfg.schemes = {scheme};
  cfg.snr_db = {expected.snr_db};
  cfg.record_blocks = {expected.t};
  BenchmarkResult res = run_benchmark(cfg, art);

  ReplayResult out;
  out.row = row;
  out.expected = expected;
  out.replayed = res.records.front();
  out.replayed.scheme_index = expected.scheme_index;
  out.identical = std::bit_cast<std::uint64_t>(out.replayed.nmse) == std::bit_cast<std::uint64_t>(expected.nmse) &&
                  out.replayed.K == expected.K && out.replayed.estimator == expected.estimator &&
                  out.replayed.pilot_scheme == expected.pilot_scheme;
  return out;
}

}  // namespace fddlab
