// fddlab: dataset generation, mixture fitting, pilot codebooks and NMSE sweeps.
//
//   fddlab generate --preset fig1_mimo_16x4 --out-dir runs/fig1
//   fddlab fit      --preset fig1_mimo_16x4 --out-dir runs/fig1
//   fddlab codebook --preset fig1_mimo_16x4 --out-dir runs/fig1
//   fddlab sweep    --preset fig1_mimo_16x4 --out-dir runs/fig1

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fddlab/experiment.hpp"

namespace {

struct Options {
  std::string preset = "fig1_mimo_16x4";
  std::string out_dir;
  std::uint64_t seed = 0;
  std::vector<double> snr_db;
  std::vector<int> n_p;
  std::vector<int> k_tx;
  int k_rx = 0;
  std::uint64_t train_size = 0;
  std::uint64_t eval_size = 0;
  int blocks = 0;
  int em_iters = 0;
  bool force = false;
  long replay_row = -1;
};

void add_common(CLI::App* cmd, Options& o) {
  std::string presets;
  for (const auto& p : fddlab::preset_names()) presets += (presets.empty() ? "" : ", ") + p;
  cmd->add_option("--preset", o.preset, "Experiment preset: " + presets)->capture_default_str();
  cmd->add_option("--out-dir", o.out_dir, "Artifact directory (default: fddlab_out)");
  cmd->add_option("--seed", o.seed, "Root seed (default 1)");
  cmd->add_option("--snr-db", o.snr_db, "SNR list in dB")->delimiter(',');
  cmd->add_option("--np", o.n_p, "Pilot counts")->delimiter(',');
  cmd->add_option("--ktx", o.k_tx, "Transmit-side components (list of K for fig4_k_sweep)")->delimiter(',');
  cmd->add_option("--krx", o.k_rx, "Receive-side components");
  cmd->add_option("--train-size", o.train_size, "Training samples L");
  cmd->add_option("--eval-size", o.eval_size, "Evaluation episodes J");
  cmd->add_option("--blocks", o.blocks, "Last block index T");
  cmd->add_option("--em-iters", o.em_iters, "EM iteration cap");
  cmd->add_flag("--force", o.force, "Overwrite existing outputs");
}

fddlab::ExperimentSpec to_spec(const Options& o, const CLI::App& cmd) {
  fddlab::Overrides ov;
  if (!o.out_dir.empty()) ov.out_dir = o.out_dir;
  if (cmd.count("--seed")) ov.seed = o.seed;
  if (!o.snr_db.empty()) ov.snr_db = o.snr_db;
  if (!o.n_p.empty()) ov.n_p = o.n_p;
  if (!o.k_tx.empty()) ov.k_tx = o.k_tx;
  if (cmd.count("--krx")) ov.k_rx = o.k_rx;
  if (cmd.count("--train-size")) ov.train_size = o.train_size;
  if (cmd.count("--eval-size")) ov.eval_size = o.eval_size;
  if (cmd.count("--blocks")) ov.blocks = o.blocks;
  if (cmd.count("--em-iters")) ov.em_iters = o.em_iters;
  ov.force = o.force;
  return fddlab::make_preset(o.preset, ov);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fddlab: GMM-based pilot design and channel estimation benchmarks"};
  app.require_subcommand(1);
  Options opt;

  auto* gen = app.add_subcommand("generate", "Write training and evaluation channel datasets");
  auto* fit = app.add_subcommand("fit", "Fit mixture models on the training set");
  auto* cb = app.add_subcommand("codebook", "Build pilot codebooks from fitted models");
  auto* sweep = app.add_subcommand("sweep", "Run the NMSE benchmark and write sweep.csv / sweep.json");
  for (auto* c : {gen, fit, cb, sweep}) add_common(c, opt);
  sweep->add_option("--replay-row", opt.replay_row, "Recompute one row of an existing sweep from its sidecar");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sweep && opt.replay_row >= 0) {
      const auto spec = to_spec(opt, *sweep);
      const auto r = fddlab::replay_row(fddlab::paths::sweep_sidecar(spec), static_cast<std::size_t>(opt.replay_row),
                                        std::cout);
      std::printf("row %zu: %s/%s t=%d snr=%g  expected %.17g  replayed %.17g  %s\n", r.row,
                  r.expected.estimator.c_str(), r.expected.pilot_scheme.c_str(), r.expected.t, r.expected.snr_db,
                  r.expected.nmse, r.replayed.nmse, r.identical ? "identical" : "MISMATCH");
      return r.identical ? 0 : 3;
    }
    if (*gen) fddlab::cmd_generate(to_spec(opt, *gen), std::cout);
    if (*fit) fddlab::cmd_fit(to_spec(opt, *fit), std::cout);
    if (*cb) fddlab::cmd_codebook(to_spec(opt, *cb), std::cout);
    if (*sweep) fddlab::cmd_sweep(to_spec(opt, *sweep), std::cout);
  } catch (const fddlab::MissingArtifactError& e) {
    std::cerr << "fddlab: " << e.what() << "\n";
    return 4;
  } catch (const fddlab::ConfigError& e) {
    std::cerr << "fddlab: configuration error: " << e.what() << "\n";
    return 2;
  } catch (const fddlab::Error& e) {
    std::cerr << "fddlab: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
