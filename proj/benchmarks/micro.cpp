#include <benchmark/benchmark.h>

#include <memory>

#include "fddlab/channel_model.hpp"
#include "fddlab/estimators.hpp"
#include "fddlab/gmm.hpp"
#include "fddlab/observation.hpp"
#include "fddlab/pilots.hpp"
#include "fddlab/protocol.hpp"

using namespace fddlab;

namespace {

Dataset dataset(int n_tx, int n_rx, std::uint64_t size) {
  DatasetConfig dc;
  dc.n_samples = size;
  dc.n_tx = n_tx;
  dc.n_rx = n_rx;
  dc.seed = 11;
  return generate_channels(dc);
}

// 16x4 Kronecker model with K = 16·4, fitted once for the estimator benchmarks.
const GmmModel& mimo_model() {
  static const GmmModel model = [] {
    FitConfig cfg;
    cfg.max_iters = 10;
    return fit_kronecker(dataset(16, 4, 4000), 16, 4, cfg).model;
  }();
  return model;
}

void BM_SynthCovariance(benchmark::State& state) {
  const UlaGeometry g(static_cast<int>(state.range(0)));
  double theta = -1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(synth_covariance(g, ArraySide::tx, theta, deg_to_rad(2.0)));
    theta = theta > 1.0 ? -1.0 : theta + 0.01;
  }
}
BENCHMARK(BM_SynthCovariance)->Arg(16)->Arg(64);

void BM_EmIteration(benchmark::State& state) {
  const Dataset ds = dataset(static_cast<int>(state.range(0)), 1, 4000);
  FitConfig cfg;
  cfg.max_iters = 1;
  for (auto _ : state) benchmark::DoNotOptimize(fit_em(ds, static_cast<int>(state.range(1)), cfg));
}
BENCHMARK(BM_EmIteration)->Args({16, 16})->Args({64, 16})->Unit(benchmark::kMillisecond);

void BM_ObservationModel(benchmark::State& state) {
  const GmmModel& m = mimo_model();
  const PilotMatrix p = dft_pilot(16, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(observation_model(m, p, 0.1));
}
BENCHMARK(BM_ObservationModel)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_GmmEstimate(benchmark::State& state) {
  const GmmModel& m = mimo_model();
  const PilotMatrix p = dft_pilot(16, 4);
  const ObservationGmm om = observation_model(m, p, 0.1);
  Rng rng(12);
  const Observation obs = simulate_observation(dataset(16, 4, 1).samples.col(0), p, 4, 0.1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(gmm_estimate(obs, m, om));
}
BENCHMARK(BM_GmmEstimate);

void BM_Episode(benchmark::State& state) {
  const GmmModel& m = mimo_model();
  const PilotCodebook cb = build_codebook(m, 4);
  ObservationCache cache(m);
  BsState bs(cb);
  MtState mt(m, cache);
  ProtocolConfig pc;
  pc.n_p = 4;
  pc.snr_db = 10.0;
  Rng rng(13);
  const Scenario sc = draw_scenario(rng, ScenarioConfig{});
  const ScenarioCovariance cov(sc, UlaGeometry(16), UlaGeometry(4));
  for (auto _ : state) {
    bs.reset();
    benchmark::DoNotOptimize(run_episode(cov, bs, mt, pc, rng));
  }
}
BENCHMARK(BM_Episode)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
