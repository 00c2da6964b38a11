#pragma once

#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <vector>

#include "fddlab/linalg.hpp"
#include "fddlab/rng.hpp"
#include "fddlab/types.hpp"

namespace fddlab {

/// Uniform linear array with half-wavelength element spacing.
struct UlaGeometry {
  explicit UlaGeometry(int n) : n_antennas(n) {
    if (n < 1) throw ConfigError("UlaGeometry: antenna count must be >= 1");
  }
  int n_antennas;
};

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Center angles and angular spreads of one propagation cluster (radians).
struct ClusterParams {
  double aod = 0.0;
  double aoa = 0.0;
  double sigma_as_tx = deg_to_rad(2.0);
  double sigma_as_rx = deg_to_rad(35.0);
};

/// Everything that is drawn per scenario. One cluster unless configured otherwise.
struct Scenario {
  std::vector<ClusterParams> clusters;
};

struct ScenarioConfig {
  double sigma_as_tx = deg_to_rad(2.0);
  double sigma_as_rx = deg_to_rad(35.0);
  int n_clusters = 1;
};

/// Nodes used to integrate the angular power density over [-π, π].
/// The interval is split at the cluster center (where the Laplacian density has
/// its kink) and each side is covered by Gauss–Legendre panels whose widths grow
/// away from the center.
struct QuadratureConfig {
  int nodes = 720;
};

enum class ArraySide { tx, rx };

struct SpatialCovariance {
  ArraySide side = ArraySide::tx;
  CMatrix matrix;
};

/// a(θ) with entries exp(jπ m sin θ), m = 0..N-1. Requires |θ| ≤ π/2.
CVector steering_vector(const UlaGeometry& geometry, double theta);

/// ∫ g(θ) a(θ)a(θ)ᴴ dθ for a Laplacian density g centered at `center_angle` with
/// standard deviation `sigma_as`, truncated to [-π, π]; normalized to trace N.
SpatialCovariance synth_covariance(const UlaGeometry& geometry, ArraySide side, double center_angle,
                                   double sigma_as, const QuadratureConfig& quadrature = {});

/// C_tx ⊗ C_rx, the covariance of the column-major vec(H) for H of size N_rx × N_tx.
CMatrix kron_covariance(const SpatialCovariance& tx, const SpatialCovariance& rx);

ClusterParams draw_cluster(Rng& rng, const ScenarioConfig& config);
Scenario draw_scenario(Rng& rng, const ScenarioConfig& config);

/// Coloring transform for sampling N_C(0, C): C = R Rᴴ with R = U·sqrt(max(Λ, 0)).
class ChannelColoring {
 public:
  explicit ChannelColoring(const CMatrix& covariance);
  CVector sample(Rng& rng) const;
  Index dim() const { return root_.rows(); }

 private:
  CMatrix root_;
};

struct ChannelSample {
  CVector h;
  std::uint64_t scenario_id = 0;
};

/// One draw h ~ N_C(0, cov). Throws NumericError for covariances that are
/// indefinite beyond -1e-10·trace/N.
ChannelSample sample_channel(const CMatrix& cov, Rng& rng, std::uint64_t scenario_id = 0);

/// Transmit/receive covariances of one scenario plus the expanded covariance and
/// a factored sampler. Multiple clusters contribute equal power on each side.
class ScenarioCovariance {
 public:
  ScenarioCovariance(const Scenario& scenario, const UlaGeometry& tx, const UlaGeometry& rx,
                     const QuadratureConfig& quadrature = {});

  const SpatialCovariance& tx() const { return tx_; }
  const SpatialCovariance& rx() const { return rx_; }
  const CMatrix& full() const { return full_; }
  Index n_tx() const { return tx_.matrix.rows(); }
  Index n_rx() const { return rx_.matrix.rows(); }

  /// vec(R_rx Z R_txᵀ) with Z i.i.d. CN(0,1), distributed as N_C(0, C_tx ⊗ C_rx).
  CVector sample(Rng& rng) const;

 private:
  SpatialCovariance tx_;
  SpatialCovariance rx_;
  CMatrix full_;
  CMatrix root_tx_;
  CMatrix root_rx_;
};

/// A set of channel samples stored column-wise (N × L).
struct Dataset {
  int n_tx = 0;
  int n_rx = 0;
  CMatrix samples;

  Index dim() const { return samples.rows(); }
  Index size() const { return samples.cols(); }
};

struct DatasetHeader {
  static constexpr char kMagic[8] = {'F', 'D', 'D', 'C', 'H', '0', '1', '\0'};
  std::uint32_t n_tx = 0;
  std::uint32_t n_rx = 0;
  std::uint64_t n_samples = 0;
};

struct DatasetConfig {
  std::uint64_t n_samples = 1;
  int n_tx = 1;
  int n_rx = 1;
  ScenarioConfig scenario;
  QuadratureConfig quadrature;
  std::uint64_t seed = 0;
  bool normalize = true;
};

/// Draws L samples, each from a freshly drawn scenario, using one rng stream per
/// sample index. With `normalize`, a single global scale makes (1/L)Σ‖h‖² = N.
Dataset generate_channels(const DatasetConfig& config);

/// generate_channels followed by write_dataset.
DatasetHeader generate_dataset(const DatasetConfig& config, std::ostream& sink);

DatasetHeader write_dataset(const Dataset& dataset, std::ostream& sink);
Dataset read_dataset(std::istream& source);
DatasetHeader read_dataset_header(std::istream& source);

}  // namespace fddlab
