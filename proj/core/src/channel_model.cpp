#include "fddlab/channel_model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string_view>

#include <Eigen/Core>

#include "fddlab/binary_io.hpp"

namespace fddlab {

namespace {

constexpr double kPi = std::numbers::pi;

struct QuadratureNodes {
  std::vector<double> theta;
  std::vector<double> weight;
};

// Gauss–Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre(int order, std::vector<double>& x, std::vector<double>& w) {
  x.assign(order, 0.0);
  w.assign(order, 0.0);
  for (int i = 0; i < order; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (order + 0.5));
    double dp = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 1; j <= order; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      dp = order * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

// Panel edges at distances d_i = L·expm1(β i/P)/expm1(β) from the center. β is
// chosen so the innermost panel is no wider than the Laplacian scale b; β = 0
// (uniform panels) when b already exceeds L/P.
double grading_exponent(double length, int count, double scale_b) {
  const double target = std::max(scale_b, length * 1e-15);
  if (target >= length / count) return 0.0;
  auto log_first = [&](double beta) {
    const double num = std::log(std::expm1(beta / count));
    const double den = beta > 30.0 ? beta + std::log1p(-std::exp(-beta)) : std::log(std::expm1(beta));
    return std::log(length) + num - den;
  };
  double lo = 1e-9;
  double hi = 200.0;
  const double goal = std::log(target);
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (log_first(mid) > goal)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

QuadratureNodes laplacian_nodes(double center, double scale_b, int nodes) {
  const int order = std::clamp(nodes / 2, 1, 16);
  const int panels = std::max(2, nodes / order);
  const double left_len = center + kPi;
  const double right_len = kPi - center;
  int left_panels = static_cast<int>(std::lround(panels * left_len / (2.0 * kPi)));
  left_panels = std::clamp(left_panels, 1, panels - 1);
  const int right_panels = panels - left_panels;

  std::vector<double> gx;
  std::vector<double> gw;
  gauss_legendre(order, gx, gw);

  QuadratureNodes q;
  q.theta.reserve(static_cast<std::size_t>(panels * order));
  q.weight.reserve(q.theta.capacity());
  auto side = [&](double length, int count, double sign) {
    if (length <= 0.0) return;
    const double beta = grading_exponent(length, count, scale_b);
    auto edge = [&](int i) {
      if (i == count) return length;
      const double u = static_cast<double>(i) / count;
      if (beta == 0.0) return length * u;
      return length * std::exp(std::log(std::expm1(beta * u)) - (beta > 30.0 ? beta : std::log(std::expm1(beta))));
    };
    for (int p = 0; p < count; ++p) {
      const double a = edge(p);
      const double b = edge(p + 1);
      const double mid = 0.5 * (a + b);
      const double half = 0.5 * (b - a);
      for (int k = 0; k < order; ++k) {
        q.theta.push_back(center + sign * (mid + half * gx[k]));
        q.weight.push_back(half * gw[k]);
      }
    }
  };
  side(left_len, left_panels, -1.0);
  side(right_len, right_panels, +1.0);
  return q;
}

CMatrix psd_root(const CMatrix& cov) {
  const Index n = cov.rows();
  if (n == 0) return cov;
  const auto eig = linalg::eigh_descending(linalg::hermitian_part(cov));
  const double trace = std::max(cov.trace().real(), 0.0);
  const double tol = 1e-10 * std::max(trace / static_cast<double>(n), 1e-300);
  if (eig.values.minCoeff() < -tol) throw NumericError("covariance is indefinite beyond tolerance");
  const RVector s = eig.values.cwiseMax(0.0).cwiseSqrt();
  return eig.vectors * s.asDiagonal();
}

}  // namespace

CVector steering_vector(const UlaGeometry& geometry, double theta) {
  if (!(std::abs(theta) <= kPi / 2.0 + 1e-12)) throw DomainError("steering_vector: angle outside [-pi/2, pi/2]");
  CVector a(geometry.n_antennas);
  const double phase = kPi * std::sin(theta);
  for (int m = 0; m < geometry.n_antennas; ++m) a[m] = std::polar(1.0, phase * m);
  return a;
}

SpatialCovariance synth_covariance(const UlaGeometry& geometry, ArraySide side, double center_angle,
                                   double sigma_as, const QuadratureConfig& quadrature) {
  if (!(sigma_as > 0.0)) throw DomainError("synth_covariance: angular spread must be positive");
  if (!(std::abs(center_angle) <= kPi)) throw DomainError("synth_covariance: center angle outside [-pi, pi]");
  if (quadrature.nodes < 2) throw ConfigError("synth_covariance: quadrature needs at least 2 nodes");

  // Laplacian with standard deviation σ has scale b = σ/√2.
  const double b = sigma_as / std::numbers::sqrt2;
  const auto q = laplacian_nodes(center_angle, b, quadrature.nodes);
  const int n = geometry.n_antennas;

  // a(θ)a(θ)ᴴ is Toeplitz: entry (m, k) depends on m-k only.
  CVector lag = CVector::Zero(n);
  for (std::size_t i = 0; i < q.theta.size(); ++i) {
    const double g = q.weight[i] * std::exp(-std::abs(q.theta[i] - center_angle) / b);
    const Complex step = std::polar(1.0, kPi * std::sin(q.theta[i]));
    Complex power(1.0, 0.0);
    for (int d = 0; d < n; ++d) {
      lag[d] += g * power;
      power *= step;
    }
  }
  const double mass = lag[0].real();
  if (!(mass > 0.0)) throw NumericError("synth_covariance: density mass vanished on the quadrature grid");

  SpatialCovariance out{side, CMatrix(n, n)};
  for (int k = 0; k < n; ++k) {
    for (int m = k; m < n; ++m) {
      const Complex v = lag[m - k] / mass;
      out.matrix(m, k) = v;
      out.matrix(k, m) = std::conj(v);
    }
    out.matrix(k, k) = Complex(1.0, 0.0);
  }
  return out;
}

CMatrix kron_covariance(const SpatialCovariance& tx, const SpatialCovariance& rx) {
  if (tx.side != ArraySide::tx || rx.side != ArraySide::rx)
    throw ConfigError("kron_covariance: expected (tx, rx) covariances");
  if (tx.matrix.rows() != tx.matrix.cols() || rx.matrix.rows() != rx.matrix.cols())
    throw ConfigError("kron_covariance: covariances must be square");
  return linalg::kron(tx.matrix, rx.matrix);
}

ClusterParams draw_cluster(Rng& rng, const ScenarioConfig& config) {
  std::uniform_real_distribution<double> angle(-kPi / 2.0, kPi / 2.0);
  ClusterParams c;
  c.aod = angle(rng);
  c.aoa = angle(rng);
  c.sigma_as_tx = config.sigma_as_tx;
  c.sigma_as_rx = config.sigma_as_rx;
  return c;
}

Scenario draw_scenario(Rng& rng, const ScenarioConfig& config) {
  if (config.n_clusters < 1) throw ConfigError("draw_scenario: need at least one cluster");
  if (!(config.sigma_as_tx > 0.0) || !(config.sigma_as_rx > 0.0))
    throw ConfigError("draw_scenario: angular spreads must be positive");
  Scenario s;
  s.clusters.reserve(static_cast<std::size_t>(config.n_clusters));
  for (int i = 0; i < config.n_clusters; ++i) s.clusters.push_back(draw_cluster(rng, config));
  return s;
}

ChannelColoring::ChannelColoring(const CMatrix& covariance) : root_(psd_root(covariance)) {}

CVector ChannelColoring::sample(Rng& rng) const { return root_ * complex_normal(rng, root_.cols()); }

ChannelSample sample_channel(const CMatrix& cov, Rng& rng, std::uint64_t scenario_id) {
  if (cov.rows() != cov.cols()) throw ConfigError("sample_channel: covariance must be square");
  return ChannelSample{ChannelColoring(cov).sample(rng), scenario_id};
}

ScenarioCovariance::ScenarioCovariance(const Scenario& scenario, const UlaGeometry& tx, const UlaGeometry& rx,
                                       const QuadratureConfig& quadrature) {
  if (scenario.clusters.empty()) throw ConfigError("ScenarioCovariance: scenario has no clusters");
  tx_ = SpatialCovariance{ArraySide::tx, CMatrix::Zero(tx.n_antennas, tx.n_antennas)};
  rx_ = SpatialCovariance{ArraySide::rx, CMatrix::Zero(rx.n_antennas, rx.n_antennas)};
  for (const auto& c : scenario.clusters) {
    tx_.matrix += synth_covariance(tx, ArraySide::tx, c.aod, c.sigma_as_tx, quadrature).matrix;
    if (rx.n_antennas > 1) rx_.matrix += synth_covariance(rx, ArraySide::rx, c.aoa, c.sigma_as_rx, quadrature).matrix;
  }
  tx_.matrix *= static_cast<double>(tx.n_antennas) / tx_.matrix.trace().real();
  if (rx.n_antennas > 1)
    rx_.matrix *= static_cast<double>(rx.n_antennas) / rx_.matrix.trace().real();
  else
    rx_.matrix(0, 0) = 1.0;
  full_ = kron_covariance(tx_, rx_);
  root_tx_ = psd_root(tx_.matrix);
  root_rx_ = psd_root(rx_.matrix);
}

CVector ScenarioCovariance::sample(Rng& rng) const {
  const CMatrix z = complex_normal(rng, root_rx_.cols(), root_tx_.cols());
  const CMatrix h = root_rx_ * z * root_tx_.transpose();
  return Eigen::Map<const CVector>(h.data(), h.size());
}

Dataset generate_channels(const DatasetConfig& config) {
  if (config.n_samples < 1) throw ConfigError("generate_dataset: need at least one sample");
  const UlaGeometry tx(config.n_tx);
  const UlaGeometry rx(config.n_rx);
  const Index n = static_cast<Index>(config.n_tx) * config.n_rx;

  Dataset ds{config.n_tx, config.n_rx, CMatrix(n, static_cast<Index>(config.n_samples))};
  for (std::uint64_t l = 0; l < config.n_samples; ++l) {
    Rng rng = make_stream(config.seed, l);
    const Scenario scenario = draw_scenario(rng, config.scenario);
    const ScenarioCovariance cov(scenario, tx, rx, config.quadrature);
    ds.samples.col(static_cast<Index>(l)) = cov.sample(rng);
  }
  if (config.normalize) {
    const double energy = ds.samples.colwise().squaredNorm().sum() / static_cast<double>(config.n_samples);
    if (energy > 0.0) ds.samples *= std::sqrt(static_cast<double>(n) / energy);
  }
  return ds;
}

DatasetHeader generate_dataset(const DatasetConfig& config, std::ostream& sink) {
  return write_dataset(generate_channels(config), sink);
}

DatasetHeader write_dataset(const Dataset& dataset, std::ostream& sink) {
  if (dataset.dim() != static_cast<Index>(dataset.n_tx) * dataset.n_rx)
    throw ConfigError("write_dataset: sample dimension does not match n_tx*n_rx");
  DatasetHeader header{static_cast<std::uint32_t>(dataset.n_tx), static_cast<std::uint32_t>(dataset.n_rx),
                       static_cast<std::uint64_t>(dataset.size())};
  io::LeWriter w(sink);
  w.bytes(std::string_view(DatasetHeader::kMagic, 8));
  w.u32(header.n_tx);
  w.u32(header.n_rx);
  w.u64(header.n_samples);
  w.matrix(dataset.samples);
  sink.flush();
  if (!sink) throw IoError("write_dataset: sink write failed");
  return header;
}

DatasetHeader read_dataset_header(std::istream& source) {
  io::LeReader r(source);
  r.expect_magic(std::string_view(DatasetHeader::kMagic, 8), "dataset");
  DatasetHeader h;
  h.n_tx = r.u32();
  h.n_rx = r.u32();
  h.n_samples = r.u64();
  if (h.n_tx == 0 || h.n_rx == 0) throw FormatError("dataset: zero antenna count in header");
  return h;
}

Dataset read_dataset(std::istream& source) {
  const DatasetHeader h = read_dataset_header(source);
  io::LeReader r(source);
  Dataset ds{static_cast<int>(h.n_tx), static_cast<int>(h.n_rx), {}};
  ds.samples = r.matrix(static_cast<Index>(h.n_tx) * h.n_rx, static_cast<Index>(h.n_samples));
  if (!r.at_end()) throw FormatError("dataset: trailing bytes after declared samples");
  return ds;
}

}  // namespace fddlab
