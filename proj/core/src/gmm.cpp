#include "fddlab/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>
#include <string_view>

#include "fddlab/binary_io.hpp"
#include "fddlab/parallel.hpp"
#include "fddlab/rng.hpp"

namespace fddlab {

namespace {

constexpr std::string_view kModelMagic = "FDDGMM01";
constexpr std::uint32_t kModelVersion = 1;
constexpr std::uint32_t kFlagFactored = 1;
// Components holding less than this much responsibility are reseeded.
constexpr double kEmptyMass = 1e-3;

void check_mixture(const MixtureSide& m, const char* what) {
  if (m.covariances.empty()) throw ConfigError(std::string(what) + ": mixture has no components");
  if (m.weights.size() != static_cast<Index>(m.covariances.size()))
    throw ConfigError(std::string(what) + ": weight count does not match component count");
  const Index n = m.covariances.front().rows();
  for (const auto& c : m.covariances) {
    if (c.rows() != n || c.cols() != n) throw ConfigError(std::string(what) + ": inconsistent covariance dimensions");
    if (!c.allFinite()) throw NumericError(std::string(what) + ": non-finite covariance entry");
    const double scale = std::max(1.0, linalg::max_abs(c));
    if (linalg::max_abs(c - c.adjoint()) > 1e-10 * scale)
      throw NumericError(std::string(what) + ": covariance is not Hermitian");
  }
  if ((m.weights.array() < 0.0).any()) throw ConfigError(std::string(what) + ": negative mixing weight");
  if (std::abs(m.weights.sum() - 1.0) > 1e-12) throw ConfigError(std::string(what) + ": weights do not sum to 1");
}

// Weighted second moment (1/mass)·Σ_l r_l x_l x_lᴴ, Hermitian by construction.
// Responsibilities below this are left out of the covariance update.
constexpr double kPruneResp = 1e-10;

CMatrix weighted_second_moment(const CMatrix& x, const RVector& r, double mass) {
  const Index n = x.rows();
  std::vector<Index> keep;
  keep.reserve(static_cast<std::size_t>(x.cols()));
  for (Index l = 0; l < x.cols(); ++l)
    if (r[l] > kPruneResp) keep.push_back(l);
  CMatrix y(n, static_cast<Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i)
    y.col(static_cast<Index>(i)) = std::sqrt(r[keep[i]]) * x.col(keep[i]);
  CMatrix c = CMatrix::Zero(n, n);
  if (y.cols() > 0) c.selfadjointView<Eigen::Lower>().rankUpdate(y);
  CMatrix full = c.selfadjointView<Eigen::Lower>();
  full /= mass;
  return full;
}

// Row k of the returned matrix holds log π_k + log N_C(x_l; 0, C_k).
Eigen::MatrixXd log_joint(const RVector& weights, const std::vector<CMatrix>& covs, const CMatrix& x) {
  const Index k_count = static_cast<Index>(covs.size());
  const double n = static_cast<double>(x.rows());
  const double log_pi = std::log(std::numbers::pi);
  Eigen::MatrixXd out(k_count, x.cols());
  parallel_for(static_cast<std::size_t>(k_count), [&](std::size_t k) {
    const auto ki = static_cast<Index>(k);
    if (weights[ki] <= 0.0) {
      out.row(ki).setConstant(-std::numeric_limits<double>::infinity());
      return;
    }
    const linalg::HermitianFactor f(covs[k]);
    const RVector q = f.quadratic_forms(x);
    out.row(ki) = (std::log(weights[ki]) - n * log_pi - f.log_det() - q.array()).matrix().transpose();
  });
  return out;
}

// Turns log-joint terms into responsibilities in place; returns Σ_l log p(x_l).
double normalize_columns(Eigen::MatrixXd& logp, RVector* per_sample = nullptr) {
  double total = 0.0;
  if (per_sample) per_sample->resize(logp.cols());
  for (Index l = 0; l < logp.cols(); ++l) {
    const double lse = linalg::log_sum_exp(logp.col(l));
    if (!std::isfinite(lse)) throw NumericError("EM: sample has zero likelihood under every component");
    logp.col(l) = (logp.col(l).array() - lse).unaryExpr(&linalg::flushed_exp).matrix();
    if (per_sample) (*per_sample)[l] = lse;
    total += lse;
  }
  return total;
}

// Σ_k tr(C_k⁻¹), the loading penalty the M-step below maximizes against.
double inverse_trace_sum(const std::vector<CMatrix>& covs) {
  double total = 0.0;
  for (const CMatrix& c : covs) {
    Eigen::LLT<CMatrix> llt(c);
    if (llt.info() != Eigen::Success) throw NumericError("EM: covariance lost definiteness");
    const CMatrix inv_l = llt.matrixL().solve(CMatrix::Identity(c.rows(), c.cols()));
    total += inv_l.squaredNorm();
  }
  return total;
}

MixtureSide em_fit(const CMatrix& x, int k_count, const FitConfig& cfg, const char* side, FitTrace& trace) {
  const Index n = x.rows();
  const Index l_count = x.cols();
  if (k_count < 1) throw ConfigError("fit: component count must be >= 1");
  if (cfg.max_iters < 1) throw ConfigError("fit: max_iters must be >= 1");
  if (!(cfg.rel_ll_tol > 0.0) || !(cfg.reg_epsilon > 0.0)) throw ConfigError("fit: tolerances must be positive");
  if (l_count < k_count) throw ConfigError("fit: fewer samples than components");
  if (n < 1) throw ConfigError("fit: empty sample dimension");

  Rng rng = make_stream(cfg.seed, stream::kFit);

  // Random balanced partition for initialization.
  std::vector<Index> perm(static_cast<std::size_t>(l_count));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  // Loading enters as a penalty -prior·tr(C_k⁻¹), so each M-step adds prior/mass_k to the diagonal.
  // A component holding L/K samples gets reg_epsilon times the average sample power.
  const double power = x.squaredNorm() / static_cast<double>(n * l_count);
  const double prior = cfg.reg_epsilon * (power > 0.0 ? power : 1.0) * static_cast<double>(l_count) / k_count;

  MixtureSide mix{RVector::Constant(k_count, 1.0 / k_count), std::vector<CMatrix>(static_cast<std::size_t>(k_count))};
  for (int k = 0; k < k_count; ++k) {
    RVector r = RVector::Zero(l_count);
    double mass = 0.0;
    for (Index i = k; i < l_count; i += k_count) {
      r[perm[static_cast<std::size_t>(i)]] = 1.0;
      mass += 1.0;
    }
    CMatrix c = weighted_second_moment(x, r, mass);
    c.diagonal().array() += prior / mass;
    mix.covariances[static_cast<std::size_t>(k)] = std::move(c);
  }

  trace = FitTrace{};
  const double ll_scale = 1.0 / static_cast<double>(l_count);
  const double penalty_scale = prior * ll_scale;
  RVector sample_ll;
  Eigen::MatrixXd resp = log_joint(mix.weights, mix.covariances, x);
  double ll = normalize_columns(resp, &sample_ll) * ll_scale - penalty_scale * inverse_trace_sum(mix.covariances);
  trace.log_likelihood.push_back(ll);
  if (cfg.on_iteration) cfg.on_iteration(side, 0, ll);

  bool reseeded_last = false;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    // M-step with zero means.
    const RVector mass = resp.rowwise().sum();
    bool reseeded = false;
    std::vector<char> empty(static_cast<std::size_t>(k_count), 0);
    for (int k = 0; k < k_count; ++k) empty[static_cast<std::size_t>(k)] = mass[k] < kEmptyMass;
    parallel_for(static_cast<std::size_t>(k_count), [&](std::size_t k) {
      if (empty[k]) return;
      CMatrix c = weighted_second_moment(x, resp.row(static_cast<Index>(k)).transpose(), mass[static_cast<Index>(k)]);
      c.diagonal().array() += prior / mass[static_cast<Index>(k)];
      mix.covariances[k] = std::move(c);
    });
    // A dead component restarts on the neighbourhood of the worst-explained sample not
    // yet claimed this iteration: the L/K samples most aligned with it. Reseeding stops
    // after half the iteration budget; a component still dead then keeps its covariance.
    const bool may_reseed = it <= std::max(1, cfg.max_iters / 2);
    const Index group = std::clamp<Index>(l_count / k_count, 1, l_count);
    std::vector<Index> order;
    std::vector<char> claimed;
    RVector unit_norm;
    std::size_t cursor = 0;
    for (int k = 0; k < k_count; ++k) {
      if (!empty[static_cast<std::size_t>(k)]) {
        mix.weights[k] = mass[k] * ll_scale;
        continue;
      }
      if (!may_reseed) {
        mix.weights[k] = std::max(mass[k], std::numeric_limits<double>::min()) * ll_scale;
        continue;
      }
      if (order.empty()) {
        order.resize(static_cast<std::size_t>(l_count));
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return sample_ll[a] < sample_ll[b]; });
        claimed.assign(static_cast<std::size_t>(l_count), 0);
        unit_norm = x.colwise().norm().transpose();
      }
      while (cursor < order.size() && claimed[static_cast<std::size_t>(order[cursor])]) ++cursor;
      const Index anchor = order[cursor < order.size() ? cursor : 0];
      const double anchor_norm = std::max(unit_norm[anchor], 1e-300);
      RVector align = (x.adjoint() * x.col(anchor)).cwiseAbs();
      for (Index l = 0; l < l_count; ++l) align[l] /= anchor_norm * std::max(unit_norm[l], 1e-300);
      std::vector<Index> near(static_cast<std::size_t>(l_count));
      std::iota(near.begin(), near.end(), Index{0});
      std::partial_sort(near.begin(), near.begin() + group, near.end(), [&](Index a, Index b) {
        return align[a] != align[b] ? align[a] > align[b] : a < b;
      });
      RVector r = RVector::Zero(l_count);
      for (Index i = 0; i < group; ++i) {
        r[near[static_cast<std::size_t>(i)]] = 1.0;
        claimed[static_cast<std::size_t>(near[static_cast<std::size_t>(i)])] = 1;
      }
      CMatrix c = weighted_second_moment(x, r, static_cast<double>(group));
      c.diagonal().array() += prior / static_cast<double>(group);
      mix.covariances[static_cast<std::size_t>(k)] = std::move(c);
      mix.weights[k] = static_cast<double>(group) * ll_scale;
      reseeded = true;
      ++trace.reseeds;
    }
    mix.weights /= mix.weights.sum();

    resp = log_joint(mix.weights, mix.covariances, x);
    const double prev = ll;
    ll = normalize_columns(resp, &sample_ll) * ll_scale - penalty_scale * inverse_trace_sum(mix.covariances);
    trace.log_likelihood.push_back(ll);
    trace.iterations = it;
    if (cfg.on_iteration) cfg.on_iteration(side, it, ll);

    const double rel = (ll - prev) / std::max(std::abs(prev), 1e-300);
    if (cfg.check_monotone && !reseeded && !reseeded_last && rel < -1e-8)
      throw NumericError(std::string("EM log-likelihood decreased (") + side + ", iteration " + std::to_string(it) +
                         ", relative change " + std::to_string(rel) + ")");
    reseeded_last = reseeded;
    if (!reseeded && std::abs(rel) < cfg.rel_ll_tol) {
      trace.converged = true;
      break;
    }
  }
  return mix;
}

}  // namespace

// --- GmmModel ---------------------------------------------------------------

GmmModel GmmModel::full(MixtureSide mixture, int n_tx, int n_rx) {
  check_mixture(mixture, "GmmModel");
  if (n_tx < 1 || n_rx < 1 || mixture.dim() != static_cast<Index>(n_tx) * n_rx)
    throw ConfigError("GmmModel: covariance dimension does not match n_tx*n_rx");
  GmmModel m;
  m.n_tx_ = n_tx;
  m.n_rx_ = n_rx;
  m.weights_ = std::move(mixture.weights);
  m.covariances_ = std::move(mixture.covariances);
  m.finalize();
  return m;
}

GmmModel GmmModel::factored(MixtureSide tx, MixtureSide rx, RVector weights) {
  check_mixture(tx, "GmmModel (tx factor)");
  check_mixture(rx, "GmmModel (rx factor)");
  if (weights.size() != static_cast<Index>(tx.size()) * rx.size())
    throw ConfigError("GmmModel: expanded weight count must equal K_tx*K_rx");
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-12)
    throw ConfigError("GmmModel: expanded weights must be a probability vector");
  GmmModel m;
  m.n_tx_ = static_cast<int>(tx.dim());
  m.n_rx_ = static_cast<int>(rx.dim());
  m.weights_ = std::move(weights);
  m.covariances_.reserve(static_cast<std::size_t>(m.weights_.size()));
  for (const auto& ct : tx.covariances)
    for (const auto& cr : rx.covariances) m.covariances_.push_back(linalg::kron(ct, cr));
  m.tx_ = std::move(tx);
  m.rx_ = std::move(rx);
  m.finalize();
  return m;
}

void GmmModel::finalize() {
  factors_.assign(covariances_.size(), std::nullopt);
  parallel_for(covariances_.size(), [&](std::size_t k) {
    try {
      factors_[k].emplace(covariances_[k]);
    } catch (const NumericError&) {
      factors_[k].reset();
    }
  });
  tx_eigen_.clear();
  if (tx_) {
    tx_eigen_.resize(tx_->covariances.size());
    parallel_for(tx_eigen_.size(), [&](std::size_t i) { tx_eigen_[i] = linalg::eigh_descending(tx_->covariances[i]); });
  } else if (n_rx_ == 1) {
    tx_eigen_.resize(covariances_.size());
    parallel_for(tx_eigen_.size(), [&](std::size_t i) { tx_eigen_[i] = linalg::eigh_descending(covariances_[i]); });
  }
}

int GmmModel::feedback_bits() const {
  int bits = 0;
  while ((1LL << bits) < n_components()) ++bits;
  return bits;
}

const MixtureSide& GmmModel::tx_factor() const {
  if (!tx_) throw UnsupportedModelError("model is not Kronecker factored");
  return *tx_;
}

const MixtureSide& GmmModel::rx_factor() const {
  if (!rx_) throw UnsupportedModelError("model is not Kronecker factored");
  return *rx_;
}

std::pair<int, int> GmmModel::factor_indices(int k) const {
  const int k_rx = rx_factor().size();
  return {k / k_rx, k % k_rx};
}

const CMatrix& GmmModel::tx_covariance(int k) const {
  if (k < 0 || k >= n_components()) throw ConfigError("tx_covariance: component index out of range");
  if (tx_) return tx_->covariances[static_cast<std::size_t>(factor_indices(k).first)];
  if (n_rx_ == 1) return covariances_[static_cast<std::size_t>(k)];
  throw UnsupportedModelError("unfactored MIMO model has no transmit-side covariance");
}

const linalg::HermitianEigen& GmmModel::tx_eigen(int k) const {
  if (k < 0 || k >= n_components()) throw ConfigError("tx_eigen: component index out of range");
  if (tx_) return tx_eigen_[static_cast<std::size_t>(factor_indices(k).first)];
  if (n_rx_ == 1) return tx_eigen_[static_cast<std::size_t>(k)];
  throw UnsupportedModelError("unfactored MIMO model has no transmit-side covariance");
}

// --- fitting ----------------------------------------------------------------

FitResult fit_em(const CMatrix& samples, int n_components, const FitConfig& config, int n_tx, int n_rx) {
  if (samples.rows() != static_cast<Index>(n_tx) * n_rx) throw ConfigError("fit_em: sample dimension mismatch");
  FitTrace trace;
  MixtureSide mix = em_fit(samples, n_components, config, "full", trace);
  return FitResult{GmmModel::full(std::move(mix), n_tx, n_rx), std::move(trace), {}};
}

FitResult fit_em(const Dataset& dataset, int n_components, const FitConfig& config) {
  return fit_em(dataset.samples, n_components, config, dataset.n_tx, dataset.n_rx);
}

FitResult fit_kronecker(const Dataset& dataset, int k_tx, int k_rx, const FitConfig& config) {
  const Index n_tx = dataset.n_tx;
  const Index n_rx = dataset.n_rx;
  const Index l_count = dataset.size();
  if (dataset.dim() != n_tx * n_rx || n_tx < 1 || n_rx < 1) throw ConfigError("fit_kronecker: dataset dimension mismatch");
  if (n_rx == 1 && k_rx != 1) throw ConfigError("fit_kronecker: a single receive antenna admits only K_rx = 1");

  // Transmit view: rows of each H (N_rx vectors of length N_tx per sample);
  // E[r rᴴ] = C_rx[a,a]·C_tx for row a.
  CMatrix tx_data(n_tx, l_count * n_rx);
  for (Index l = 0; l < l_count; ++l) {
    Eigen::Map<const CMatrix> h(dataset.samples.col(l).data(), n_rx, n_tx);
    tx_data.middleCols(l * n_rx, n_rx) = h.transpose();
  }
  FitTrace tx_trace;
  MixtureSide tx = em_fit(tx_data, k_tx, config, "tx", tx_trace);
  tx_data.resize(0, 0);

  FitTrace rx_trace;
  MixtureSide rx{RVector::Ones(1), {CMatrix::Ones(1, 1)}};
  if (n_rx > 1) {
    // Receive view: columns of each H; the column-major dataset is already laid out that way.
    Eigen::Map<const CMatrix> rx_data(dataset.samples.data(), n_rx, n_tx * l_count);
    FitConfig rx_cfg = config;
    rx_cfg.seed = derive_seed(config.seed, 1);
    rx = em_fit(rx_data, k_rx, rx_cfg, "rx", rx_trace);
    // Fix the scale ambiguity of the factorization with trace(C_rx) = N_rx.
    for (auto& c : rx.covariances) c *= static_cast<double>(n_rx) / c.trace().real();
  }

  RVector weights(static_cast<Index>(k_tx) * k_rx);
  for (int i = 0; i < k_tx; ++i)
    for (int j = 0; j < k_rx; ++j) weights[i * k_rx + j] = tx.weights[i] * rx.weights[j];
  weights /= weights.sum();

  GmmModel model = GmmModel::factored(tx, rx, weights);
  if (config.refine_weights && n_rx > 1) {
    std::vector<CMatrix> covs;
    covs.reserve(static_cast<std::size_t>(model.n_components()));
    for (int k = 0; k < model.n_components(); ++k) covs.push_back(model.covariance(k));
    Eigen::MatrixXd resp = log_joint(model.weights(), covs, dataset.samples);
    normalize_columns(resp);
    RVector refined = resp.rowwise().sum() / static_cast<double>(l_count);
    refined /= refined.sum();
    model = GmmModel::factored(std::move(tx), std::move(rx), std::move(refined));
  }
  return FitResult{std::move(model), std::move(tx_trace), std::move(rx_trace)};
}

double mean_log_likelihood(const GmmModel& model, const CMatrix& samples) {
  if (samples.rows() != model.dim()) throw ConfigError("mean_log_likelihood: dimension mismatch");
  std::vector<CMatrix> covs;
  for (int k = 0; k < model.n_components(); ++k) covs.push_back(model.covariance(k));
  Eigen::MatrixXd resp = log_joint(model.weights(), covs, samples);
  return normalize_columns(resp) / static_cast<double>(samples.cols());
}

// --- responsibilities and feedback ------------------------------------------

Responsibilities normalize_log_posteriors(const RVector& log_terms) {
  const double lse = linalg::log_sum_exp(log_terms);
  if (!std::isfinite(lse)) throw NumericError("responsibilities: every component has zero density");
  Responsibilities r{(log_terms.array() - lse).unaryExpr(&linalg::flushed_exp).matrix()};
  r.probs /= r.probs.sum();
  return r;
}

Responsibilities responsibilities_channel(const GmmModel& model, const CVector& h) {
  if (h.size() != model.dim()) throw ConfigError("responsibilities_channel: dimension mismatch");
  RVector terms(model.n_components());
  for (int k = 0; k < model.n_components(); ++k) {
    const auto& f = model.density_factor(k);
    const double w = model.weights()[k];
    terms[k] = (f && w > 0.0) ? std::log(w) + f->log_density(h) : -std::numeric_limits<double>::infinity();
  }
  return normalize_log_posteriors(terms);
}

FeedbackIndex map_feedback(const Responsibilities& resp) {
  if (resp.size() < 1) throw ConfigError("map_feedback: empty responsibilities");
  int best = 0;
  for (int k = 1; k < resp.size(); ++k)
    if (resp.probs[k] > resp.probs[best]) best = k;
  int bits = 0;
  while ((1LL << bits) < resp.size()) ++bits;
  return FeedbackIndex{best, bits};
}

// --- persistence ------------------------------------------------------------

namespace {

void write_side(io::LeWriter& w, const MixtureSide& side) {
  for (Index k = 0; k < side.weights.size(); ++k) w.f64(side.weights[k]);
  for (const auto& c : side.covariances) w.matrix(c);
}

MixtureSide read_side(io::LeReader& r, std::uint32_t count, Index dim) {
  MixtureSide side{RVector(count), {}};
  for (std::uint32_t k = 0; k < count; ++k) side.weights[k] = r.f64();
  side.covariances.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) side.covariances.push_back(r.matrix(dim, dim));
  return side;
}

}  // namespace

void save_model(const GmmModel& model, std::ostream& sink) {
  io::LeWriter w(sink);
  w.bytes(kModelMagic);
  w.u32(kModelVersion);
  w.u32(model.is_factored() ? kFlagFactored : 0u);
  w.u32(static_cast<std::uint32_t>(model.n_tx()));
  w.u32(static_cast<std::uint32_t>(model.n_rx()));
  w.u32(static_cast<std::uint32_t>(model.n_components()));
  if (model.is_factored()) {
    w.u32(static_cast<std::uint32_t>(model.tx_factor().size()));
    w.u32(static_cast<std::uint32_t>(model.rx_factor().size()));
  }
  for (int k = 0; k < model.n_components(); ++k) w.f64(model.weights()[k]);
  if (model.is_factored()) {
    write_side(w, model.tx_factor());
    write_side(w, model.rx_factor());
  } else {
    for (int k = 0; k < model.n_components(); ++k) w.matrix(model.covariance(k));
  }
  sink.flush();
  if (!sink) throw IoError("save_model: write failed");
}

GmmModel load_model(std::istream& source) {
  io::LeReader r(source);
  r.expect_magic(kModelMagic, "model");
  const std::uint32_t version = r.u32();
  if (version != kModelVersion) throw FormatError("model: unsupported version " + std::to_string(version));
  const std::uint32_t flags = r.u32();
  if ((flags & ~kFlagFactored) != 0) throw FormatError("model: unknown flags");
  const std::uint32_t n_tx = r.u32();
  const std::uint32_t n_rx = r.u32();
  const std::uint32_t k_count = r.u32();
  if (n_tx == 0 || n_rx == 0 || k_count == 0 || n_tx > 4096 || n_rx > 4096 || k_count > (1u << 20))
    throw FormatError("model: implausible dimensions in header");
  std::uint32_t k_tx = 0;
  std::uint32_t k_rx = 0;
  if (flags & kFlagFactored) {
    k_tx = r.u32();
    k_rx = r.u32();
    if (static_cast<std::uint64_t>(k_tx) * k_rx != k_count) throw FormatError("model: K != K_tx*K_rx");
  }
  RVector weights(k_count);
  for (std::uint32_t k = 0; k < k_count; ++k) weights[k] = r.f64();

  try {
    if (flags & kFlagFactored) {
      MixtureSide tx = read_side(r, k_tx, n_tx);
      MixtureSide rx = read_side(r, k_rx, n_rx);
      if (!r.at_end()) throw FormatError("model: trailing bytes");
      return GmmModel::factored(std::move(tx), std::move(rx), std::move(weights));
    }
    const Index n = static_cast<Index>(n_tx) * n_rx;
    MixtureSide mix{std::move(weights), {}};
    mix.covariances.reserve(k_count);
    for (std::uint32_t k = 0; k < k_count; ++k) mix.covariances.push_back(r.matrix(n, n));
    if (!r.at_end()) throw FormatError("model: trailing bytes");
    return GmmModel::full(std::move(mix), static_cast<int>(n_tx), static_cast<int>(n_rx));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("model: invalid contents: ") + e.what());
  }
}

}  // namespace fddlab
