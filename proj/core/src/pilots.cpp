#include "fddlab/pilots.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <string_view>

#include <Eigen/QR>

#include "fddlab/binary_io.hpp"
#include "fddlab/rng.hpp"

namespace fddlab {

namespace {

constexpr std::string_view kCodebookMagic = "FDDPCB01";
constexpr double kSubUnitaryTol = 1e-10;

// ρ is implied by the entries, so it is not hashed; a reloaded codebook keeps its ids.
std::uint64_t content_hash(const CMatrix& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<double>(m.rows()));
  mix(static_cast<double>(m.cols()));
  for (Index i = 0; i < m.size(); ++i) {
    mix(m.data()[i].real());
    mix(m.data()[i].imag());
  }
  return h;
}

std::string kind_label(const PilotProvenance& p) {
  switch (p.kind) {
    case PilotKind::codebook:
      return "cb" + std::to_string(p.index);
    case PilotKind::dft:
      return "dft";
    case PilotKind::random:
      return "rnd" + std::to_string(p.seed);
    case PilotKind::genie:
      return "genie" + std::to_string(p.seed);
    case PilotKind::custom:
      break;
  }
  return "custom";
}

PilotMatrix from_eigen(const linalg::HermitianEigen& eig, int n_p, double rho, PilotProvenance prov) {
  const Index n_tx = eig.vectors.rows();
  if (n_p < 1 || n_p > n_tx) throw ConfigError("pilot: n_p must be in [1, N_tx]");
  if (!(rho > 0.0)) throw ConfigError("pilot: rho must be positive");
  CMatrix p = std::sqrt(rho) * eig.vectors.leftCols(n_p).adjoint();
  return PilotMatrix(std::move(p), rho, prov);
}

}  // namespace

double sub_unitarity_error(const CMatrix& pilot, double rho) {
  const CMatrix gram = pilot * pilot.adjoint();
  return linalg::max_abs(gram - rho * CMatrix::Identity(pilot.rows(), pilot.rows()));
}

PilotMatrix::PilotMatrix(CMatrix matrix, double rho, PilotProvenance provenance)
    : matrix_(std::move(matrix)), rho_(rho), provenance_(provenance) {
  if (matrix_.rows() < 1 || matrix_.rows() > matrix_.cols()) throw ConfigError("PilotMatrix: need 1 <= n_p <= N_tx");
  if (!(rho_ > 0.0)) throw ConfigError("PilotMatrix: rho must be positive");
  const double err = sub_unitarity_error(matrix_, rho_);
  if (!(err <= kSubUnitaryTol * std::max(1.0, rho_)))
    throw NumericError("PilotMatrix: rows are not orthonormal (P P^H - rho I max error " + std::to_string(err) + ")");
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(content_hash(matrix_)));
  id_ = kind_label(provenance_) + ":" + hash;
}

PilotCodebook::PilotCodebook(std::vector<PilotMatrix> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw ConfigError("PilotCodebook: empty codebook");
  for (const auto& e : entries_)
    if (e.n_p() != entries_.front().n_p() || e.n_tx() != entries_.front().n_tx())
      throw ConfigError("PilotCodebook: entries have inconsistent shapes");
}

PilotCodebook build_codebook(const GmmModel& model, int n_p, double rho) {
  if (!model.has_tx_covariances())
    throw UnsupportedModelError("build_codebook: unfactored MIMO model has no transmit-side covariances");
  if (n_p < 1 || n_p > model.n_tx()) throw ConfigError("build_codebook: n_p must be in [1, N_tx]");
  std::vector<PilotMatrix> entries;
  entries.reserve(static_cast<std::size_t>(model.n_components()));
  for (int k = 0; k < model.n_components(); ++k)
    entries.push_back(from_eigen(model.tx_eigen(k), n_p, rho, PilotProvenance{PilotKind::codebook, k, 0}));
  return PilotCodebook(std::move(entries));
}

PilotMatrix genie_pilot(const SpatialCovariance& tx_covariance, int n_p, double rho, std::uint64_t scenario_tag) {
  if (tx_covariance.side != ArraySide::tx) throw ConfigError("genie_pilot: expected a transmit-side covariance");
  return genie_pilot(linalg::eigh_descending(tx_covariance.matrix), n_p, rho, scenario_tag);
}

PilotMatrix genie_pilot(const linalg::HermitianEigen& tx_eigen, int n_p, double rho, std::uint64_t scenario_tag) {
  return from_eigen(tx_eigen, n_p, rho, PilotProvenance{PilotKind::genie, -1, scenario_tag});
}

PilotMatrix dft_pilot(int n_tx, int n_p, double rho) {
  if (n_p < 1 || n_p > n_tx) throw ConfigError("dft_pilot: n_p must be in [1, N_tx]");
  if (!(rho > 0.0)) throw ConfigError("dft_pilot: rho must be positive");
  CMatrix p(n_p, n_tx);
  const double amp = std::sqrt(rho / n_tx);
  for (int i = 0; i < n_p; ++i) {
    const long long row = static_cast<long long>(i) * n_tx / n_p;
    for (int n = 0; n < n_tx; ++n) {
      // Reduce the exponent modulo N_tx for accuracy at large indices.
      const long long e = (row * n) % n_tx;
      p(i, n) = std::polar(amp, -2.0 * std::numbers::pi * static_cast<double>(e) / n_tx);
    }
  }
  return PilotMatrix(std::move(p), rho, PilotProvenance{PilotKind::dft, -1, 0});
}

PilotMatrix random_pilot(int n_tx, int n_p, double rho, std::uint64_t seed) {
  if (n_p < 1 || n_p > n_tx) throw ConfigError("random_pilot: n_p must be in [1, N_tx]");
  if (!(rho > 0.0)) throw ConfigError("random_pilot: rho must be positive");
  Rng rng = make_stream(seed, stream::kPilot);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const CMatrix g = complex_normal(rng, n_tx, n_p);  // Gᴴ of the n_p × N_tx draw
    Eigen::HouseholderQR<CMatrix> qr(g);
    const CMatrix r = qr.matrixQR().topRows(n_p).triangularView<Eigen::Upper>();
    bool full_rank = true;
    for (int i = 0; i < n_p; ++i) full_rank = full_rank && std::abs(r(i, i)) > 1e-12;
    if (!full_rank) continue;
    const CMatrix q = qr.householderQ() * CMatrix::Identity(n_tx, n_p);
    return PilotMatrix(std::sqrt(rho) * q.adjoint(), rho, PilotProvenance{PilotKind::random, -1, seed});
  }
  throw NumericError("random_pilot: repeated rank-deficient draws");
}

void save_codebook(const PilotCodebook& codebook, std::ostream& sink) {
  io::LeWriter w(sink);
  w.bytes(kCodebookMagic);
  w.u32(static_cast<std::uint32_t>(codebook.size()));
  w.u32(static_cast<std::uint32_t>(codebook.n_p()));
  w.u32(static_cast<std::uint32_t>(codebook.n_tx()));
  for (const auto& e : codebook.entries()) w.matrix(e.matrix());
  sink.flush();
  if (!sink) throw IoError("save_codebook: write failed");
}

PilotCodebook load_codebook(std::istream& source) {
  io::LeReader r(source);
  r.expect_magic(kCodebookMagic, "codebook");
  const std::uint32_t k_count = r.u32();
  const std::uint32_t n_p = r.u32();
  const std::uint32_t n_tx = r.u32();
  if (k_count == 0 || n_p == 0 || n_tx == 0 || n_p > n_tx || n_tx > 4096 || k_count > (1u << 20))
    throw FormatError("codebook: implausible dimensions in header");
  std::vector<PilotMatrix> entries;
  entries.reserve(k_count);
  for (std::uint32_t k = 0; k < k_count; ++k) {
    CMatrix p = r.matrix(n_p, n_tx);
    const double rho = p.rowwise().squaredNorm().mean();
    try {
      entries.emplace_back(std::move(p), rho, PilotProvenance{PilotKind::codebook, k, 0});
    } catch (const Error& e) {
      throw FormatError("codebook: entry " + std::to_string(k) + " failed validation: " + e.what());
    }
  }
  if (!r.at_end()) throw FormatError("codebook: trailing bytes");
  return PilotCodebook(std::move(entries));
}

}  // namespace fddlab
