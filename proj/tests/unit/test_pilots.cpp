#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "fddlab/gmm.hpp"
#include "fddlab/pilots.hpp"
#include "unit/helpers.hpp"

using namespace fddlab;

namespace {

GmmModel miso_model(std::vector<CMatrix> covs) {
  const int n = static_cast<int>(covs.front().rows());
  MixtureSide m{RVector::Constant(static_cast<Index>(covs.size()), 1.0 / static_cast<double>(covs.size())),
                std::move(covs)};
  return GmmModel::full(std::move(m), n, 1);
}

// Rows must equal the targets up to a unit-modulus factor per row.
double phase_free_distance(const CMatrix& p, const CMatrix& target) {
  double worst = 0.0;
  for (Index i = 0; i < p.rows(); ++i) {
    const Complex inner = p.row(i).dot(target.row(i));
    worst = std::max(worst, std::abs(1.0 - std::abs(inner)));
  }
  return worst;
}

}  // namespace

TEST_SUITE("pilot_design") {
  TEST_CASE("codebook picks dominant eigenvectors") {
    CMatrix c = CMatrix::Zero(4, 4);
    c.diagonal() << 4.0, 3.0, 2.0, 1.0;
    const PilotCodebook cb = build_codebook(miso_model({c}), 2, 1.0);
    REQUIRE(cb.size() == 1);
    const CMatrix expected = CMatrix::Identity(4, 4).topRows(2);
    CHECK(phase_free_distance(cb[0].matrix(), expected) <= 1e-12);
    CHECK(cb[0].provenance().kind == PilotKind::codebook);
    CHECK(cb[0].provenance().index == 0);
  }

  TEST_CASE("rank-one covariance gives the normalized steering row") {
    const CVector a = steering_vector(UlaGeometry(6), 0.4);
    const PilotCodebook cb = build_codebook(miso_model({a * a.adjoint()}), 1, 1.0);
    CHECK(phase_free_distance(cb[0].matrix(), a.adjoint() / a.norm()) <= 1e-10);
  }

  TEST_CASE("codebook entries are sub-unitary and capture the top eigenvalues") {
    Rng rng(51);
    std::vector<CMatrix> covs;
    for (int k = 0; k < 8; ++k) covs.push_back(test::random_psd(rng, 8));
    const GmmModel m = miso_model(covs);
    for (double rho : {1.0, 2.5}) {
      for (int n_p : {1, 3, 8}) {
        const PilotCodebook cb = build_codebook(m, n_p, rho);
        CHECK(cb.size() == 8);
        for (int k = 0; k < 8; ++k) {
          const CMatrix& p = cb[k].matrix();
          CHECK(sub_unitarity_error(p, rho) <= 1e-10);
          const auto eig = linalg::eigh_descending(covs[static_cast<std::size_t>(k)]);
          const double captured = (p * covs[static_cast<std::size_t>(k)] * p.adjoint()).trace().real() / rho;
          CHECK(std::abs(captured - eig.values.head(n_p).sum()) <= 1e-8 * eig.values.sum());
        }
      }
    }
  }

  TEST_CASE("codebook of a factored model uses the transmit factor") {
    Rng rng(52);
    MixtureSide tx{RVector::Constant(2, 0.5), {test::random_psd(rng, 4), test::random_psd(rng, 4)}};
    MixtureSide rx{RVector::Constant(3, 1.0 / 3.0),
                   {test::random_psd(rng, 2), test::random_psd(rng, 2), test::random_psd(rng, 2)}};
    const CMatrix tx0 = tx.covariances[0];
    const CMatrix tx1 = tx.covariances[1];
    const GmmModel m = GmmModel::factored(std::move(tx), std::move(rx), RVector::Constant(6, 1.0 / 6.0));
    const PilotCodebook cb = build_codebook(m, 2);
    CHECK(cb.size() == 6);
    const SpatialCovariance s0{ArraySide::tx, tx0};
    const SpatialCovariance s1{ArraySide::tx, tx1};
    for (int k = 0; k < 3; ++k) CHECK(cb[k].matrix() == genie_pilot(s0, 2).matrix());
    for (int k = 3; k < 6; ++k) CHECK(cb[k].matrix() == genie_pilot(s1, 2).matrix());
  }

  TEST_CASE("unfactored MIMO model cannot produce a codebook") {
    MixtureSide m{RVector::Ones(1), {CMatrix::Identity(4, 4)}};
    const GmmModel mimo = GmmModel::full(std::move(m), 2, 2);
    CHECK_THROWS_AS(build_codebook(mimo, 1), UnsupportedModelError);
    CHECK_THROWS_AS(build_codebook(miso_model({CMatrix::Identity(3, 3)}), 4), ConfigError);
  }

  TEST_CASE("genie pilot matches the codebook entry for the same covariance") {
    const auto cov = synth_covariance(UlaGeometry(8), ArraySide::tx, 0.2, deg_to_rad(10.0));
    const PilotMatrix g = genie_pilot(cov, 3);
    const PilotCodebook cb = build_codebook(miso_model({cov.matrix}), 3);
    CHECK(phase_free_distance(g.matrix(), cb[0].matrix()) <= 1e-12);
    CHECK(g.provenance().kind == PilotKind::genie);

    const PilotMatrix full = genie_pilot(cov, 8, 2.0);
    CHECK(test::max_abs_diff(full.matrix().adjoint() * full.matrix(), 2.0 * CMatrix::Identity(8, 8)) <= 1e-10);

    const SpatialCovariance eye{ArraySide::tx, CMatrix::Identity(5, 5)};
    CHECK(sub_unitarity_error(genie_pilot(eye, 3).matrix(), 1.0) <= 1e-10);
    const SpatialCovariance rx_side{ArraySide::rx, CMatrix::Identity(5, 5)};
    CHECK_THROWS_AS(genie_pilot(rx_side, 2), ConfigError);
  }

  TEST_CASE("DFT pilot rows and stride") {
    const PilotMatrix full = dft_pilot(4, 4);
    CHECK(test::max_abs_diff(full.matrix() * full.matrix().adjoint(), CMatrix::Identity(4, 4)) <= 1e-12);

    const PilotMatrix p = dft_pilot(16, 4);
    const int rows[] = {0, 4, 8, 12};
    for (int i = 0; i < 4; ++i)
      for (int n = 0; n < 16; ++n) {
        const Complex expected = std::polar(0.25, -2.0 * std::numbers::pi * rows[i] * n / 16.0);
        CHECK(std::abs(p.matrix()(i, n) - expected) <= 1e-14);
      }

    for (int n_tx = 1; n_tx <= 20; ++n_tx)
      for (int n_p = 1; n_p <= n_tx; ++n_p) CHECK(sub_unitarity_error(dft_pilot(n_tx, n_p, 1.5).matrix(), 1.5) <= 1e-10);
    CHECK_THROWS_AS(dft_pilot(4, 5), ConfigError);
    CHECK(dft_pilot(8, 2).provenance().kind == PilotKind::dft);
  }

  TEST_CASE("random pilots are sub-unitary and seed-deterministic") {
    for (std::uint64_t seed = 0; seed < 100; ++seed)
      CHECK(sub_unitarity_error(random_pilot(12, 5, 1.0, seed).matrix(), 1.0) <= 1e-10);
    CHECK(random_pilot(8, 3, 1.0, 42).matrix() == random_pilot(8, 3, 1.0, 42).matrix());
    CHECK(random_pilot(8, 3, 1.0, 42).matrix() != random_pilot(8, 3, 1.0, 43).matrix());
    const PilotMatrix one = random_pilot(8, 1, 3.0, 5);
    CHECK(one.matrix().norm() == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
    CHECK(one.provenance().seed == 5);
  }

  TEST_CASE("PilotMatrix enforces its invariant and ids differ by content") {
    CHECK_THROWS_AS(PilotMatrix(CMatrix::Ones(2, 3), 1.0, {}), NumericError);
    CHECK_THROWS_AS(PilotMatrix(CMatrix::Identity(3, 2), 1.0, {}), ConfigError);
    CHECK(dft_pilot(8, 2).id() == dft_pilot(8, 2).id());
    CHECK(dft_pilot(8, 2).id() != dft_pilot(8, 4).id());
    CHECK(random_pilot(8, 2, 1.0, 1).id() != random_pilot(8, 2, 1.0, 2).id());
  }

  TEST_CASE("codebook files round trip and are revalidated") {
    Rng rng(53);
    std::vector<CMatrix> covs;
    for (int k = 0; k < 4; ++k) covs.push_back(test::random_psd(rng, 6));
    const GmmModel m = miso_model(covs);
    const PilotCodebook cb = build_codebook(m, 2);
    std::stringstream ss;
    save_codebook(cb, ss);
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, 8) == "FDDPCB01");
    const PilotCodebook back = load_codebook(ss);
    REQUIRE(back.size() == 4);
    for (int k = 0; k < 4; ++k) {
      CHECK(back[k].matrix() == cb[k].matrix());
      CHECK(back[k].id() == cb[k].id());
    }

    const PilotCodebook again = build_codebook(m, 2);
    for (int k = 0; k < 4; ++k) CHECK(again[k].matrix() == cb[k].matrix());

    std::stringstream truncated(bytes.substr(0, bytes.size() - 1));
    CHECK_THROWS_AS(load_codebook(truncated), FormatError);
    // Flip a byte inside the first entry's payload: no longer sub-unitary.
    std::string corrupt = bytes;
    corrupt[40] = static_cast<char>(corrupt[40] ^ 0x40);
    std::stringstream bad(corrupt);
    CHECK_THROWS_AS(load_codebook(bad), FormatError);
  }
}
