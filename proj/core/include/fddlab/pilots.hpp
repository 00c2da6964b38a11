#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fddlab/channel_model.hpp"
#include "fddlab/gmm.hpp"
#include "fddlab/types.hpp"

namespace fddlab {

enum class PilotKind { codebook, dft, random, genie, custom };

struct PilotProvenance {
  PilotKind kind = PilotKind::custom;
  std::int64_t index = -1;  ///< codebook entry
  std::uint64_t seed = 0;   ///< random seed or scenario tag
};

/// Max-abs deviation of P·Pᴴ from ρ·I.
double sub_unitarity_error(const CMatrix& pilot, double rho);

/// An n_p × N_tx pilot with orthonormal rows scaled by √ρ (P·Pᴴ = ρ·I within 1e-10).
class PilotMatrix {
 public:
  PilotMatrix(CMatrix matrix, double rho, PilotProvenance provenance);

  const CMatrix& matrix() const { return matrix_; }
  double rho() const { return rho_; }
  Index n_p() const { return matrix_.rows(); }
  Index n_tx() const { return matrix_.cols(); }
  const PilotProvenance& provenance() const { return provenance_; }
  /// Stable identifier: provenance tag plus a content hash of the entries.
  const std::string& id() const { return id_; }

 private:
  CMatrix matrix_;
  double rho_;
  PilotProvenance provenance_;
  std::string id_;
};

/// One pilot per mixture component, index-aligned with the model.
class PilotCodebook {
 public:
  explicit PilotCodebook(std::vector<PilotMatrix> entries);

  int size() const { return static_cast<int>(entries_.size()); }
  const PilotMatrix& operator[](int k) const { return entries_.at(static_cast<std::size_t>(k)); }
  const std::vector<PilotMatrix>& entries() const { return entries_; }
  Index n_p() const { return entries_.front().n_p(); }
  Index n_tx() const { return entries_.front().n_tx(); }

 private:
  std::vector<PilotMatrix> entries_;
};

/// Entry k = √ρ·U_kᴴ[:n_p, :] from the eigenvectors of component k's transmit covariance.
PilotCodebook build_codebook(const GmmModel& model, int n_p, double rho = 1.0);

/// Same construction from the true transmit covariance of a scenario.
PilotMatrix genie_pilot(const SpatialCovariance& tx_covariance, int n_p, double rho = 1.0,
                        std::uint64_t scenario_tag = 0);
PilotMatrix genie_pilot(const linalg::HermitianEigen& tx_eigen, int n_p, double rho = 1.0,
                        std::uint64_t scenario_tag = 0);

/// Rows ⌊i·N_tx/n_p⌋ of the unitary N_tx-point DFT matrix, scaled by √ρ.
PilotMatrix dft_pilot(int n_tx, int n_p, double rho = 1.0);

/// Row-orthonormalized i.i.d. complex Gaussian matrix, scaled by √ρ.
PilotMatrix random_pilot(int n_tx, int n_p, double rho, std::uint64_t seed);

void save_codebook(const PilotCodebook& codebook, std::ostream& sink);
/// Reads and revalidates every entry; ρ is recovered from the row energy.
PilotCodebook load_codebook(std::istream& source);

}  // namespace fddlab
