#pragma once

#include <memory>
#include <vector>

#include "rotgyro/basis.hpp"
#include "rotgyro/common.hpp"

namespace rotgyro {

/// Complex amplitude vector over a many-body basis.
struct ManyBodyState {
    std::shared_ptr<const ManyBodyBasis> basis;
    ComplexVector amplitudes;

    ManyBodyState() = default;
    ManyBodyState(std::shared_ptr<const ManyBodyBasis> b, ComplexVector amps);
    ManyBodyState(std::shared_ptr<const ManyBodyBasis> b, const RealVector& amps);

    Eigen::Index dimension() const { return amplitudes.size(); }
    double norm() const { return amplitudes.norm(); }

    /// Throws InvalidArgument unless | ||c|| − 1 | <= tol.
    void require_normalized(double tol = 1e-10) const;

    /// Basis state `index` with unit amplitude.
    static ManyBodyState basis_state(std::shared_ptr<const ManyBodyBasis> b, std::size_t index);
};

/// <a|b>
Complex overlap(const ManyBodyState& a, const ManyBodyState& b);
/// |<a|b>|^2
double fidelity(const ManyBodyState& a, const ManyBodyState& b);

/// Eigen-decomposition of the single-particle density matrix
/// ρ_lk = <a†_k a_l>. Column i of `orbitals` holds the coefficients
/// <φ_k|ψ_i> of natural orbital ψ_i over the basis orbitals.
struct NaturalOrbitals {
    ComplexMatrix density;
    RealVector populations;  // descending
    ComplexMatrix orbitals;
    /// +1 when ψ_i lives on even-m orbitals, −1 on odd-m, 0 if mixed.
    std::vector<int> m_parity;

    /// Largest population among natural orbitals of the given m parity (+1 or −1).
    double leading_population(int parity) const;
};

/// Single-particle density matrix and natural orbitals. For states of definite
/// L parity the matrix is block diagonal in the m parity of the orbitals and
/// each block is diagonalised separately. Ties between populations are broken in
/// favour of the orbital with larger weight on (n, m) = (0, 0).
NaturalOrbitals spdm(const ManyBodyState& state);

/// Projection onto two-mode Fock states |N − j⟩|j⟩ built from ψ₁, ψ₂.
struct TwoModeDecomposition {
    std::vector<Complex> coefficients;  // C_n for n = 0 .. N/2 (j = 2n quanta in ψ₂)
    std::vector<double> probabilities;  // P_n = |C_n|^2
    double fidelity = 0.0;              // Σ P_n
    double odd_sector_weight = 0.0;     // Σ over odd j of |<N−j, j|Ψ>|^2; nonzero signals a parity bug
};

/// C_n = <N−2n, 2n|Ψ>, computed as <vac| b₂^{2n} b₁^{N−2n} |Ψ> / sqrt((N−2n)!(2n)!)
/// with b_i = Σ_k conj(<φ_k|ψ_i>) a_k. Requires even N and orthogonal modes
/// (columns 0 and 1 of `modes.orbitals`).
TwoModeDecomposition two_mode_project(const ManyBodyState& state, const NaturalOrbitals& modes);

/// Same projection for explicit mode vectors (coefficients over basis orbitals).
TwoModeDecomposition two_mode_project(const ManyBodyState& state, const ComplexVector& mode1,
                                      const ComplexVector& mode2);

/// Entropy (bits) of the renormalised two-mode distribution P_n / Σ P_n.
double mode_entropy(const TwoModeDecomposition& decomp);

struct AngularMomentumMoments {
    double mean = 0.0;
    double mean_square = 0.0;
    double stddev = 0.0;
    double variance() const { return stddev * stddev; }
};

AngularMomentumMoments angular_momentum_moments(const ManyBodyState& state);

/// Weight of the state in every L block, in block order.
std::vector<std::pair<int, double>> block_weights(const ManyBodyState& state);

}  // namespace rotgyro
