#pragma once

#include <limits>
#include <memory>
#include <vector>

#include "rotgyro/common.hpp"
#include "rotgyro/eigensolver.hpp"
#include "rotgyro/hamiltonian.hpp"
#include "rotgyro/states.hpp"

namespace rotgyro {

/// Which isotropic eigenstates to keep. A state is kept when, somewhere in
/// [omega_min, omega_max], its energy E_i − ΩL_i lies within `energy_window`
/// of the isotropic ground energy at that Ω.
struct FrameOptions {
    double energy_window = std::numeric_limits<double>::infinity();
    double omega_min = 0.0;
    double omega_max = 0.0;
    /// Hard cap on the number of kept states (0 = none), lowest first.
    int max_states = 0;
};

/// Eigen-decomposition of the frame Hamiltonian at one (Ω, anisotropy scale).
struct FrameSpectrum {
    double omega = 0.0;
    double scale = 1.0;
    RealVector values;   // ascending
    RealMatrix vectors;  // columns over frame states
};

/// Eigenbasis {Φ_i} of the isotropic (A = 0) Hamiltonian, block by block in L.
/// Frame amplitudes c_i = ⟨Φ_i|ψ⟩; in this basis
///   H(Ω, s) = diag(E_i − Ω L_i) + s c W_ij,
/// with E_i the Ω = 0 energies and W the quadrupole operator.
class IsotropicFrame {
public:
    struct Block {
        int l = 0;
        std::size_t basis_begin = 0;
        std::size_t basis_size = 0;
        Eigen::Index frame_begin = 0;
        RealMatrix vectors;  // basis_size × kept
        Eigen::Index kept() const { return vectors.cols(); }
    };

    IsotropicFrame(const HamiltonianModel& model, const FrameOptions& options = {});

    Eigen::Index size() const { return energies_.size(); }
    bool complete() const { return size() == static_cast<Eigen::Index>(basis_->dimension()); }
    const std::shared_ptr<const ManyBodyBasis>& basis_ptr() const noexcept { return basis_; }
    const std::vector<Block>& blocks() const noexcept { return blocks_; }
    const RealVector& energies() const noexcept { return energies_; }
    const RealVector& angular_momentum() const noexcept { return angular_momentum_; }
    const SparseMatrix& quadrupole() const noexcept { return quadrupole_; }
    /// Multiplier of W at anisotropy scale 1.
    double coupling() const noexcept { return coupling_; }
    const FrameOptions& options() const noexcept { return options_; }

    RealVector diagonal(double omega) const;
    SparseMatrix hamiltonian(double omega, double scale = 1.0) const;
    RealMatrix dense_hamiltonian(double omega, double scale = 1.0) const;
    FrameSpectrum diagonalize(double omega, double scale = 1.0) const;

    /// Index of the lowest E_i − Ω L_i (isotropic ground state at Ω).
    Eigen::Index isotropic_ground(double omega) const;

    ComplexVector to_frame(const ComplexVector& fock) const;
    ComplexVector to_fock(const ComplexVector& amplitudes) const;
    ComplexVector to_frame(const ManyBodyState& state) const { return to_frame(state.amplitudes); }
    ManyBodyState state(const ComplexVector& amplitudes) const { return {basis_, to_fock(amplitudes)}; }

    /// ⟨L⟩ and ⟨L²⟩ of frame amplitudes.
    AngularMomentumMoments moments(const ComplexVector& amplitudes) const;
    /// Probability per L block, ordered by increasing L.
    std::vector<std::pair<int, double>> block_weights(const ComplexVector& amplitudes) const;

private:
    std::shared_ptr<const ManyBodyBasis> basis_;
    FrameOptions options_;
    std::vector<Block> blocks_;
    RealVector energies_;
    RealVector angular_momentum_;
    SparseMatrix quadrupole_;
    double coupling_ = 0.0;
};

}  // namespace rotgyro
