#pragma once

#include <cstdint>
#include <memory>
#include <string_view>

#include <Eigen/SparseCore>

#include "rotgyro/basis.hpp"
#include "rotgyro/common.hpp"
#include "rotgyro/integrals.hpp"

namespace rotgyro {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// How the anisotropy strength A enters the one-body potential.
///   elliptic:  ½[(1 + A)x² + (1 − A)y²], i.e. (A/4)·2(x² − y²) on top of ½r²
///   quadrupole: 2A(x² − y²) taken literally
enum class AnisotropyConvention : std::uint8_t { elliptic, quadrupole };

const char* to_string(AnisotropyConvention c);
AnisotropyConvention anisotropy_convention_from_string(std::string_view name);

/// Physical parameters in trap units. The contact coupling g is dimensionless
/// (ħ²g/M per pair).
struct ModelParams {
    double g = 0.0;
    double anisotropy = 0.03;
    AnisotropyConvention convention = AnisotropyConvention::elliptic;
    TruncationSpec spec;

    void validate() const;

    /// Multiplier of the 2(x² − y²) operator implied by A and the convention.
    double quadrupole_coefficient() const {
        return convention == AnisotropyConvention::elliptic ? 0.25 * anisotropy : anisotropy;
    }

    /// Builds parameters from the reduced coupling gN/6 used to label regimes.
    static ModelParams from_reduced_coupling(int n_particles, double g_n_over_6, double anisotropy = 0.03);
    double reduced_coupling() const { return g * spec.n_particles / 6.0; }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Rotating-frame Hamiltonian at a fixed Ω and anisotropy multiplier.
struct SparseHamiltonian {
    SparseMatrix matrix;
    double omega = 0.0;
    double anisotropy_scale = 1.0;
    double anisotropy = 0.0;  // multiplier of 2(x² − y²) actually applied

    Eigen::Index dimension() const { return matrix.rows(); }
};

/// Precomputed pieces of the many-body Hamiltonian over one basis:
///   H(Ω, s) = diag(E⁰ − Ω L) + g V + s c W
/// where E⁰ is the non-rotating single-particle energy, V the contact term at
/// g = 1, W the 2(x² − y²) term and c = quadrupole_coefficient().
class HamiltonianModel {
public:
    struct Options {
        int quadrature_order = 0;  // 0 selects the exact order for the orbital set
        const InteractionTensor* tensor = nullptr;
    };

    HamiltonianModel(ModelParams params, std::shared_ptr<const ManyBodyBasis> basis);
    HamiltonianModel(ModelParams params, std::shared_ptr<const ManyBodyBasis> basis, const Options& options);

    const ModelParams& params() const noexcept { return params_; }
    const ManyBodyBasis& basis() const noexcept { return *basis_; }
    const std::shared_ptr<const ManyBodyBasis>& basis_ptr() const noexcept { return basis_; }
    Eigen::Index dimension() const { return static_cast<Eigen::Index>(basis_->dimension()); }

    const RealVector& bare_energy() const noexcept { return bare_energy_; }
    const RealVector& angular_momentum() const noexcept { return angular_momentum_; }
    const SparseMatrix& contact() const noexcept { return contact_; }
    const SparseMatrix& quadrupole() const noexcept { return quadrupole_; }

    SparseHamiltonian assemble(double omega, double anisotropy_scale = 1.0) const;

    /// Same model with a different coupling, sharing basis and precomputed matrices.
    HamiltonianModel with_params(const ModelParams& params) const;

    /// Stable digest of parameters and truncation (cache key component).
    std::uint64_t digest() const;

private:
    HamiltonianModel() = default;

    ModelParams params_;
    std::shared_ptr<const ManyBodyBasis> basis_;
    RealVector bare_energy_;
    RealVector angular_momentum_;
    SparseMatrix contact_;
    SparseMatrix quadrupole_;
};

/// Single-particle rotating-frame energy 2n + |m| + 1 − Ω m.
double single_particle_energy(const Orbital& orb, double omega);

/// Many-body contact operator (g = 1) over a basis.
SparseMatrix build_contact_operator(const ManyBodyBasis& basis, const InteractionTensor& tensor);
/// Many-body quadrupole operator Σ <k|2(x²−y²)|l> a†_k a_l (A = 1) over a basis.
SparseMatrix build_quadrupole_operator(const ManyBodyBasis& basis);

ComplexVector apply(const SparseHamiltonian& h, const ComplexVector& v);
RealVector apply(const SparseHamiltonian& h, const RealVector& v);

}  // namespace rotgyro
