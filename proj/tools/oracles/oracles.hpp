#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rotgyro/basis.hpp"
#include "rotgyro/common.hpp"
#include "rotgyro/hamiltonian.hpp"

// Independent reference implementations used to cross-check the library:
// Cartesian Gauss-Hermite quadrature of explicit orbital wave functions, a
// brute-force Fock-state enumeration, a first-quantised two-particle
// Hamiltonian and a dense matrix exponential.
namespace rotgyro::oracle {

struct HermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;  // for the weight exp(−x²)
};

/// Golub–Welsch rule; exact for polynomials of degree < 2·order.
HermiteRule gauss_hermite(int order);

/// Generalised Laguerre polynomial from its explicit sum.
double laguerre(int n, int alpha, double x);

/// Oscillator orbital φ_{n,m}(x, y) without its Gaussian factor exp(−r²/2).
Complex orbital_polynomial(const Orbital& orb, double x, double y);

/// Integrals over the plane by tensor-product Gauss–Hermite quadrature.
class PlaneQuadrature {
public:
    explicit PlaneQuadrature(std::vector<Orbital> orbitals, int order = 24);

    const std::vector<Orbital>& orbitals() const noexcept { return orbitals_; }
    /// ∫ conj(φa) conj(φb) φc φd
    Complex contact(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const;
    /// ∫ conj(φa) 2(x² − y²) φb
    Complex quadrupole(std::size_t a, std::size_t b) const;
    /// ∫ conj(φa) φb
    Complex overlap(std::size_t a, std::size_t b) const;

private:
    std::vector<Orbital> orbitals_;
    // values on the exp(−r²) grid and on the exp(−2r²) grid, weights folded in
    std::vector<std::vector<Complex>> single_;
    std::vector<std::vector<Complex>> double_;
    std::vector<double> single_weight_;
    std::vector<double> double_weight_;
    std::vector<double> quad_factor_;
};

/// Every orbital with n ≤ n_max and |m| ≤ m_max.
std::vector<Orbital> orbital_set(int n_max, int m_max);

/// Block sizes per total L from a direct enumeration of N-particle multisets.
/// Single-orbital m runs up to `m_cap` (negative: l_max).
std::map<int, std::size_t> brute_force_block_sizes(const TruncationSpec& spec, int m_cap = -1);

/// Dense H(Ω, s) for N = 2 built from symmetrised two-particle wave functions and
/// quadrature integrals, in the order of `basis`.
RealMatrix two_particle_hamiltonian(const ManyBodyBasis& basis, const ModelParams& params, double omega,
                                    double scale = 1.0);

/// exp(−i t H) v by full diagonalisation.
ComplexVector expm_apply(const RealMatrix& h, const ComplexVector& v, double t);

/// exp-ordered propagation under h_at(Ω) with Ω linear in time: midpoint
/// products of dense exponentials with one Richardson extrapolation.
ComplexVector ramp_expm_apply(const std::function<RealMatrix(double)>& h_at, double omega_start, double omega_end,
                              double duration, const ComplexVector& v, int slices);

struct Check {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    bool passed = false;
    std::string detail;
};

std::vector<Check> interaction_checks();
std::vector<Check> basis_checks(int max_particles = 6);
std::vector<Check> two_particle_checks();
std::vector<Check> solver_checks();
std::vector<Check> conservation_checks();

/// Everything above.
std::vector<Check> run_all();

}  // namespace rotgyro::oracle
