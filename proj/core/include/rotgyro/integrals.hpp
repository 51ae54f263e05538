#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rotgyro/basis.hpp"
#include "rotgyro/quadrature.hpp"

namespace rotgyro {

/// Radial part of a normalised 2D oscillator eigenfunction, without the
/// Gaussian factor, as a function of u = r^2:
///   sqrt(2 n! / (n+|m|)!) u^{|m|/2} L_n^{|m|}(u).
/// The full orbital is radial(u) exp(-u/2) exp(i m theta) / sqrt(2 pi).
double orbital_radial(const Orbital& orb, double u);

/// Closed-form contact integral for four lowest-Landau-level orbitals (n = 0).
double lll_contact_integral(int m1, int m2, int m3, int m4);

/// Evaluates single-particle matrix elements by Gauss-Laguerre quadrature in u = r^2.
class OrbitalIntegrals {
public:
    /// The rule is exact when 2*order - 1 covers the polynomial degree of the integrand.
    explicit OrbitalIntegrals(int quadrature_order);

    /// Order sufficient for every contact integral among `orbitals`.
    static int required_order(std::span<const Orbital> orbitals);

    int order() const noexcept { return order_; }

    /// Integral of conj(phi1) conj(phi2) phi3 phi4 over the plane.
    double contact(const Orbital& k1, const Orbital& k2, const Orbital& k3, const Orbital& k4) const;

    /// <k| 2(x^2 - y^2) |l>.
    double quadrupole(const Orbital& k, const Orbital& l) const;

private:
    int order_;
    QuadratureRule rule_;
};

double interaction_element(const Orbital& k1, const Orbital& k2, const Orbital& k3, const Orbital& k4);
double anisotropy_element(const Orbital& k, const Orbital& l);

/// Contact-interaction tensor over unordered orbital pairs. Pairs are grouped by
/// total m; within a group the tensor is a dense symmetric matrix
/// V[p][q] = contact(p.first, p.second, q.first, q.second).
class InteractionTensor {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    struct PairGroup {
        int total_m = 0;
        std::vector<std::pair<std::uint16_t, std::uint16_t>> pairs;  // orbital positions, first <= second
        std::vector<double> elements;                                 // row-major, pairs.size()^2

        double at(std::size_t p, std::size_t q) const { return elements[p * pairs.size() + q]; }
    };

    InteractionTensor() = default;
    InteractionTensor(std::span<const Orbital> orbitals, int quadrature_order);

    const std::vector<PairGroup>& groups() const noexcept { return groups_; }
    const PairGroup* group(int total_m) const;
    int quadrature_order() const noexcept { return order_; }

    /// Writes the tensor tagged with `spec_digest`, the quadrature order and the format version.
    void save(const std::filesystem::path& file, std::uint64_t spec_digest) const;

    /// Loads a tensor written by save(). Returns nullopt when the file is
    /// missing, corrupt, or tagged with a different digest, order or version.
    static std::optional<InteractionTensor> load(const std::filesystem::path& file,
                                                 std::uint64_t spec_digest, int quadrature_order);

private:
    int order_ = 0;
    std::vector<PairGroup> groups_;
};

/// Single-particle quadrupole matrix <k|2(x^2-y^2)|l> over an orbital list (dense, symmetric).
std::vector<double> anisotropy_matrix(std::span<const Orbital> orbitals);

}  // namespace rotgyro
