#include <doctest.h>

#include <cmath>
#include <map>

#include "rotgyro/spectrum.hpp"
#include "rotgyro/states.hpp"

using namespace rotgyro;

namespace {

HamiltonianModel make_model(int n, double g6, double anisotropy = 0.03) {
    const ModelParams p = ModelParams::from_reduced_coupling(n, g6, anisotropy);
    return HamiltonianModel(p, std::make_shared<const ManyBodyBasis>(p.spec));
}

using Occ = std::vector<std::uint8_t>;
using FockMap = std::map<Occ, Complex>;

// Σ_k mode_k a†_k applied to every term
FockMap create(const FockMap& in, const ComplexVector& mode) {
    FockMap out;
    for (const auto& [occ, amp] : in) {
        for (Eigen::Index k = 0; k < mode.size(); ++k) {
            if (mode(k) == Complex(0.0)) continue;
            Occ next = occ;
            const double factor = std::sqrt(static_cast<double>(next[static_cast<std::size_t>(k)]) + 1.0);
            ++next[static_cast<std::size_t>(k)];
            out[next] += amp * mode(k) * factor;
        }
    }
    return out;
}

// <N−j, j| Ψ> by building the two-mode state explicitly with creation operators
Complex creation_overlap(const ManyBodyState& psi, const ComplexVector& m1, const ComplexVector& m2, int j) {
    const int n = psi.basis->spec().n_particles;
    FockMap state{{Occ(psi.basis->n_orbitals(), 0), Complex(1.0)}};
    for (int i = 0; i < n - j; ++i) state = create(state, m1);
    for (int i = 0; i < j; ++i) state = create(state, m2);
    const double norm = std::sqrt(std::tgamma(n - j + 1.0) * std::tgamma(j + 1.0));
    Complex sum = 0.0;
    for (const auto& [occ, amp] : state) {
        const auto idx = psi.basis->lookup(std::span<const std::uint8_t>(occ));
        if (idx) sum += std::conj(amp / norm) * psi.amplitudes(static_cast<Eigen::Index>(*idx));
    }
    return sum;
}

ManyBodyState ground(const HamiltonianModel& model, double omega) {
    return ground_state(model, solve_at(model, omega, 2));
}

}  // namespace

TEST_CASE("single-particle density matrix") {
    const HamiltonianModel model = make_model(4, 1.0);
    const ManyBodyState psi = ground(model, 0.82);
    const NaturalOrbitals no = spdm(psi);
    CHECK(no.density.trace().real() == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(std::abs(no.density.trace().imag()) < 1e-12);
    CHECK((no.density - no.density.adjoint()).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(no.populations.sum() == doctest::Approx(4.0).epsilon(1e-12));
    // near-ties (within 1e-9 relative) are ordered by weight on (0,0)
    for (Eigen::Index i = 1; i < no.populations.size(); ++i) CHECK(no.populations(i) <= no.populations(i - 1) + 1e-8);
    CHECK(no.populations.minCoeff() > -1e-12);
    // orthonormal natural orbitals diagonalise ρ
    const ComplexMatrix u = no.orbitals;
    CHECK((u.adjoint() * u - ComplexMatrix::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff() < 1e-12);
    const ComplexMatrix d = u.adjoint() * no.density * u;
    CHECK((d - ComplexMatrix(no.populations.cast<Complex>().asDiagonal())).cwiseAbs().maxCoeff() < 1e-11);
    // definite L parity: every natural orbital has definite m parity
    for (int p : no.m_parity) CHECK(p != 0);
    CHECK(no.leading_population(1) + no.leading_population(-1) <= 4.0 + 1e-12);
}

TEST_CASE("Fock state has integer occupations") {
    const ModelParams p = ModelParams::from_reduced_coupling(4, 1.0);
    const auto basis = std::make_shared<const ManyBodyBasis>(p.spec);
    const ManyBodyState psi = ManyBodyState::basis_state(basis, 5);
    const NaturalOrbitals no = spdm(psi);
    double total = 0.0;
    for (Eigen::Index i = 0; i < no.populations.size(); ++i) {
        CHECK(std::abs(no.populations(i) - std::round(no.populations(i))) < 1e-12);
        total += no.populations(i);
    }
    CHECK(total == doctest::Approx(4.0));
}

TEST_CASE("two-mode projection matches explicit creation operators") {
    const HamiltonianModel model = make_model(4, 1.0);
    for (double omega : {0.8, 0.83, 0.87}) {
        const ManyBodyState psi = ground(model, omega);
        const NaturalOrbitals no = spdm(psi);
        const TwoModeDecomposition dec = two_mode_project(psi, no);
        REQUIRE(dec.probabilities.size() == 3);
        double sum = 0.0;
        for (int n = 0; n <= 2; ++n) {
            const Complex ref = creation_overlap(psi, no.orbitals.col(0), no.orbitals.col(1), 2 * n);
            CHECK(std::abs(dec.coefficients[static_cast<std::size_t>(n)] - ref) < 1e-12);
            CHECK(dec.probabilities[static_cast<std::size_t>(n)] == doctest::Approx(std::norm(ref)).epsilon(1e-10));
            sum += std::norm(ref);
        }
        CHECK(dec.fidelity == doctest::Approx(sum).epsilon(1e-12));
        CHECK(dec.fidelity <= 1.0 + 1e-12);
        double odd = 0.0;
        for (int j : {1, 3}) odd += std::norm(creation_overlap(psi, no.orbitals.col(0), no.orbitals.col(1), j));
        CHECK(dec.odd_sector_weight == doctest::Approx(odd).epsilon(1e-10));
        CHECK(dec.odd_sector_weight < 1e-12);
    }
}

TEST_CASE("two-mode probabilities ignore global and mode phases") {
    const HamiltonianModel model = make_model(4, 1.0);
    const ManyBodyState psi = ground(model, 0.83);
    const NaturalOrbitals no = spdm(psi);
    const TwoModeDecomposition a = two_mode_project(psi, no);
    const ManyBodyState rotated(psi.basis, ComplexVector(psi.amplitudes * std::polar(1.0, 0.7)));
    const TwoModeDecomposition b =
        two_mode_project(rotated, ComplexVector(no.orbitals.col(0) * std::polar(1.0, -1.3)),
                         ComplexVector(no.orbitals.col(1) * std::polar(1.0, 2.1)));
    for (std::size_t n = 0; n < a.probabilities.size(); ++n) CHECK(std::abs(a.probabilities[n] - b.probabilities[n]) < 1e-13);
}

TEST_CASE("two-mode projection needs even N") {
    const HamiltonianModel model = make_model(3, 1.0);
    const ManyBodyState psi = ground(model, 0.5);
    CHECK_THROWS_AS(two_mode_project(psi, spdm(psi)), InvalidArgument);
}

TEST_CASE("mode entropy in bits") {
    TwoModeDecomposition d;
    d.probabilities = {0.5, 0.5};
    d.fidelity = 1.0;
    CHECK(mode_entropy(d) == doctest::Approx(1.0));
    d.probabilities = {0.25, 0.25, 0.25, 0.25};
    CHECK(mode_entropy(d) == doctest::Approx(2.0));
    // renormalised by the fidelity
    d.probabilities = {0.2, 0.2};
    d.fidelity = 0.4;
    CHECK(mode_entropy(d) == doctest::Approx(1.0));
    d.probabilities = {1.0, 0.0};
    d.fidelity = 1.0;
    CHECK(mode_entropy(d) == doctest::Approx(0.0));
}

TEST_CASE("angular momentum moments and block weights") {
    const ModelParams p = ModelParams::from_reduced_coupling(4, 1.0);
    const auto basis = std::make_shared<const ManyBodyBasis>(p.spec);
    const LBlock* b0 = basis->block(0);
    const LBlock* b8 = basis->block(8);
    REQUIRE(b0);
    REQUIRE(b8);
    const auto single = angular_momentum_moments(ManyBodyState::basis_state(basis, b8->begin));
    CHECK(single.mean == 8.0);
    CHECK(single.stddev == doctest::Approx(0.0));

    ComplexVector amps = ComplexVector::Zero(static_cast<Eigen::Index>(basis->dimension()));
    amps(static_cast<Eigen::Index>(b0->begin)) = std::sqrt(0.25);
    amps(static_cast<Eigen::Index>(b8->begin)) = Complex(0.0, std::sqrt(0.75));
    const ManyBodyState mixed(basis, amps);
    const auto m = angular_momentum_moments(mixed);
    CHECK(m.mean == doctest::Approx(6.0));
    CHECK(m.mean_square == doctest::Approx(48.0));
    CHECK(m.variance() == doctest::Approx(12.0));
    double total = 0.0;
    for (const auto& [l, w] : block_weights(mixed)) {
        total += w;
        if (l == 0) CHECK(w == doctest::Approx(0.25));
        else if (l == 8) CHECK(w == doctest::Approx(0.75));
        else CHECK(w == 0.0);
    }
    CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("overlap, fidelity and normalisation") {
    const ModelParams p = ModelParams::from_reduced_coupling(2, 1.0);
    const auto basis = std::make_shared<const ManyBodyBasis>(p.spec);
    const auto a = ManyBodyState::basis_state(basis, 0);
    const auto b = ManyBodyState::basis_state(basis, 1);
    CHECK(fidelity(a, a) == 1.0);
    CHECK(fidelity(a, b) == 0.0);
    CHECK(overlap(a, ManyBodyState(basis, ComplexVector(a.amplitudes * Complex(0.0, 1.0)))) == Complex(0.0, 1.0));
    CHECK_NOTHROW(a.require_normalized());
    CHECK_THROWS_AS(ManyBodyState(basis, ComplexVector(a.amplitudes * 2.0)).require_normalized(), InvalidArgument);
}
