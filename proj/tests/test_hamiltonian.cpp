#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "rotgyro/hamiltonian.hpp"
#include "rotgyro/integrals.hpp"
#include "rotgyro/quadrature.hpp"

using namespace rotgyro;

namespace {

std::shared_ptr<const ManyBodyBasis> make_basis(const TruncationSpec& spec) {
    return std::make_shared<const ManyBodyBasis>(spec);
}

}  // namespace

TEST_CASE("Gauss-Laguerre rule integrates polynomials exactly") {
    const auto rule = gauss_laguerre(10);
    // ∫ x^k e^{-x} dx = k!
    for (int k = 0; k < 20; ++k) {
        double sum = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * std::pow(rule.nodes[i], k);
        CHECK(sum == doctest::Approx(std::tgamma(k + 1.0)).epsilon(1e-11));
    }
}

TEST_CASE("contact and quadrupole elements match plane quadrature") {
    for (const auto& c : oracle::interaction_checks()) {
        INFO(c.name << ": " << c.value);
        CHECK(c.passed);
    }
}

TEST_CASE("lowest-Landau-level contact integral matches quadrature") {
    const auto orbs = oracle::orbital_set(0, 4);
    const oracle::PlaneQuadrature quad(orbs);
    for (std::size_t a = 4; a < orbs.size(); ++a) {
        for (std::size_t b = 4; b < orbs.size(); ++b) {
            for (std::size_t c = 4; c < orbs.size(); ++c) {
                for (std::size_t d = 4; d < orbs.size(); ++d) {
                    const double lib = lll_contact_integral(orbs[a].m, orbs[b].m, orbs[c].m, orbs[d].m);
                    CHECK(std::abs(lib - quad.contact(a, b, c, d).real()) < 1e-12);
                }
            }
        }
    }
}

TEST_CASE("contact elements conserve angular momentum") {
    const auto orbs = oracle::orbital_set(1, 3);
    for (const auto& a : orbs) {
        for (const auto& b : orbs) {
            for (const auto& c : orbs) {
                for (const auto& d : orbs) {
                    if (a.m + b.m != c.m + d.m) CHECK(interaction_element(a, b, c, d) == 0.0);
                }
            }
        }
    }
}

TEST_CASE("quadrupole element between (0,0) and (0,2) is sqrt(2)") {
    // ∫ φ00 r² e^{-2iθ} φ02 = (2π / (√2 π)) ∫ r⁵ e^{-r²} dr = √2
    CHECK(anisotropy_element({0, 0}, {0, 2}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-13));
    CHECK(anisotropy_element({0, 0}, {0, -2}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-13));
    CHECK(anisotropy_element({0, 0}, {0, 1}) == 0.0);
}

TEST_CASE("two-particle Hamiltonian equals the first-quantised oracle") {
    for (auto convention : {AnisotropyConvention::elliptic, AnisotropyConvention::quadrupole}) {
        ModelParams p = ModelParams::from_reduced_coupling(2, 0.7, 0.05);
        p.convention = convention;
        const auto basis = make_basis(p.spec);
        const HamiltonianModel model(p, basis);
        for (double omega : {0.0, 0.55, 0.93}) {
            for (double s : {1.0, 0.4}) {
                const RealMatrix lib = RealMatrix(model.assemble(omega, s).matrix);
                const RealMatrix ref = oracle::two_particle_hamiltonian(*basis, p, omega, s);
                CHECK((lib - ref).cwiseAbs().maxCoeff() < 1e-11);
            }
        }
    }
}

TEST_CASE("anisotropy conventions and reduced coupling") {
    ModelParams p = ModelParams::from_reduced_coupling(12, 0.44, 0.03);
    CHECK(p.g == doctest::Approx(6.0 * 0.44 / 12.0));
    CHECK(p.reduced_coupling() == doctest::Approx(0.44));
    CHECK(p.quadrupole_coefficient() == doctest::Approx(0.0075));
    p.convention = AnisotropyConvention::quadrupole;
    CHECK(p.quadrupole_coefficient() == doctest::Approx(0.03));
    CHECK(anisotropy_convention_from_string(to_string(AnisotropyConvention::elliptic)) == AnisotropyConvention::elliptic);
    CHECK_THROWS_AS(anisotropy_convention_from_string("circular"), InvalidArgument);
}

TEST_CASE("Hamiltonian structure") {
    const ModelParams p = ModelParams::from_reduced_coupling(6, 1.0, 0.03);
    const auto basis = make_basis(p.spec);
    const HamiltonianModel model(p, basis);

    SUBCASE("symmetric") {
        const RealMatrix h = RealMatrix(model.assemble(0.8).matrix);
        CHECK((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-13);
    }
    SUBCASE("linear in rotation and anisotropy scale") {
        const RealMatrix h0 = RealMatrix(model.assemble(0.0, 0.0).matrix);
        const RealMatrix h = RealMatrix(model.assemble(0.7, 0.5).matrix);
        RealMatrix expected = h0;
        for (Eigen::Index i = 0; i < h0.rows(); ++i) expected(i, i) -= 0.7 * basis->angular_momentum(static_cast<std::size_t>(i));
        expected += 0.5 * p.quadrupole_coefficient() * RealMatrix(model.quadrupole());
        CHECK((h - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("contact keeps L, quadrupole changes it by two") {
        for (Eigen::Index r = 0; r < model.contact().outerSize(); ++r) {
            for (SparseMatrix::InnerIterator it(model.contact(), r); it; ++it) {
                CHECK(basis->angular_momentum(static_cast<std::size_t>(r)) ==
                      basis->angular_momentum(static_cast<std::size_t>(it.col())));
            }
            for (SparseMatrix::InnerIterator it(model.quadrupole(), r); it; ++it) {
                const int dl = basis->angular_momentum(static_cast<std::size_t>(r)) -
                               basis->angular_momentum(static_cast<std::size_t>(it.col()));
                CHECK(std::abs(dl) == 2);
            }
        }
    }
    SUBCASE("with_params shares the basis and rescales the contact term") {
        ModelParams q = p;
        q.g *= 2.0;
        const HamiltonianModel other = model.with_params(q);
        CHECK(&other.basis() == &model.basis());
        const RealMatrix d = RealMatrix(other.assemble(0.8).matrix - model.assemble(0.8).matrix);
        CHECK((d - p.g * RealMatrix(model.contact())).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(other.digest() != model.digest());
    }
}

TEST_CASE("single particle without anisotropy is diagonal") {
    ModelParams p = ModelParams::from_reduced_coupling(1, 1.0, 0.0);
    const auto basis = make_basis(p.spec);
    const HamiltonianModel model(p, basis);
    const RealMatrix h = RealMatrix(model.assemble(0.6).matrix);
    for (std::size_t i = 0; i < basis->dimension(); ++i) {
        const Orbital orb = basis->state(i).front().first;
        CHECK(h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) == doctest::Approx(single_particle_energy(orb, 0.6)));
    }
    CHECK((h - RealMatrix(h.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("interaction tensor round trip through a file") {
    const ManyBodyBasis basis(TruncationSpec::standard(4));
    const int order = OrbitalIntegrals::required_order(basis.orbitals());
    const InteractionTensor tensor(basis.orbitals(), order);
    const auto dir = std::filesystem::temp_directory_path() / "rotgyro_tensor_test";
    std::filesystem::create_directories(dir);
    const auto file = dir / "tensor.bin";
    tensor.save(file, basis.digest());

    const auto loaded = InteractionTensor::load(file, basis.digest(), order);
    REQUIRE(loaded.has_value());
    REQUIRE(loaded->groups().size() == tensor.groups().size());
    for (std::size_t g = 0; g < tensor.groups().size(); ++g) {
        CHECK(loaded->groups()[g].pairs == tensor.groups()[g].pairs);
        CHECK(loaded->groups()[g].elements == tensor.groups()[g].elements);
    }
    CHECK_FALSE(InteractionTensor::load(file, basis.digest() + 1, order).has_value());
    CHECK_FALSE(InteractionTensor::load(file, basis.digest(), order + 1).has_value());

    {
        std::ofstream(file, std::ios::binary | std::ios::trunc) << "garbage";
    }
    CHECK_FALSE(InteractionTensor::load(file, basis.digest(), order).has_value());
    std::filesystem::remove_all(dir);
}
