#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "rotgyro/dynamics.hpp"
#include "rotgyro/eigensolver.hpp"
#include "rotgyro/frame.hpp"
#include "rotgyro/integrals.hpp"

namespace rotgyro::oracle {

HermiteRule gauss_hermite(int order) {
    if (order < 1) throw InvalidArgument("gauss_hermite: order must be >= 1");
    RealMatrix jacobi = RealMatrix::Zero(order, order);
    for (int k = 1; k < order; ++k) {
        jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(0.5 * k);
    }
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(jacobi);
    HermiteRule rule;
    for (int k = 0; k < order; ++k) {
        rule.nodes.push_back(es.eigenvalues()(k));
        const double v = es.eigenvectors()(0, k);
        rule.weights.push_back(std::sqrt(std::numbers::pi) * v * v);
    }
    return rule;
}

double laguerre(int n, int alpha, double x) {
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
        // binomial(n + alpha, n − i) / i!
        const double binom = std::exp(std::lgamma(n + alpha + 1.0) - std::lgamma(n - i + 1.0) - std::lgamma(alpha + i + 1.0));
        sum += ((i % 2) ? -1.0 : 1.0) * binom * std::pow(x, i) / std::tgamma(i + 1.0);
    }
    return sum;
}

Complex orbital_polynomial(const Orbital& orb, double x, double y) {
    const int am = std::abs(orb.m);
    const double r2 = x * x + y * y;
    const double norm = std::sqrt(std::tgamma(orb.n + 1.0) / (std::numbers::pi * std::tgamma(orb.n + am + 1.0)));
    const Complex z(x, orb.m >= 0 ? y : -y);
    return norm * std::pow(z, am) * laguerre(orb.n, am, r2);
}

PlaneQuadrature::PlaneQuadrature(std::vector<Orbital> orbitals, int order) : orbitals_(std::move(orbitals)) {
    const HermiteRule rule = gauss_hermite(order);
    const double s = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
            const double w = rule.weights[i] * rule.weights[j];
            single_weight_.push_back(w);
            double_weight_.push_back(0.5 * w);
            const double x = rule.nodes[i], y = rule.nodes[j];
            quad_factor_.push_back(2.0 * (x * x - y * y));
        }
    }
    single_.resize(orbitals_.size());
    double_.resize(orbitals_.size());
    for (std::size_t k = 0; k < orbitals_.size(); ++k) {
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
                single_[k].push_back(orbital_polynomial(orbitals_[k], rule.nodes[i], rule.nodes[j]));
                double_[k].push_back(orbital_polynomial(orbitals_[k], s * rule.nodes[i], s * rule.nodes[j]));
            }
        }
    }
}

Complex PlaneQuadrature::contact(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    Complex sum = 0.0;
    for (std::size_t p = 0; p < double_weight_.size(); ++p) {
        sum += double_weight_[p] * std::conj(double_[a][p] * double_[b][p]) * double_[c][p] * double_[d][p];
    }
    return sum;
}

Complex PlaneQuadrature::quadrupole(std::size_t a, std::size_t b) const {
    Complex sum = 0.0;
    for (std::size_t p = 0; p < single_weight_.size(); ++p) {
        sum += single_weight_[p] * quad_factor_[p] * std::conj(single_[a][p]) * single_[b][p];
    }
    return sum;
}

Complex PlaneQuadrature::overlap(std::size_t a, std::size_t b) const {
    Complex sum = 0.0;
    for (std::size_t p = 0; p < single_weight_.size(); ++p) sum += single_weight_[p] * std::conj(single_[a][p]) * single_[b][p];
    return sum;
}

std::vector<Orbital> orbital_set(int n_max, int m_max) {
    std::vector<Orbital> out;
    for (int n = 0; n <= n_max; ++n) {
        for (int m = -m_max; m <= m_max; ++m) out.push_back({n, m});
    }
    return out;
}

std::map<int, std::size_t> brute_force_block_sizes(const TruncationSpec& spec, int m_cap) {
    const int quanta = spec.n_ll_max - 1;  // Landau excitation quanta allowed in total
    // single-orbital m is capped at l_max, like the library's orbital set
    std::vector<Orbital> orbs;
    for (int n = 0; n <= quanta; ++n) {
        for (int m = -quanta; m <= (m_cap < 0 ? spec.l_max : m_cap); ++m) {
            const int excitation = n + (std::abs(m) - m) / 2;
            if (excitation <= quanta) orbs.push_back({n, m});
        }
    }
    std::map<int, std::size_t> sizes;
    std::function<void(std::size_t, int, int, int)> rec = [&](std::size_t first, int left, int l, int exc) {
        if (left == 0) {
            if (l < 0 || l > spec.l_max) return;
            if (spec.even_parity && l % 2 != 0) return;
            ++sizes[l];
            return;
        }
        for (std::size_t k = first; k < orbs.size(); ++k) {
            const int e = exc + orbs[k].n + (std::abs(orbs[k].m) - orbs[k].m) / 2;
            if (e > quanta) continue;
            if (l + orbs[k].m - quanta > spec.l_max) continue;
            rec(k, left - 1, l + orbs[k].m, e);
        }
    };
    rec(0, spec.n_particles, 0, 0);
    return sizes;
}

RealMatrix two_particle_hamiltonian(const ManyBodyBasis& basis, const ModelParams& params, double omega, double scale) {
    if (basis.spec().n_particles != 2) throw InvalidArgument("two_particle_hamiltonian: N must be 2");
    const auto& orbs = basis.orbitals();
    const PlaneQuadrature quad(orbs, 28);
    const std::size_t dim = basis.dimension();

    std::vector<std::pair<std::size_t, std::size_t>> pairs(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        const auto occ = basis.occupation(i);
        std::vector<std::size_t> idx;
        for (std::size_t k = 0; k < occ.size(); ++k) {
            for (int c = 0; c < occ[k]; ++c) idx.push_back(k);
        }
        pairs[i] = {idx.at(0), idx.at(1)};
    }
    const double coupling = scale * params.quadrupole_coefficient();
    auto one_body = [&](std::size_t p, std::size_t q) {
        double v = coupling * quad.quadrupole(p, q).real();
        if (p == q) v += 2.0 * orbs[p].n + std::abs(orbs[p].m) + 1.0 - omega * orbs[p].m;
        return v;
    };
    RealMatrix h = RealMatrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
        const auto [a, b] = pairs[i];
        for (std::size_t j = 0; j < dim; ++j) {
            const auto [c, d] = pairs[j];
            const double norm = std::sqrt((a == b ? 2.0 : 1.0) * (c == d ? 2.0 : 1.0));
            double v = 0.0;
            if (b == d) v += one_body(a, c);
            if (a == c) v += one_body(b, d);
            if (b == c) v += one_body(a, d);
            if (a == d) v += one_body(b, c);
            v /= norm;
            v += params.g * 2.0 * quad.contact(a, b, c, d).real() / norm;
            h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    return h;
}

ComplexVector expm_apply(const RealMatrix& h, const ComplexVector& v, double t) {
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(h);
    const ComplexMatrix u = es.eigenvectors().cast<Complex>();
    ComplexVector c = u.adjoint() * v;
    for (Eigen::Index k = 0; k < c.size(); ++k) c(k) *= std::exp(Complex(0.0, -t * es.eigenvalues()(k)));
    return u * c;
}

ComplexVector ramp_expm_apply(const std::function<RealMatrix(double)>& h_at, double omega_start, double omega_end,
                              double duration, const ComplexVector& v, int slices) {
    auto product = [&](int m) {
        ComplexVector x = v;
        const double dt = duration / m;
        for (int k = 0; k < m; ++k) {
            const double w = omega_start + (omega_end - omega_start) * (k + 0.5) / m;
            x = expm_apply(h_at(w), x, dt);
        }
        return x;
    };
    // the midpoint product is second order; one Richardson step removes h²
    return (4.0 * product(2 * slices) - product(slices)) / 3.0;
}

namespace {

Check make(std::string name, double value, double bound, std::string detail = {}) {
    return {std::move(name), value, bound, std::isfinite(value) && value <= bound, std::move(detail)};
}

ComplexVector probe_vector(Eigen::Index n) {
    ComplexVector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(1.0 + 0.1 * static_cast<double>(i % 7), 0.3 * static_cast<double>(i));
    return v / v.norm();
}

}  // namespace

std::vector<Check> interaction_checks() {
    const auto orbs = orbital_set(1, 3);
    const PlaneQuadrature quad(orbs);
    double contact_err = 0.0, quad_err = 0.0;
    for (std::size_t a = 0; a < orbs.size(); ++a) {
        for (std::size_t b = 0; b < orbs.size(); ++b) {
            quad_err = std::max(quad_err, std::abs(quad.quadrupole(a, b) - anisotropy_element(orbs[a], orbs[b])));
            for (std::size_t c = 0; c < orbs.size(); ++c) {
                for (std::size_t d = 0; d < orbs.size(); ++d) {
                    const double lib = interaction_element(orbs[a], orbs[b], orbs[c], orbs[d]);
                    contact_err = std::max(contact_err, std::abs(quad.contact(a, b, c, d) - lib));
                }
            }
        }
    }
    const std::string detail = std::to_string(orbs.size()) + " orbitals, n <= 1, |m| <= 3";
    return {make("contact elements vs plane quadrature", contact_err, 1e-8, detail),
            make("quadrupole elements vs plane quadrature", quad_err, 1e-8, detail)};
}

std::vector<Check> basis_checks(int max_particles) {
    int mismatches = 0, cases = 0;
    std::ostringstream detail;
    for (int n = 1; n <= max_particles; ++n) {
        for (int nll = 1; nll <= 2; ++nll) {
            for (bool parity : {true, false}) {
                const TruncationSpec spec{n, n + 4, nll, parity};
                const ManyBodyBasis basis(spec);
                std::map<int, std::size_t> lib;
                for (const auto& b : basis.blocks()) lib[b.l] = b.size();
                ++cases;
                if (lib != brute_force_block_sizes(spec)) {
                    ++mismatches;
                    detail << "N=" << n << " nll=" << nll << " parity=" << parity << "; ";
                }
            }
        }
    }
    detail << cases << " truncations";
    return {make("basis blocks vs brute-force enumeration", mismatches, 0.0, detail.str())};
}

std::vector<Check> two_particle_checks() {
    const ModelParams params = ModelParams::from_reduced_coupling(2, 1.0, 0.2);
    auto basis = std::make_shared<const ManyBodyBasis>(params.spec);
    const HamiltonianModel model(params, basis);
    const double omega = 0.7;
    const RealMatrix oracle = two_particle_hamiltonian(*basis, params, omega);
    const RealMatrix lib = RealMatrix(model.assemble(omega).matrix);
    std::vector<Check> out;
    out.push_back(make("N=2 Hamiltonian vs first-quantised oracle", (oracle - lib).cwiseAbs().maxCoeff(), 1e-10,
                       "dimension " + std::to_string(basis->dimension())));

    // hold, linear ramp, hold: frame integrator vs dense exponentials
    const IsotropicFrame frame(model);
    const RealMatrix h0 = two_particle_hamiltonian(*basis, params, 0.0);
    RealVector lvals(h0.rows());
    for (Eigen::Index i = 0; i < lvals.size(); ++i) lvals(i) = (h0 - oracle)(i, i) / omega;
    auto h_at = [&](double w) { return RealMatrix(h0 - w * RealMatrix(lvals.asDiagonal())); };

    ComplexVector fock = probe_vector(lib.rows());
    ComplexMatrix amps = frame.to_frame(fock);
    IntegratorConfig cfg;
    EvolutionDiagnostics diag;
    fock = expm_apply(h_at(0.6), fock, 3.0);
    amps = propagate(frame, amps, LinearDrive{3.0, 0.6, 0.6, 1.0, 1.0}, cfg, &diag);
    fock = ramp_expm_apply(h_at, 0.6, 0.9, 5.0, fock, 2000);
    amps = propagate(frame, amps, LinearDrive{5.0, 0.6, 0.9, 1.0, 1.0}, cfg, &diag);
    fock = expm_apply(h_at(0.9), fock, 2.0);
    amps = propagate(frame, amps, LinearDrive{2.0, 0.9, 0.9, 1.0, 1.0}, cfg, &diag);

    const ComplexVector got = frame.to_fock(amps.col(0));
    const double infidelity = 1.0 - std::norm(got.dot(fock));
    out.push_back(make("N=2 TDSE vs dense matrix exponential (1 - fidelity)", std::abs(infidelity), 1e-6,
                       "amplitude error " + std::to_string((got - fock).norm())));
    return out;
}

std::vector<Check> solver_checks() {
    const ModelParams params = ModelParams::from_reduced_coupling(6, 1.0, 0.03);
    auto basis = std::make_shared<const ManyBodyBasis>(params.spec);
    const HamiltonianModel model(params, basis);
    const auto h = model.assemble(0.85);
    SolverOptions sparse;
    sparse.dense_threshold = 0;
    const EigenPairs it = lowest_eigenpairs(h.matrix, 4, sparse);
    const EigenPairs dense = full_eigenpairs(RealMatrix(h.matrix));
    const double err = (it.values - dense.values.head(4)).cwiseAbs().maxCoeff();
    return {make("Lanczos vs dense eigenvalues (N=6)", err, 1e-8, "dimension " + std::to_string(basis->dimension()))};
}

std::vector<Check> conservation_checks() {
    const ModelParams params = ModelParams::from_reduced_coupling(4, 1.0, 0.03);
    auto basis = std::make_shared<const ManyBodyBasis>(params.spec);
    const HamiltonianModel model(params, basis);
    const IsotropicFrame frame(model);
    const double omega = 0.8, tau = 50.0;
    const ComplexVector start = probe_vector(frame.size());
    EvolutionDiagnostics diag;
    const ComplexMatrix end = propagate(frame, start, LinearDrive{tau, omega, omega, 1.0, 1.0}, IntegratorConfig{}, &diag);
    const ComplexVector psi = end.col(0);
    const double e0 = frame_energy(frame, start, omega), e1 = frame_energy(frame, psi, omega);
    // norm is restored after integration; the drift before that is what counts
    return {make("norm drift over tau=50 (N=4)", diag.norm_drift, 1e-6, std::to_string(diag.steps) + " steps"),
            make("relative energy drift at constant rotation over tau=50 (N=4)", std::abs(e1 - e0) / std::abs(e0), 1e-8)};
}

std::vector<Check> run_all() {
    std::vector<Check> all;
    for (auto part : {interaction_checks, two_particle_checks, solver_checks, conservation_checks}) {
        auto checks = part();
        all.insert(all.end(), checks.begin(), checks.end());
    }
    auto b = basis_checks();
    all.insert(all.end(), b.begin(), b.end());
    return all;
}

}  // namespace rotgyro::oracle
