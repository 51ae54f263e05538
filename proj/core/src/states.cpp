#include "rotgyro/states.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include <Eigen/Eigenvalues>

namespace rotgyro {

ManyBodyState::ManyBodyState(std::shared_ptr<const ManyBodyBasis> b, ComplexVector amps)
    : basis(std::move(b)), amplitudes(std::move(amps)) {
    if (!basis) throw InvalidArgument("state: null basis");
    if (amplitudes.size() != static_cast<Eigen::Index>(basis->dimension())) {
        throw InvalidArgument("state: amplitude count does not match basis dimension");
    }
}

ManyBodyState::ManyBodyState(std::shared_ptr<const ManyBodyBasis> b, const RealVector& amps)
    : ManyBodyState(std::move(b), ComplexVector(amps.cast<Complex>())) {}

void ManyBodyState::require_normalized(double tol) const {
    const double n = norm();
    if (!(std::abs(n - 1.0) <= tol)) {
        throw InvalidArgument("state is not normalised (norm " + std::to_string(n) + ")");
    }
}

ManyBodyState ManyBodyState::basis_state(std::shared_ptr<const ManyBodyBasis> b, std::size_t index) {
    const auto dim = static_cast<Eigen::Index>(b->dimension());
    ComplexVector v = ComplexVector::Zero(dim);
    v(static_cast<Eigen::Index>(index)) = 1.0;
    return {std::move(b), std::move(v)};
}

Complex overlap(const ManyBodyState& a, const ManyBodyState& b) {
    if (a.basis != b.basis && !(a.basis->spec() == b.basis->spec())) {
        throw InvalidArgument("overlap: states live on different bases");
    }
    return a.amplitudes.dot(b.amplitudes);  // conjugates the first argument
}

double fidelity(const ManyBodyState& a, const ManyBodyState& b) { return std::norm(overlap(a, b)); }

double NaturalOrbitals::leading_population(int parity) const {
    double best = 0.0;
    for (std::size_t i = 0; i < m_parity.size(); ++i) {
        if (m_parity[i] == parity) best = std::max(best, populations(static_cast<Eigen::Index>(i)));
    }
    return best;
}

namespace {

bool even(int m) { return (m % 2) == 0; }

}  // namespace

NaturalOrbitals spdm(const ManyBodyState& state) {
    const ManyBodyBasis& basis = *state.basis;
    const auto& orbs = basis.orbitals();
    const std::size_t k = orbs.size();
    const ComplexVector& c = state.amplitudes;

    ComplexMatrix rho = ComplexMatrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    Occupation occ(k);
    for (std::size_t i = 0; i < basis.dimension(); ++i) {
        const Complex ci = c(static_cast<Eigen::Index>(i));
        if (ci == Complex(0.0)) continue;
        const auto src = basis.occupation(i);
        std::copy(src.begin(), src.end(), occ.begin());
        for (std::size_t l = 0; l < k; ++l) {
            if (occ[l] == 0) continue;
            const auto li = static_cast<Eigen::Index>(l);
            rho(li, li) += std::norm(ci) * static_cast<double>(occ[l]);
            const double out = std::sqrt(static_cast<double>(occ[l]));
            --occ[l];
            for (std::size_t kk = 0; kk < k; ++kk) {
                if (kk == l) continue;
                ++occ[kk];
                if (const auto j = basis.lookup(occ)) {
                    // <j| a†_k a_l |i>
                    const double amp = out * std::sqrt(static_cast<double>(occ[kk]));
                    rho(li, static_cast<Eigen::Index>(kk)) += std::conj(c(static_cast<Eigen::Index>(*j))) * ci * amp;
                }
                --occ[kk];
            }
            ++occ[l];
        }
    }
    rho = 0.5 * (rho + rho.adjoint()).eval();

    // split by m parity when the off-parity block vanishes
    std::vector<Eigen::Index> even_idx, odd_idx;
    for (std::size_t a = 0; a < k; ++a) (even(orbs[a].m) ? even_idx : odd_idx).push_back(static_cast<Eigen::Index>(a));
    double cross = 0.0;
    for (auto a : even_idx) {
        for (auto b : odd_idx) cross = std::max(cross, std::abs(rho(a, b)));
    }

    struct Candidate {
        double population;
        ComplexVector vector;
        int parity;
    };
    std::vector<Candidate> cands;
    auto diagonalise = [&](const std::vector<Eigen::Index>& idx, int parity) {
        if (idx.empty()) return;
        const auto n = static_cast<Eigen::Index>(idx.size());
        ComplexMatrix sub(n, n);
        for (Eigen::Index a = 0; a < n; ++a) {
            for (Eigen::Index b = 0; b < n; ++b) sub(a, b) = rho(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
        }
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(sub);
        for (Eigen::Index e = 0; e < n; ++e) {
            ComplexVector full = ComplexVector::Zero(static_cast<Eigen::Index>(k));
            for (Eigen::Index a = 0; a < n; ++a) full(idx[static_cast<std::size_t>(a)]) = es.eigenvectors()(a, e);
            cands.push_back({es.eigenvalues()(e), std::move(full), parity});
        }
    };
    const double scale = std::max(1.0, rho.trace().real());
    if (cross <= 1e-12 * scale) {
        diagonalise(even_idx, +1);
        diagonalise(odd_idx, -1);
    } else {
        std::vector<Eigen::Index> all(k);
        std::iota(all.begin(), all.end(), 0);
        diagonalise(all, 0);
    }

    const auto origin = basis.orbital_index(Orbital{0, 0});
    auto origin_weight = [&](const Candidate& cd) {
        return origin ? std::norm(cd.vector(static_cast<Eigen::Index>(*origin))) : 0.0;
    };
    const double tie = 1e-9 * scale;
    std::stable_sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
        if (std::abs(a.population - b.population) > tie) return a.population > b.population;
        return origin_weight(a) > origin_weight(b);
    });

    NaturalOrbitals out;
    out.density = rho;
    out.populations.resize(static_cast<Eigen::Index>(k));
    out.orbitals.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    out.m_parity.resize(k);
    for (std::size_t i = 0; i < cands.size(); ++i) {
        ComplexVector v = cands[i].vector;
        // phase convention: largest component real and positive
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (std::abs(v(arg)) > 0.0) v *= std::conj(v(arg)) / std::abs(v(arg));
        out.populations(static_cast<Eigen::Index>(i)) = cands[i].population;
        out.orbitals.col(static_cast<Eigen::Index>(i)) = v;
        out.m_parity[i] = cands[i].parity;
    }
    return out;
}

namespace {

using SparseFock = std::unordered_map<std::string, Complex>;

// b = Σ_k conj(u_k) a_k applied to a sparse Fock expansion.
SparseFock annihilate(const SparseFock& in, const ComplexVector& mode) {
    SparseFock out;
    out.reserve(in.size() * 2);
    for (const auto& [key, amp] : in) {
        std::string next = key;
        for (std::size_t kk = 0; kk < key.size(); ++kk) {
            const auto n = static_cast<unsigned char>(key[kk]);
            if (n == 0) continue;
            const Complex u = mode(static_cast<Eigen::Index>(kk));
            if (u == Complex(0.0)) continue;
            next[kk] = static_cast<char>(n - 1);
            out[next] += std::conj(u) * std::sqrt(static_cast<double>(n)) * amp;
            next[kk] = static_cast<char>(n);
        }
    }
    return out;
}

double log_factorial(int n) { return std::lgamma(n + 1.0); }

}  // namespace

TwoModeDecomposition two_mode_project(const ManyBodyState& state, const ComplexVector& mode1,
                                      const ComplexVector& mode2) {
    const ManyBodyBasis& basis = *state.basis;
    const int n_particles = basis.spec().n_particles;
    if (n_particles % 2 != 0) throw InvalidArgument("two_mode_project: N must be even");
    const auto k = static_cast<Eigen::Index>(basis.n_orbitals());
    if (mode1.size() != k || mode2.size() != k) throw InvalidArgument("two_mode_project: mode size mismatch");
    const Complex cross = mode1.dot(mode2);
    if (std::abs(cross) > 1e-8) throw InvalidArgument("two_mode_project: modes are not orthogonal");

    SparseFock psi;
    psi.reserve(basis.dimension());
    for (std::size_t i = 0; i < basis.dimension(); ++i) {
        const Complex a = state.amplitudes(static_cast<Eigen::Index>(i));
        if (a == Complex(0.0)) continue;
        const auto occ = basis.occupation(i);
        psi.emplace(std::string(occ.begin(), occ.end()), a);
    }
    const std::string vacuum(static_cast<std::size_t>(k), '\0');

    TwoModeDecomposition out;
    out.coefficients.assign(static_cast<std::size_t>(n_particles / 2 + 1), Complex(0.0));
    out.probabilities.assign(out.coefficients.size(), 0.0);

    SparseFock second = psi;  // b₂^j Ψ
    for (int j = 0; j <= n_particles; ++j) {
        if (j > 0) second = annihilate(second, mode2);
        SparseFock both = second;
        for (int r = 0; r < n_particles - j; ++r) both = annihilate(both, mode1);
        const auto it = both.find(vacuum);
        Complex value = it == both.end() ? Complex(0.0) : it->second;
        value *= std::exp(-0.5 * (log_factorial(n_particles - j) + log_factorial(j)));
        if (j % 2 == 0) {
            out.coefficients[static_cast<std::size_t>(j / 2)] = value;
            out.probabilities[static_cast<std::size_t>(j / 2)] = std::norm(value);
        } else {
            out.odd_sector_weight += std::norm(value);
        }
    }
    out.fidelity = std::accumulate(out.probabilities.begin(), out.probabilities.end(), 0.0);
    return out;
}

TwoModeDecomposition two_mode_project(const ManyBodyState& state, const NaturalOrbitals& modes) {
    if (modes.orbitals.cols() < 2) throw InvalidArgument("two_mode_project: need two natural orbitals");
    return two_mode_project(state, modes.orbitals.col(0), modes.orbitals.col(1));
}

double mode_entropy(const TwoModeDecomposition& decomp) {
    const double total = std::accumulate(decomp.probabilities.begin(), decomp.probabilities.end(), 0.0);
    if (!(total > 0.0)) throw InvalidArgument("mode_entropy: projection has zero weight");
    double s = 0.0;
    for (double p : decomp.probabilities) {
        const double q = p / total;
        if (q > 0.0) s -= q * std::log2(q);
    }
    return s;
}

std::vector<std::pair<int, double>> block_weights(const ManyBodyState& state) {
    std::vector<std::pair<int, double>> out;
    for (const auto& b : state.basis->blocks()) {
        const double w = state.amplitudes.segment(static_cast<Eigen::Index>(b.begin), static_cast<Eigen::Index>(b.size())).squaredNorm();
        out.emplace_back(b.l, w);
    }
    return out;
}

AngularMomentumMoments angular_momentum_moments(const ManyBodyState& state) {
    AngularMomentumMoments m;
    double total = 0.0;
    for (const auto& [l, w] : block_weights(state)) {
        total += w;
        m.mean += w * l;
        m.mean_square += w * static_cast<double>(l) * l;
    }
    if (total > 0.0) {
        m.mean /= total;
        m.mean_square /= total;
    }
    m.stddev = std::sqrt(std::max(0.0, m.mean_square - m.mean * m.mean));
    return m;
}

}  // namespace rotgyro
