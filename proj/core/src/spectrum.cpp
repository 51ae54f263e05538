#include "rotgyro/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

#include "rotgyro/csv.hpp"
#include "rotgyro/digest.hpp"

namespace rotgyro {

namespace {

constexpr std::uint32_t kSolutionMagic = 0x52474553;  // "RGES"

}  // namespace

std::vector<std::byte> serialize(const EigenSolution& s) {
    ByteWriter w;
    w.put(kSolutionMagic);
    w.put(s.omega);
    w.put(s.max_residual);
    w.put<std::int64_t>(s.values.size());
    w.put<std::int64_t>(s.vectors.rows());
    w.put<std::int64_t>(s.vectors.cols());
    w.put_doubles(s.values.data(), static_cast<std::size_t>(s.values.size()));
    w.put_doubles(s.vectors.data(), static_cast<std::size_t>(s.vectors.size()));
    return w.take();
}

std::optional<EigenSolution> deserialize_eigen_solution(std::span<const std::byte> payload) {
    ByteReader r(payload);
    std::uint32_t magic = 0;
    std::int64_t nv = 0, rows = 0, cols = 0;
    EigenSolution s;
    if (!r.get(magic) || magic != kSolutionMagic) return std::nullopt;
    if (!r.get(s.omega) || !r.get(s.max_residual) || !r.get(nv) || !r.get(rows) || !r.get(cols)) return std::nullopt;
    if (nv < 0 || rows < 0 || cols != nv || rows > (std::int64_t{1} << 26)) return std::nullopt;
    s.values.resize(nv);
    s.vectors.resize(rows, cols);
    if (!r.get_doubles(s.values.data(), static_cast<std::size_t>(nv))) return std::nullopt;
    if (!r.get_doubles(s.vectors.data(), static_cast<std::size_t>(rows * cols))) return std::nullopt;
    if (!r.exhausted()) return std::nullopt;
    return s;
}

std::uint64_t eigen_cache_key(const HamiltonianModel& model, double omega, int levels, const SolverOptions& solver) {
    return Digest{}
        .add(std::string_view("eigen-v1"))
        .add(model.digest())
        .add(omega)
        .add(levels)
        .add(solver.tol)
        .value();
}

EigenSolution solve_at(const HamiltonianModel& model, double omega, int levels, const SolverOptions& solver,
                       const RealMatrix* seed, const Cache* cache) {
    if (levels < 1) throw InvalidArgument("spectrum: need at least one level");
    levels = std::min<int>(levels, static_cast<int>(model.dimension()));
    std::uint64_t key = 0;
    if (cache) {
        key = eigen_cache_key(model, omega, levels, solver);
        if (auto payload = cache->get(key)) {
            if (auto hit = deserialize_eigen_solution(*payload); hit && hit->vectors.rows() == model.dimension()) {
                return *std::move(hit);
            }
            spdlog::warn("spectrum: discarding unreadable cache entry at omega={}", omega);
        }
    }
    const SparseHamiltonian h = model.assemble(omega);
    EigenPairs pairs = lowest_eigenpairs(h.matrix, levels, solver, seed);
    EigenSolution s{omega, std::move(pairs.values), std::move(pairs.vectors), pairs.max_residual};
    if (cache) cache->put(key, serialize(s));
    return s;
}

std::vector<EigenSolution> sweep(const HamiltonianModel& model, std::span<const double> omegas,
                                 const SpectrumOptions& options) {
    std::vector<EigenSolution> out;
    out.reserve(omegas.size());
    for (double omega : omegas) {
        const RealMatrix* seed = (options.seed && !out.empty()) ? &out.back().vectors : nullptr;
        out.push_back(solve_at(model, omega, options.levels, options.solver, seed, options.cache));
    }
    return out;
}

std::vector<double> linspace(double first, double last, int count) {
    if (count < 1) throw InvalidArgument("linspace: count must be positive");
    if (count == 1) return {first};
    std::vector<double> out(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = first + (last - first) * i / (count - 1);
    out.back() = last;
    return out;
}

ManyBodyState ground_state(const HamiltonianModel& model, const EigenSolution& solution) {
    return {model.basis_ptr(), RealVector(solution.vectors.col(0))};
}

double population_imbalance(const ManyBodyState& state) {
    const NaturalOrbitals no = spdm(state);
    return no.leading_population(-1) - no.leading_population(+1);
}

namespace {

struct Probe {
    double omega;
    EigenSolution solution;
    double imbalance;
};

}  // namespace

CriticalPoint find_critical_frequency(const HamiltonianModel& model, double lo, double hi,
                                      const CriticalOptions& options) {
    if (!(lo < hi)) throw InvalidArgument("critical: bracket must satisfy lo < hi");
    if (options.profile_points < 2) throw InvalidArgument("critical: profile needs at least two points");

    const RealMatrix* seed = nullptr;
    auto probe = [&](double omega) {
        EigenSolution s = solve_at(model, omega, 2, options.solver, seed);
        const double f = population_imbalance(ground_state(model, s));
        return Probe{omega, std::move(s), f};
    };

    std::vector<Probe> profile;
    for (double omega : linspace(lo, hi, options.profile_points)) {
        profile.push_back(probe(omega));
        seed = &profile.back().solution.vectors;
    }
    seed = nullptr;

    int sign_changes = 0;
    std::size_t first_change = 0;
    for (std::size_t i = 1; i < profile.size(); ++i) {
        if ((profile[i - 1].imbalance < 0.0) != (profile[i].imbalance < 0.0)) {
            if (sign_changes++ == 0) first_change = i;
        }
    }
    if (sign_changes == 0) {
        throw NumericalError("no natural-orbital population crossing in [" + std::to_string(lo) + ", " +
                                 std::to_string(hi) + "]",
                             "critical");
    }
    if (sign_changes > 1) {
        throw InvalidArgument("critical: bracket contains " + std::to_string(sign_changes) +
                              " population crossings; narrow it");
    }

    CriticalPoint out;
    Probe a = profile[first_change - 1];
    Probe b = profile[first_change];
    while (b.omega - a.omega > options.tolerance && out.iterations < options.max_iterations) {
        seed = &a.solution.vectors;
        Probe mid = probe(0.5 * (a.omega + b.omega));
        ++out.iterations;
        ((mid.imbalance < 0.0) == (a.imbalance < 0.0) ? a : b) = std::move(mid);
    }
    seed = nullptr;
    Probe best = probe(0.5 * (a.omega + b.omega));
    out.omega_c = best.omega;
    out.imbalance = best.imbalance;
    out.bracket_width = b.omega - a.omega;
    out.solution = std::move(best.solution);

    // secondary estimate: golden-section refinement of the sampled gap minimum
    std::size_t imin = 0;
    for (std::size_t i = 1; i < profile.size(); ++i) {
        if (profile[i].solution.gap() < profile[imin].solution.gap()) imin = i;
    }
    double x0 = profile[imin > 0 ? imin - 1 : 0].omega;
    double x3 = profile[std::min(imin + 1, profile.size() - 1)].omega;
    auto gap_at = [&](double omega) { return solve_at(model, omega, 2, options.solver).gap(); };
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = x3 - phi * (x3 - x0), x2 = x0 + phi * (x3 - x0);
    double g1 = gap_at(x1), g2 = gap_at(x2);
    while (x3 - x0 > options.gap_tolerance) {
        if (g1 < g2) {
            x3 = x2;
            x2 = x1;
            g2 = g1;
            x1 = x3 - phi * (x3 - x0);
            g1 = gap_at(x1);
        } else {
            x0 = x1;
            x1 = x2;
            g1 = g2;
            x2 = x0 + phi * (x3 - x0);
            g2 = gap_at(x2);
        }
    }
    out.min_gap_omega = g1 < g2 ? x1 : x2;
    out.min_gap = std::min(g1, g2);
    if (profile[imin].solution.gap() < out.min_gap) {
        out.min_gap_omega = profile[imin].omega;
        out.min_gap = profile[imin].solution.gap();
    }
    spdlog::debug("critical: omega_c={:.9f} after {} bisections, min gap {:.3e} at {:.6f}", out.omega_c,
                  out.iterations, out.min_gap, out.min_gap_omega);
    return out;
}

void write_spectrum_csv(std::ostream& out, std::span<const EigenSolution> solutions, int levels) {
    std::vector<std::string> header{"omega"};
    for (int i = 0; i < levels; ++i) header.push_back("E_" + std::to_string(i));
    CsvWriter csv(out, header);
    for (const auto& s : solutions) {
        if (s.levels() < levels) throw InvalidArgument("spectrum csv: solution has fewer levels than requested");
        std::vector<double> row{s.omega};
        for (int i = 0; i < levels; ++i) row.push_back(s.values(i));
        csv.row(row);
    }
}

}  // namespace rotgyro
