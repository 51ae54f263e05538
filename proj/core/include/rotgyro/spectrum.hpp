#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "rotgyro/cache.hpp"
#include "rotgyro/eigensolver.hpp"
#include "rotgyro/hamiltonian.hpp"
#include "rotgyro/states.hpp"

namespace rotgyro {

/// Lowest eigenpairs of H(Ω) with the anisotropy fully on.
struct EigenSolution {
    double omega = 0.0;
    RealVector values;
    RealMatrix vectors;
    double max_residual = 0.0;

    int levels() const { return static_cast<int>(values.size()); }
    double gap() const { return values.size() > 1 ? values(1) - values(0) : 0.0; }
};

std::vector<std::byte> serialize(const EigenSolution& solution);
std::optional<EigenSolution> deserialize_eigen_solution(std::span<const std::byte> payload);

/// Cache key for (model, Ω, levels, solver tolerance).
std::uint64_t eigen_cache_key(const HamiltonianModel& model, double omega, int levels, const SolverOptions& solver);

struct SpectrumOptions {
    int levels = 8;
    SolverOptions solver;
    /// Start each Lanczos run from the previous grid point's vectors.
    bool seed = true;
    const Cache* cache = nullptr;
};

EigenSolution solve_at(const HamiltonianModel& model, double omega, int levels, const SolverOptions& solver = {},
                       const RealMatrix* seed = nullptr, const Cache* cache = nullptr);

/// Sequential sweep over a grid of rotation frequencies.
std::vector<EigenSolution> sweep(const HamiltonianModel& model, std::span<const double> omegas,
                                 const SpectrumOptions& options = {});

std::vector<double> linspace(double first, double last, int count);

ManyBodyState ground_state(const HamiltonianModel& model, const EigenSolution& solution);

/// Leading odd-m natural-orbital population minus the leading even-m one.
/// Negative below the critical frequency, positive above.
double population_imbalance(const ManyBodyState& state);

struct CriticalOptions {
    /// Bisection stops once the bracket is narrower than this.
    double tolerance = 1e-9;
    int max_iterations = 80;
    /// Grid used to validate the bracket and seed the minimum-gap search.
    int profile_points = 17;
    /// Golden-section tolerance for the minimum-gap estimate.
    double gap_tolerance = 1e-5;
    SolverOptions solver;
};

struct CriticalPoint {
    double omega_c = 0.0;
    double imbalance = 0.0;  // population imbalance at omega_c
    int iterations = 0;
    double bracket_width = 0.0;
    double min_gap_omega = 0.0;
    double min_gap = 0.0;
    EigenSolution solution;  // two lowest levels at omega_c
};

/// Locates Ω_c where the two leading natural-orbital populations coincide.
/// Throws NumericalError (stage "critical") when the imbalance does not change
/// sign in [lo, hi], and InvalidArgument when it changes sign more than once
/// on the validation grid.
CriticalPoint find_critical_frequency(const HamiltonianModel& model, double lo, double hi,
                                      const CriticalOptions& options = {});

/// CSV with columns omega, E_0 … E_{levels−1}.
void write_spectrum_csv(std::ostream& out, std::span<const EigenSolution> solutions, int levels);

}  // namespace rotgyro
