#pragma once

#include <iosfwd>
#include <limits>
#include <vector>

#include "rotgyro/common.hpp"
#include "rotgyro/eigensolver.hpp"
#include "rotgyro/frame.hpp"
#include "rotgyro/hamiltonian.hpp"
#include "rotgyro/states.hpp"

namespace rotgyro {

/// Linear change of Ω at constant rate. `gamma` is the (positive) rate |dΩ/dt|;
/// a hold (omega_start == omega_end) carries its length in `hold_time`.
struct RampSegment {
    double omega_start = 0.0;
    double omega_end = 0.0;
    double gamma = 0.0;
    double hold_time = 0.0;

    static RampSegment linear(double from, double to, double gamma);
    static RampSegment hold(double omega, double duration);

    double duration() const;
};

/// Piecewise-linear Ω(t).
class RampSchedule {
public:
    RampSchedule() = default;
    explicit RampSchedule(std::vector<RampSegment> segments);

    const std::vector<RampSegment>& segments() const noexcept { return segments_; }
    bool empty() const noexcept { return segments_.empty(); }
    double total_time() const;
    /// Laboratory time for a trap frequency in Hz (one time unit is 1/ω⊥).
    double seconds(double trap_frequency_hz) const;
    double omega_at(double t) const;
    double omega_start() const;
    double omega_end() const;

    /// Throws InvalidArgument on discontinuity, non-positive rates or durations.
    void validate() const;

private:
    std::vector<RampSegment> segments_;
};

enum class Stepper : std::uint8_t {
    rkf45,    // embedded Fehlberg 4(5), fifth-order solution propagated
    magnus2,  // exponential midpoint with step doubling; exactly unitary
    magnus4,  // commutator-free fourth-order Magnus (two exponentials), step doubling
};

struct IntegratorConfig {
    double rtol = 1e-9;
    double atol = 1e-12;
    double initial_step = 1e-2;
    double max_step = std::numeric_limits<double>::infinity();
    long max_steps = 50'000'000;
    double norm_tolerance = 1e-6;
    Stepper stepper = Stepper::rkf45;
    /// Record a trace point at least this far apart in time (0 disables tracing).
    double trace_interval = 0.0;
    /// Include instantaneous ground-state fidelity in trace points (one sparse
    /// eigen-solve per point).
    bool trace_ground_fidelity = false;

    void validate() const;
};

struct TracePoint {
    double time = 0.0;
    double omega = 0.0;
    double scale = 0.0;
    double norm = 0.0;
    double mean_l = 0.0;
    double ground_fidelity = std::numeric_limits<double>::quiet_NaN();
};

struct EvolutionDiagnostics {
    long steps = 0;
    long rejected = 0;
    double norm_drift = 0.0;
    bool renormalized = false;
    /// Weight of the input state captured by the frame (1 for a complete frame).
    double frame_coverage = 1.0;
    /// Relative drift of ⟨H⟩ for evolutions under a time-independent Hamiltonian; NaN otherwise.
    double energy_drift = std::numeric_limits<double>::quiet_NaN();
    std::vector<TracePoint> trace;

    void merge(const EvolutionDiagnostics& other);
};

struct EvolutionResult {
    ComplexVector amplitudes;  // frame amplitudes
    EvolutionDiagnostics diagnostics;
};

/// Ω and anisotropy scale varying linearly in time over [0, duration].
struct LinearDrive {
    double duration = 0.0;
    double omega_start = 0.0;
    double omega_end = 0.0;
    double scale_start = 1.0;
    double scale_end = 1.0;

    double omega(double t) const;
    double scale(double t) const;
    bool constant() const { return omega_start == omega_end && scale_start == scale_end; }
};

/// Integrates i dY/dt = H(t) Y column by column in the frame. Columns need not be
/// normalised; each keeps its own norm.
ComplexMatrix propagate(const IsotropicFrame& frame, const ComplexMatrix& initial, const LinearDrive& drive,
                        const IntegratorConfig& cfg, EvolutionDiagnostics* diagnostics = nullptr);

/// TDSE along a ramp schedule at full anisotropy, starting from frame amplitudes.
EvolutionResult integrate_tdse(const IsotropicFrame& frame, const ComplexVector& initial, const RampSchedule& schedule,
                               const IntegratorConfig& cfg);
/// Same, from and to Fock-space states.
ManyBodyState integrate_tdse(const IsotropicFrame& frame, const ManyBodyState& initial, const RampSchedule& schedule,
                             const IntegratorConfig& cfg, EvolutionDiagnostics* diagnostics = nullptr);

enum class SuddenMode : std::uint8_t { ramped, instantaneous };

struct SuddenShiftResult {
    EvolutionResult evolution;
    /// |⟨final|initial⟩|²
    double fidelity = 1.0;
    /// |ΔΩ| / sqrt(2γ/ΔL); the shift counts as sudden when this is small.
    double guard_ratio = 0.0;
    bool guard_violated = false;
};

/// Fast linear ramp of Ω at rate gamma_max (or no evolution in instantaneous mode).
SuddenShiftResult sudden_shift(const IsotropicFrame& frame, const ComplexVector& state, double omega_from,
                               double omega_to, double gamma_max, const IntegratorConfig& cfg,
                               SuddenMode mode = SuddenMode::ramped);

/// |ΔΩ| / sqrt(2γ/ΔL) with ΔL the standard deviation of L in `state`.
double sudden_guard_ratio(const IsotropicFrame& frame, const ComplexVector& state, double delta_omega,
                          double gamma_max);

/// Exact evolution for time tau under H(Ω_Δ) with phases exp(−i(E_i − E_0)τ).
ComplexVector free_evolution(const FrameSpectrum& spectrum, const ComplexVector& state, double tau);
/// Same without a stored spectrum: dense for small frames, Lanczos (with E_0 from
/// a sparse ground-state solve) for large ones.
ComplexVector free_evolution(const IsotropicFrame& frame, const ComplexVector& state, double omega_delta, double tau);

/// exp(−i t (H(Ω, s) − shift)) v in the frame by short-iterative Lanczos with
/// adaptive sub-steps; `tolerance` bounds the accumulated error relative to ‖v‖.
/// Large frames use this in place of dense eigendecompositions.
ComplexVector krylov_propagate(const IsotropicFrame& frame, const ComplexVector& v, double omega, double scale, double t,
                               double shift = 0.0, double tolerance = 1e-12);

/// ⟨ψ|H(Ω, s)|ψ⟩ / ⟨ψ|ψ⟩ in the frame.
double frame_energy(const IsotropicFrame& frame, const ComplexVector& state, double omega, double scale = 1.0);

struct SwitchOffOptions {
    /// Size of the low-lying manifold used for the leakage diagnostic.
    int manifold = 2;
    /// The anisotropy scale s runs from 1 to 0 over `intervals` equal pieces. On
    /// each piece the evolution is projected onto the span of the lowest
    /// `subspace_levels` eigenvectors of H(Ω_c, s) at both ends; the state is
    /// handed from piece to piece by orthogonal projection. 0 levels propagates
    /// in the full frame instead.
    int subspace_levels = 24;
    int intervals = 40;
    IntegratorConfig integrator{.rtol = 1e-8, .initial_step = 1.0, .stepper = Stepper::magnus4};
};

struct SwitchOffResult {
    EvolutionResult evolution;
    double duration = 0.0;
    /// Weight that left the `manifold` lowest eigenstates of H(Ω_c) at full anisotropy,
    /// measured against the same number of lowest isotropic states at the end.
    double leakage = 0.0;
    /// Dimension the evolution ran in.
    Eigen::Index subspace_dimension = 0;
    /// Weight lost by the projections (input and hand-overs), before renormalisation.
    double discarded_weight = 0.0;
};

/// Anisotropy ramped linearly from full strength to zero at fixed Ω = omega_c.
SwitchOffResult anisotropy_switch_off(const IsotropicFrame& frame, const ComplexVector& state, double omega_c,
                                      double duration, const SwitchOffOptions& options = {});

/// Applies the same switch-off to several states at once. Only an orthonormal basis
/// of their span is propagated, so the cost scales with the rank, not the count.
std::vector<ComplexVector> anisotropy_switch_off_many(const IsotropicFrame& frame, const std::vector<ComplexVector>& states,
                                                      double omega_c, double duration, const SwitchOffOptions& options = {},
                                                      EvolutionDiagnostics* diagnostics = nullptr,
                                                      Eigen::Index* subspace_dimension = nullptr,
                                                      double* discarded_weight = nullptr);

/// Ideal adiabatic switch-off: the weight on the n-th lowest eigenstate of
/// H(Ω_c) at full anisotropy is transferred to the n-th lowest isotropic
/// eigenstate at Ω_c, for the `levels` lowest states. Dynamical phases are
/// dropped; they do not affect populations of definite-L states. Weight beyond
/// `levels` is discarded and reported.
std::vector<ComplexVector> adiabatic_switch_off_limit(const IsotropicFrame& frame, const std::vector<ComplexVector>& states,
                                                      double omega_c, int levels = 24, double* discarded_weight = nullptr);

struct SwitchOffConvergence {
    double duration = 0.0;
    double change = 0.0;  // max block-population change between the last two durations
    bool converged = false;
    std::vector<double> durations;
    std::vector<double> changes;
};

/// Doubles the switch-off duration from `start` until the L-block populations of
/// every input state change by less than `threshold`, or `max_duration` is hit.
SwitchOffConvergence converge_switch_off_duration(const IsotropicFrame& frame, const std::vector<ComplexVector>& states,
                                                  double omega_c, double start, double max_duration,
                                                  double threshold = 1e-3, const SwitchOffOptions& options = {});

enum class GapSampling : std::uint8_t {
    subgrid,    // minimum over a sub-grid inside every segment
    endpoints,  // minimum of the two segment endpoints
};

struct RampPlanOptions {
    int subgrid_points = 10;
    GapSampling sampling = GapSampling::subgrid;
    double trap_frequency_hz = 2100.0;
    double lifetime_seconds = 16.0;
    SolverOptions solver{};
};

struct RampPlan {
    RampSchedule schedule;
    std::vector<double> segment_gaps;
    std::vector<double> sample_omegas;
    std::vector<double> sample_gaps;
    double total_time = 0.0;
    double seconds = 0.0;
    bool feasible = false;
};

/// Splits [omega_start, omega_c] into steps of delta_omega with rates
/// γ_i = ΔE_min,i² √p01 / N, ΔE_min,i the smallest ground-state gap in segment i.
RampPlan plan_adiabatic_ramp(const HamiltonianModel& model, double omega_start, double omega_c, double delta_omega,
                             double p01, const RampPlanOptions& options = {});

/// CSV: time, omega, scale, norm, mean_L, ground_fidelity.
void write_trajectory_csv(std::ostream& out, const std::vector<TracePoint>& trace);

}  // namespace rotgyro
