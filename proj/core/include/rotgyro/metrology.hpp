#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <vector>

#include "rotgyro/common.hpp"
#include "rotgyro/dynamics.hpp"
#include "rotgyro/frame.hpp"
#include "rotgyro/hamiltonian.hpp"
#include "rotgyro/states.hpp"

namespace rotgyro {

enum class StageOneMode : std::uint8_t {
    direct,  // ground state of H(Ω_c) by diagonalisation
    ramp,    // planned adiabatic ramp from omega_start, integrated
};

enum class SwitchOffMode : std::uint8_t {
    adiabatic_limit,  // populations carried over level by level
    dynamic,          // TDSE with the anisotropy ramped to zero
};

enum class MeasurementScheme : std::uint8_t {
    l_moment,  // total angular momentum; estimator ⟨L⟩
    binomial,  // ground state or not; estimator x̄ = 1 − p₀
};

struct ProtocolConfig {
    /// NaN: locate Ω_c inside [critical_lo, critical_hi] first.
    double omega_c = std::numeric_limits<double>::quiet_NaN();
    double critical_lo = 0.78;
    double critical_hi = 1.0;
    double omega_start = 0.4;
    double tau = 10.0;
    std::vector<double> omega_ext;
    double gamma_max = 0.5e-3;
    SuddenMode sudden = SuddenMode::ramped;
    StageOneMode stage_one = StageOneMode::direct;
    /// Ramp planning for StageOneMode::ramp.
    double ramp_delta_omega = 0.01;
    double p01 = 0.01;
    SwitchOffMode switch_off = SwitchOffMode::adiabatic_limit;
    /// Dynamic switch-off duration; 0 picks it by doubling until converged.
    double switch_off_duration = 0.0;
    double switch_off_start = 16000.0;
    double switch_off_max = 2.048e6;
    double switch_off_threshold = 1e-3;
    SwitchOffOptions switch_off_options{};
    /// Isotropic states kept: within `frame_window` of the isotropic ground energy
    /// somewhere in [Ω_c − span − frame_margin, Ω_c + span + frame_margin], span = max |Ω_ext|
    /// (or down to omega_start for ramped preparation). Infinity keeps everything.
    double frame_window = 2.45;
    double frame_margin = 0.01;
    IntegratorConfig integrator{};

    void validate() const;
};

/// Projective read-out over isotropic eigenstates at Ω_c. `labels` are the L values
/// of the frame blocks; the projector for label L sums over that block.
struct MeasurementModel {
    std::vector<int> labels;
    Eigen::Index ground_index = 0;  // frame index of the isotropic ground state at Ω_c

    MeasurementModel(const IsotropicFrame& frame, double omega_c);
    std::vector<double> l_distribution(const IsotropicFrame& frame, const ComplexVector& state) const;
    double ground_probability(const ComplexVector& state) const;
};

struct ProtocolPoint {
    double omega_ext = 0.0;
    double omega_delta = 0.0;
    double shift_fidelity = 1.0;
    double decouple_fidelity = 1.0;
    double guard_ratio = 0.0;
    bool guard_violated = false;
    /// Relative ⟨H(Ω_Δ)⟩ change across the free evolution.
    double energy_drift = 0.0;
    ComplexVector decoupled;  // input to the switch-off
    ComplexVector output;     // after the switch-off
    std::vector<double> p_l;  // aligned with MeasurementModel::labels
    double p0 = 0.0;
};

struct ProtocolResult {
    double omega_c = 0.0;
    double tau = 0.0;
    int particles = 0;
    Eigen::Index frame_size = 0;
    std::vector<int> labels;
    ComplexVector initial;
    AngularMomentumMoments initial_moments;
    /// |⟨frame ground state|full-basis ground state⟩|² at Ω_c (direct mode only; NaN otherwise).
    double frame_ground_overlap = std::numeric_limits<double>::quiet_NaN();
    double stage_one_time = 0.0;  // ramp mode: dimensionless preparation time
    double switch_off_duration = 0.0;
    bool switch_off_converged = true;
    double switch_off_discarded = 0.0;
    EvolutionDiagnostics diagnostics;
    std::vector<ProtocolPoint> points;
};

/// Stage-by-stage driver; stage I and the frame are computed once.
class Protocol {
public:
    Protocol(const HamiltonianModel& model, ProtocolConfig config);

    const ProtocolConfig& config() const noexcept { return config_; }
    double omega_c() const noexcept { return omega_c_; }
    const IsotropicFrame& frame() const noexcept { return *frame_; }
    const ComplexVector& initial() const noexcept { return initial_; }
    const MeasurementModel& measurement() const noexcept { return *measurement_; }

    /// Stages II, III and the return to Ω_c for one external rotation.
    ProtocolPoint prepare(double omega_ext) const;
    /// State entering the switch-off as a function of Ω_ext (for the QFI).
    ComplexVector decoupled_state(double omega_ext) const { return prepare(omega_ext).decoupled; }
    /// Stage IV applied to many states together.
    std::vector<ComplexVector> switch_off(const std::vector<ComplexVector>& states, double* discarded = nullptr) const;

    /// Full run over the configured grid.
    ProtocolResult run() const;

private:
    const HamiltonianModel& model_;
    ProtocolConfig config_;
    double omega_c_ = 0.0;
    std::unique_ptr<IsotropicFrame> frame_;
    std::unique_ptr<MeasurementModel> measurement_;
    ComplexVector initial_;
    double frame_ground_overlap_ = std::numeric_limits<double>::quiet_NaN();
    double stage_one_time_ = 0.0;
    EvolutionDiagnostics stage_one_diag_;
    mutable double switch_off_duration_ = 0.0;
    mutable bool switch_off_converged_ = true;
};

struct QfiEstimate {
    double value = 0.0;       // at δ/2
    double coarse = 0.0;      // at δ
    double relative_change = 0.0;
};

/// F_Q = 4[⟨Ψ′|Ψ′⟩ − |⟨Ψ′|Ψ⟩|²] with Ψ′ from central differences. Neighbouring
/// states are phase-aligned so that ⟨Ψ(ω)|Ψ(ω ± δ)⟩ is real and non-negative.
/// Throws NumericalError when the δ and δ/2 results differ by more than 1%.
QfiEstimate qfi_pure(const std::function<ComplexVector(double)>& family, double omega, double delta);

/// 4τ²⟨(ΔL)²⟩
double qfi_quadratic_approx(const AngularMomentumMoments& moments, double tau);
double qfi_quadratic_approx(const ManyBodyState& state, double tau);

struct QfiComparison {
    double tau = 0.0;
    double pure = 0.0;
    double quadratic = 0.0;
    /// |pure − quadratic| / quadratic ≤ 10%: the small-τ form is trustworthy.
    bool quadratic_valid = false;
};

QfiComparison compare_qfi(const QfiEstimate& pure, const AngularMomentumMoments& moments, double tau);

/// Outcome values and their probabilities for one grid point.
struct OutcomeDistribution {
    std::vector<double> outcomes;
    std::vector<double> probabilities;

    double mean() const;
    double variance() const;
};

std::vector<OutcomeDistribution> distributions(const ProtocolResult& result, MeasurementScheme scheme);

struct PrecisionOptions {
    /// Derivatives below this fraction of the largest one on the grid count as zero.
    /// Interior local extrema of the mean are flagged as divergent as well.
    double divergence_floor = 1e-6;
    /// Changes of the mean across one grid step below this fraction of the largest
    /// |outcome| are rounding noise, and the derivative counts as zero.
    double mean_resolution = 1e-10;
    /// Relative disagreement with the Richardson-extrapolated derivative that marks it unreliable.
    double richardson_tolerance = 0.1;
};

struct PrecisionCurve {
    std::vector<double> omega_ext;
    std::vector<double> mean;
    std::vector<double> variance;
    std::vector<double> derivative;
    std::vector<double> delta_omega;  // per single repetition (n = 1)
    std::vector<double> scaled;       // τ·ΔΩ
    std::vector<bool> divergent;
    std::vector<bool> derivative_unreliable;
    double tau = 0.0;
    double shot_noise = 0.0;  // 1/√N
    int particles = 0;
    /// √n and 1/τ are factored out of `scaled`; recorded, not applied.
    bool repetitions_factored_out = true;
};

/// ΔΩ = √Var / |d mean / dΩ_ext| with central differences (one-sided at the edges).
PrecisionCurve estimate_precision(const std::vector<double>& omega_ext, const std::vector<OutcomeDistribution>& dists,
                                  double tau, int particles, const PrecisionOptions& options = {});
PrecisionCurve estimate_precision(const ProtocolResult& result, MeasurementScheme scheme,
                                  const PrecisionOptions& options = {});

double shot_noise_limit(int particles);

/// CSV: omega_ext, estimator_mean, estimator_derivative, delta_omega_scaled, shot_noise, divergence_flag.
void write_precision_csv(std::ostream& out, const PrecisionCurve& curve);

}  // namespace rotgyro
