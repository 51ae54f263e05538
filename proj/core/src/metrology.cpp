#include "rotgyro/metrology.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <spdlog/spdlog.h>

#include "rotgyro/csv.hpp"
#include "rotgyro/spectrum.hpp"

namespace rotgyro {

void ProtocolConfig::validate() const {
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw InvalidArgument("protocol: tau must be finite and >= 0");
    if (!(gamma_max > 0.0)) throw InvalidArgument("protocol: gamma_max must be positive");
    if (std::isnan(omega_c) && !(critical_lo < critical_hi)) throw InvalidArgument("protocol: empty critical bracket");
    if (!std::isnan(omega_c) && !(omega_c > 0.0 && omega_c < 1.0))
        throw InvalidArgument("protocol: omega_c must lie in (0, 1)");
    for (double w : omega_ext)
        if (!std::isfinite(w)) throw InvalidArgument("protocol: non-finite omega_ext");
    if (!(frame_window > 0.0)) throw InvalidArgument("protocol: frame_window must be positive");
    if (!(frame_margin >= 0.0)) throw InvalidArgument("protocol: frame_margin must be >= 0");
    if (switch_off_duration < 0.0) throw InvalidArgument("protocol: switch_off_duration must be >= 0");
    if (!(switch_off_start > 0.0) || !(switch_off_max >= switch_off_start))
        throw InvalidArgument("protocol: bad switch-off duration search range");
    if (stage_one == StageOneMode::ramp && !(ramp_delta_omega > 0.0 && p01 > 0.0 && p01 < 1.0))
        throw InvalidArgument("protocol: bad ramp planning parameters");
    integrator.validate();
}

MeasurementModel::MeasurementModel(const IsotropicFrame& frame, double omega_c)
    : ground_index(frame.isotropic_ground(omega_c)) {
    for (const auto& b : frame.blocks()) labels.push_back(b.l);
}

std::vector<double> MeasurementModel::l_distribution(const IsotropicFrame& frame, const ComplexVector& state) const {
    std::vector<double> p;
    p.reserve(labels.size());
    for (const auto& [l, w] : frame.block_weights(state)) p.push_back(w);
    return p;
}

double MeasurementModel::ground_probability(const ComplexVector& state) const { return std::norm(state(ground_index)); }

Protocol::Protocol(const HamiltonianModel& model, ProtocolConfig config) : model_(model), config_(std::move(config)) {
    config_.validate();
    omega_c_ = config_.omega_c;
    if (std::isnan(omega_c_)) {
        omega_c_ = find_critical_frequency(model_, config_.critical_lo, config_.critical_hi).omega_c;
        spdlog::info("protocol: located omega_c = {:.9f}", omega_c_);
    }
    double span = 0.0;
    for (double w : config_.omega_ext) span = std::max(span, std::abs(w));
    double lo = omega_c_ - span - config_.frame_margin;
    const double hi = omega_c_ + span + config_.frame_margin;
    if (config_.stage_one == StageOneMode::ramp) lo = std::min(lo, config_.omega_start);
    try {
        frame_ = std::make_unique<IsotropicFrame>(model_, FrameOptions{config_.frame_window, lo, hi, 0});
    } catch (const NumericalError& e) {
        throw NumericalError(e.what(), "frame");
    }
    measurement_ = std::make_unique<MeasurementModel>(*frame_, omega_c_);

    if (config_.stage_one == StageOneMode::direct) {
        const auto gs = lowest_eigenpairs(frame_->hamiltonian(omega_c_, 1.0), 1);
        initial_ = gs.vectors.col(0).cast<Complex>();
        if (!frame_->complete()) {
            const auto full = solve_at(model_, omega_c_, 1);
            const ComplexVector projected = frame_->to_frame(ComplexVector(full.vectors.col(0).cast<Complex>()));
            frame_ground_overlap_ = std::norm(initial_.dot(projected));
        } else {
            frame_ground_overlap_ = 1.0;
        }
    } else {
        RampPlan plan;
        try {
            plan = plan_adiabatic_ramp(model_, config_.omega_start, omega_c_, config_.ramp_delta_omega, config_.p01);
        } catch (const NumericalError& e) {
            throw NumericalError(e.what(), "stage-I");
        }
        const auto gs0 = lowest_eigenpairs(frame_->hamiltonian(config_.omega_start, 1.0), 1);
        const ComplexVector start = gs0.vectors.col(0).cast<Complex>();
        try {
            auto r = integrate_tdse(*frame_, start, plan.schedule, config_.integrator);
            initial_ = r.amplitudes;
            stage_one_diag_ = std::move(r.diagnostics);
        } catch (const NumericalError& e) {
            throw NumericalError(e.what(), "stage-I");
        }
        stage_one_time_ = plan.total_time;
    }
}

ProtocolPoint Protocol::prepare(double omega_ext) const {
    ProtocolPoint p;
    p.omega_ext = omega_ext;
    p.omega_delta = omega_c_ - omega_ext;
    try {
        const auto shift = sudden_shift(*frame_, initial_, omega_c_, p.omega_delta, config_.gamma_max, config_.integrator,
                                        config_.sudden);
        p.shift_fidelity = shift.fidelity;
        p.guard_ratio = shift.guard_ratio;
        p.guard_violated = shift.guard_violated;

        ComplexVector x = shift.evolution.amplitudes;
        if (config_.tau > 0.0) {
            const double e0 = frame_energy(*frame_, x, p.omega_delta);
            x = free_evolution(*frame_, x, p.omega_delta, config_.tau);
            const double e1 = frame_energy(*frame_, x, p.omega_delta);
            p.energy_drift = std::abs(e1 - e0) / std::max(std::abs(e0), 1e-300);
        }
        const auto back = sudden_shift(*frame_, x, p.omega_delta, omega_c_, config_.gamma_max, config_.integrator,
                                       config_.sudden);
        p.decouple_fidelity = back.fidelity;
        p.decoupled = back.evolution.amplitudes;
    } catch (const NumericalError& e) {
        throw NumericalError(e.what(), "stage-II/III");
    }
    return p;
}

std::vector<ComplexVector> Protocol::switch_off(const std::vector<ComplexVector>& states, double* discarded) const {
    try {
        if (config_.switch_off == SwitchOffMode::adiabatic_limit) {
            switch_off_duration_ = std::numeric_limits<double>::infinity();
            return adiabatic_switch_off_limit(*frame_, states, omega_c_, config_.switch_off_options.subspace_levels, discarded);
        }
        double duration = config_.switch_off_duration;
        if (duration == 0.0) {
            const auto conv = converge_switch_off_duration(*frame_, states, omega_c_, config_.switch_off_start,
                                                           config_.switch_off_max, config_.switch_off_threshold,
                                                           config_.switch_off_options);
            duration = conv.duration;
            switch_off_converged_ = conv.converged;
            if (!conv.converged)
                spdlog::warn("switch-off: populations still change by {:.3e} at duration {:.4g}", conv.change, duration);
        }
        switch_off_duration_ = duration;
        return anisotropy_switch_off_many(*frame_, states, omega_c_, duration, config_.switch_off_options, nullptr, nullptr,
                                          discarded);
    } catch (const NumericalError& e) {
        throw NumericalError(e.what(), "stage-IV");
    }
}

ProtocolResult Protocol::run() const {
    ProtocolResult r;
    r.omega_c = omega_c_;
    r.tau = config_.tau;
    r.particles = model_.basis().spec().n_particles;
    r.frame_size = frame_->size();
    r.labels = measurement_->labels;
    r.initial = initial_;
    r.initial_moments = frame_->moments(initial_);
    r.frame_ground_overlap = frame_ground_overlap_;
    r.stage_one_time = stage_one_time_;
    r.diagnostics = stage_one_diag_;

    std::vector<ComplexVector> decoupled;
    for (double w : config_.omega_ext) {
        r.points.push_back(prepare(w));
        decoupled.push_back(r.points.back().decoupled);
        r.diagnostics.energy_drift = std::isnan(r.diagnostics.energy_drift)
                                         ? r.points.back().energy_drift
                                         : std::max(r.diagnostics.energy_drift, r.points.back().energy_drift);
    }
    if (decoupled.empty()) return r;
    const auto outputs = switch_off(decoupled, &r.switch_off_discarded);
    r.switch_off_duration = switch_off_duration_;
    r.switch_off_converged = switch_off_converged_;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        auto& p = r.points[i];
        p.output = outputs[i];
        p.p_l = measurement_->l_distribution(*frame_, p.output);
        p.p0 = measurement_->ground_probability(p.output);
    }
    return r;
}

QfiEstimate qfi_pure(const std::function<ComplexVector(double)>& family, double omega, double delta) {
    if (!(delta > 0.0)) throw InvalidArgument("qfi: delta must be positive");
    const ComplexVector centre = family(omega);
    const double n0 = centre.norm();
    if (std::abs(n0 - 1.0) > 1e-8) throw InvalidArgument("qfi: family state is not normalised");
    auto aligned = [&](double w) {
        ComplexVector x = family(w);
        if (x.size() != centre.size()) throw InvalidArgument("qfi: family changes dimension");
        if (std::abs(x.norm() - 1.0) > 1e-8) throw InvalidArgument("qfi: family state is not normalised");
        const Complex ov = centre.dot(x);
        if (std::abs(ov) > 0.0) x *= std::conj(ov) / std::abs(ov);
        return x;
    };
    auto estimate = [&](double d) {
        const ComplexVector deriv = (aligned(omega + d) - aligned(omega - d)) / (2.0 * d);
        return 4.0 * (deriv.squaredNorm() - std::norm(centre.dot(deriv)));
    };
    QfiEstimate q;
    q.coarse = std::max(0.0, estimate(delta));
    q.value = std::max(0.0, estimate(0.5 * delta));
    const double scale = std::max(q.value, q.coarse);
    q.relative_change = scale > 0.0 ? std::abs(q.value - q.coarse) / scale : 0.0;
    // values this small are zero at the resolution of the difference quotient
    const double floor = 1e-12 / (delta * delta);
    if (scale > floor && q.relative_change > 0.01)
        throw NumericalError("QFI changes by " + std::to_string(100.0 * q.relative_change) + "% between delta and delta/2",
                             "qfi");
    if (scale <= floor) q.value = 0.0;
    return q;
}

double qfi_quadratic_approx(const AngularMomentumMoments& moments, double tau) {
    return 4.0 * tau * tau * moments.variance();
}

double qfi_quadratic_approx(const ManyBodyState& state, double tau) {
    return qfi_quadratic_approx(angular_momentum_moments(state), tau);
}

QfiComparison compare_qfi(const QfiEstimate& pure, const AngularMomentumMoments& moments, double tau) {
    QfiComparison c;
    c.tau = tau;
    c.pure = pure.value;
    c.quadratic = qfi_quadratic_approx(moments, tau);
    c.quadratic_valid = c.quadratic > 0.0 ? std::abs(c.pure - c.quadratic) <= 0.1 * c.quadratic : c.pure == 0.0;
    return c;
}

double OutcomeDistribution::mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) m += outcomes[i] * probabilities[i];
    return m;
}

double OutcomeDistribution::variance() const {
    const double m = mean();
    double v = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) v += (outcomes[i] - m) * (outcomes[i] - m) * probabilities[i];
    return v;
}

std::vector<OutcomeDistribution> distributions(const ProtocolResult& result, MeasurementScheme scheme) {
    std::vector<OutcomeDistribution> out;
    for (const auto& p : result.points) {
        OutcomeDistribution d;
        if (scheme == MeasurementScheme::l_moment) {
            d.outcomes.assign(result.labels.begin(), result.labels.end());
            d.probabilities = p.p_l;
        } else {
            d.outcomes = {0.0, 1.0};
            d.probabilities = {p.p0, 1.0 - p.p0};
        }
        out.push_back(std::move(d));
    }
    return out;
}

PrecisionCurve estimate_precision(const std::vector<double>& omega_ext, const std::vector<OutcomeDistribution>& dists,
                                  double tau, int particles, const PrecisionOptions& options) {
    const std::size_t n = omega_ext.size();
    if (n < 3) throw InvalidArgument("precision: need at least three grid points");
    if (dists.size() != n) throw InvalidArgument("precision: one distribution per grid point required");
    for (std::size_t i = 1; i < n; ++i)
        if (!(omega_ext[i] > omega_ext[i - 1])) throw InvalidArgument("precision: grid must increase strictly");
    for (const auto& d : dists)
        if (d.outcomes.size() != d.probabilities.size()) throw InvalidArgument("precision: malformed distribution");

    PrecisionCurve c;
    c.omega_ext = omega_ext;
    c.tau = tau;
    c.particles = particles;
    c.shot_noise = shot_noise_limit(particles);
    double outcome_scale = 1.0;
    for (const auto& d : dists) {
        for (double o : d.outcomes) outcome_scale = std::max(outcome_scale, std::abs(o));
        c.mean.push_back(d.mean());
        c.variance.push_back(std::max(0.0, d.variance()));
    }
    const auto& x = omega_ext;
    const auto& f = c.mean;
    auto central = [&](std::size_t i, std::size_t s) {
        const double hl = x[i] - x[i - s], hr = x[i + s] - x[i];
        return (hl / hr * (f[i + s] - f[i]) + hr / hl * (f[i] - f[i - s])) / (hl + hr);
    };
    c.derivative.resize(n);
    c.derivative_unreliable.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (i == 0) c.derivative[i] = (f[1] - f[0]) / (x[1] - x[0]);
        else if (i + 1 == n) c.derivative[i] = (f[n - 1] - f[n - 2]) / (x[n - 1] - x[n - 2]);
        else c.derivative[i] = central(i, 1);
    }
    double biggest = 0.0;
    for (double d : c.derivative) biggest = std::max(biggest, std::isfinite(d) ? std::abs(d) : 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = c.derivative[i];
        // A grid extremum of the mean cannot be inverted for Ω_ext either, whatever the
        // central difference says.
        const bool extremum = i > 0 && i + 1 < n && (f[i] - f[i - 1]) * (f[i + 1] - f[i]) <= 0.0;
        const double step = i == 0 ? x[1] - x[0] : (i + 1 == n ? x[n - 1] - x[n - 2] : 0.5 * (x[i + 1] - x[i - 1]));
        const bool flat = std::abs(d) * step <= options.mean_resolution * outcome_scale;
        const bool zero = !std::isfinite(d) || biggest == 0.0 || std::abs(d) <= options.divergence_floor * biggest ||
                          flat || extremum;
        c.divergent.push_back(zero);
        const double dw = zero ? std::numeric_limits<double>::infinity() : std::sqrt(c.variance[i]) / std::abs(d);
        c.delta_omega.push_back(dw);
        c.scaled.push_back(tau * dw);
        // Richardson check on evenly spaced interior stencils
        if (!zero && i >= 2 && i + 2 < n) {
            const double h1 = x[i + 1] - x[i], h2 = x[i] - x[i - 1];
            const double h3 = x[i + 2] - x[i + 1], h4 = x[i - 1] - x[i - 2];
            const double tol = 1e-9 * std::max(std::abs(h1), std::abs(h2));
            if (std::abs(h1 - h2) < tol && std::abs(h3 - h1) < tol && std::abs(h4 - h1) < tol) {
                const double wide = central(i, 2);
                const double extrapolated = (4.0 * d - wide) / 3.0;
                c.derivative_unreliable[i] = std::abs(d - extrapolated) > options.richardson_tolerance * std::abs(extrapolated);
            }
        }
    }
    return c;
}

PrecisionCurve estimate_precision(const ProtocolResult& result, MeasurementScheme scheme, const PrecisionOptions& options) {
    std::vector<double> grid;
    for (const auto& p : result.points) grid.push_back(p.omega_ext);
    return estimate_precision(grid, distributions(result, scheme), result.tau, result.particles, options);
}

double shot_noise_limit(int particles) {
    if (particles < 1) throw InvalidArgument("shot noise: need at least one particle");
    return 1.0 / std::sqrt(static_cast<double>(particles));
}

void write_precision_csv(std::ostream& out, const PrecisionCurve& curve) {
    CsvWriter csv(out, {"omega_ext", "estimator_mean", "estimator_derivative", "delta_omega_scaled", "shot_noise",
                        "divergence_flag"});
    for (std::size_t i = 0; i < curve.omega_ext.size(); ++i)
        csv.row({curve.omega_ext[i], curve.mean[i], curve.derivative[i], curve.scaled[i], curve.shot_noise,
                 curve.divergent[i] ? 1.0 : 0.0});
}

}  // namespace rotgyro
