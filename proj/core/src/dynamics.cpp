#include "rotgyro/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <spdlog/spdlog.h>

#include "rotgyro/csv.hpp"
#include "rotgyro/spectrum.hpp"

namespace rotgyro {

namespace {

constexpr Complex kI{0.0, 1.0};

// Frames larger than this exponentiate by Lanczos instead of a dense eigensolve.
constexpr Eigen::Index kDenseExponentialLimit = 400;

// Fehlberg 4(5) tableau
constexpr double c2 = 1.0 / 4, c3 = 3.0 / 8, c4 = 12.0 / 13, c6 = 1.0 / 2;
constexpr double a21 = 1.0 / 4;
constexpr double a31 = 3.0 / 32, a32 = 9.0 / 32;
constexpr double a41 = 1932.0 / 2197, a42 = -7200.0 / 2197, a43 = 7296.0 / 2197;
constexpr double a51 = 439.0 / 216, a52 = -8.0, a53 = 3680.0 / 513, a54 = -845.0 / 4104;
constexpr double a61 = -8.0 / 27, a62 = 2.0, a63 = -3544.0 / 2565, a64 = 1859.0 / 4104, a65 = -11.0 / 40;
constexpr double b1 = 16.0 / 135, b3 = 6656.0 / 12825, b4 = 28561.0 / 56430, b5 = -9.0 / 50, b6 = 2.0 / 55;
constexpr double d1 = b1 - 25.0 / 216, d3 = b3 - 1408.0 / 2565, d4 = b4 - 2197.0 / 4104, d5 = b5 + 1.0 / 5, d6 = b6;

ComplexMatrix sparse_times(const SparseMatrix& w, const ComplexMatrix& y) {
    ComplexMatrix out(y.rows(), y.cols());
    out.real() = w * y.real();
    out.imag() = w * y.imag();
    return out;
}

ComplexMatrix real_times(const RealMatrix& a, const ComplexMatrix& y) {
    ComplexMatrix out(a.rows(), y.cols());
    out.real() = a * y.real();
    out.imag() = a * y.imag();
    return out;
}

// H(Ω, s) = H0 − Ω L + s V as seen by the steppers
class Generator {
public:
    virtual ~Generator() = default;
    virtual ComplexMatrix apply(double omega, double scale, const ComplexMatrix& y) const = 0;
    virtual RealMatrix dense(double omega, double scale) const = 0;
    virtual std::pair<double, double> diagonal_range(double omega) const = 0;
    virtual double mean_l(const ComplexVector& y) const = 0;
    virtual double ground_fidelity(double omega, double scale, const ComplexVector& y) const = 0;

    double energy(double omega, double scale, const ComplexVector& y) const {
        return y.dot(apply(omega, scale, y).col(0)).real() / y.squaredNorm();
    }

    /// exp(−i h (H(Ω, s) − shift)) Y
    virtual ComplexMatrix exponential(double omega, double scale, double shift, double h, const ComplexMatrix& y) const;
};

class FrameGenerator final : public Generator {
public:
    explicit FrameGenerator(const IsotropicFrame& frame) : frame_(frame) {}

    ComplexMatrix exponential(double omega, double scale, double shift, double h, const ComplexMatrix& y) const override {
        if (frame_.size() <= kDenseExponentialLimit) return Generator::exponential(omega, scale, shift, h, y);
        ComplexMatrix out(y.rows(), y.cols());
        for (Eigen::Index j = 0; j < y.cols(); ++j)
            out.col(j) = krylov_propagate(frame_, y.col(j), omega, scale, h, shift);
        return out;
    }

    ComplexMatrix apply(double omega, double scale, const ComplexMatrix& y) const override {
        ComplexMatrix hy = frame_.diagonal(omega).asDiagonal() * y;
        const double k = scale * frame_.coupling();
        if (k != 0.0) hy += k * sparse_times(frame_.quadrupole(), y);
        return hy;
    }
    RealMatrix dense(double omega, double scale) const override { return frame_.dense_hamiltonian(omega, scale); }
    std::pair<double, double> diagonal_range(double omega) const override {
        const RealVector d = frame_.diagonal(omega);
        return {d.minCoeff(), d.maxCoeff()};
    }
    double mean_l(const ComplexVector& y) const override { return frame_.moments(y).mean; }
    double ground_fidelity(double omega, double scale, const ComplexVector& y) const override {
        const auto gs = lowest_eigenpairs(frame_.hamiltonian(omega, scale), 1);
        return std::norm(gs.vectors.col(0).cast<Complex>().dot(y)) / std::max(y.squaredNorm(), 1e-300);
    }

private:
    const IsotropicFrame& frame_;
};

class DenseGenerator final : public Generator {
public:
    DenseGenerator(RealMatrix h0, RealMatrix l, RealMatrix v) : h0_(std::move(h0)), l_(std::move(l)), v_(std::move(v)) {}

    ComplexMatrix apply(double omega, double scale, const ComplexMatrix& y) const override {
        return real_times(dense(omega, scale), y);
    }
    RealMatrix dense(double omega, double scale) const override { return h0_ - omega * l_ + scale * v_; }
    std::pair<double, double> diagonal_range(double omega) const override {
        const RealVector d = h0_.diagonal() - omega * l_.diagonal();
        return {d.minCoeff(), d.maxCoeff()};
    }
    double mean_l(const ComplexVector& y) const override {
        return y.dot(real_times(l_, y).col(0)).real() / y.squaredNorm();
    }
    double ground_fidelity(double omega, double scale, const ComplexVector& y) const override {
        Eigen::SelfAdjointEigenSolver<RealMatrix> es(dense(omega, scale));
        return std::norm(es.eigenvectors().col(0).cast<Complex>().dot(y)) / std::max(y.squaredNorm(), 1e-300);
    }

private:
    RealMatrix h0_, l_, v_;
};

// exp(−i h (H − shift)) Y through a dense eigendecomposition
ComplexMatrix exponential_apply(RealMatrix hm, double shift, double h, const ComplexMatrix& y) {
    hm.diagonal().array() -= shift;
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(hm);
    if (es.info() != Eigen::Success) throw NumericalError("Hamiltonian diagonalisation failed", "tdse");
    const RealMatrix& v = es.eigenvectors();
    const ComplexVector phase = (-kI * h * es.eigenvalues().cast<Complex>()).array().exp();
    ComplexMatrix tmp = phase.asDiagonal() * real_times(v.transpose(), y);
    return real_times(v, tmp);
}

ComplexMatrix Generator::exponential(double omega, double scale, double shift, double h, const ComplexMatrix& y) const {
    return exponential_apply(dense(omega, scale), shift, h, y);
}

// one exponential-midpoint step
ComplexMatrix midpoint_step(const Generator& gen, const LinearDrive& drive, double t, double h, double shift,
                            const ComplexMatrix& y) {
    const double tm = t + 0.5 * h;
    return gen.exponential(drive.omega(tm), drive.scale(tm), shift, h, y);
}

// commutator-free fourth order: exp(−ih(α₁H₁ + α₂H₂)) exp(−ih(α₂H₁ + α₁H₂)) at the Gauss points.
// H is affine in (Ω, s) and α₁ + α₂ = 1/2, so each factor is ½H at a blended (Ω, s).
ComplexMatrix cf4_step(const Generator& gen, const LinearDrive& drive, double t, double h, double shift,
                       const ComplexMatrix& y) {
    static const double r = std::sqrt(3.0) / 6.0;
    static const double al1 = (3.0 - 2.0 * std::sqrt(3.0)) / 12.0;
    static const double al2 = (3.0 + 2.0 * std::sqrt(3.0)) / 12.0;
    const double t1 = t + (0.5 - r) * h, t2 = t + (0.5 + r) * h;
    const double w1 = drive.omega(t1), w2 = drive.omega(t2);
    const double s1 = drive.scale(t1), s2 = drive.scale(t2);
    const ComplexMatrix first =
        gen.exponential(2.0 * (al2 * w1 + al1 * w2), 2.0 * (al2 * s1 + al1 * s2), shift, 0.5 * h, y);
    return gen.exponential(2.0 * (al1 * w1 + al2 * w2), 2.0 * (al1 * s1 + al2 * s2), shift, 0.5 * h, first);
}

TracePoint trace_point(const Generator& gen, const ComplexMatrix& y, double t, const LinearDrive& drive,
                       const IntegratorConfig& cfg) {
    TracePoint p;
    p.time = t;
    p.omega = drive.omega(t);
    p.scale = drive.scale(t);
    const ComplexVector col = y.col(0);
    p.norm = col.norm();
    p.mean_l = gen.mean_l(col);
    if (cfg.trace_ground_fidelity) p.ground_fidelity = gen.ground_fidelity(p.omega, p.scale, col);
    return p;
}

ComplexMatrix evolve(const Generator& gen, const ComplexMatrix& initial, const LinearDrive& drive,
                     const IntegratorConfig& cfg, EvolutionDiagnostics& diag) {
    cfg.validate();
    if (!(drive.duration >= 0.0) || !std::isfinite(drive.duration)) throw InvalidArgument("propagate: invalid duration");
    if (drive.duration == 0.0 || initial.cols() == 0) return initial;

    // a constant energy offset only changes the global phase; centring the
    // diagonal keeps the explicit stepper away from its stability edge
    const auto [lo_start, hi_start] = gen.diagonal_range(drive.omega_start);
    const auto [lo_end, hi_end] = gen.diagonal_range(drive.omega_end);
    const double shift = 0.25 * (lo_start + hi_start + lo_end + hi_end);
    const double T = drive.duration;
    const RealVector norms0 = initial.colwise().norm().transpose();
    const bool tracing = cfg.trace_interval > 0.0;
    double last_trace = 0.0;
    if (tracing) diag.trace.push_back(trace_point(gen, initial, 0.0, drive, cfg));

    auto rhs = [&](double tt, const ComplexMatrix& yy) -> ComplexMatrix {
        return -kI * (gen.apply(drive.omega(tt), drive.scale(tt), yy) - shift * yy);
    };

    ComplexMatrix y = initial;
    double t = 0.0;
    long steps = 0, rejected = 0;

    if (cfg.stepper != Stepper::rkf45 && drive.constant()) {
        // exact for a time-independent Hamiltonian
        y = gen.exponential(drive.omega_start, drive.scale_start, shift, T, y);
        steps = 1;
        t = T;
    }

    double h = std::min({cfg.initial_step, cfg.max_step, T});
    const double norm_y = std::max(initial.norm(), 1e-300);
    while (t < T) {
        if (steps + rejected >= cfg.max_steps)
            throw NumericalError("step budget exhausted at t = " + std::to_string(t) + " of " + std::to_string(T), "tdse");
        if (h < 1e-14 * std::max(1.0, T)) throw NumericalError("step size underflow at t = " + std::to_string(t), "tdse");
        const bool last = t + h >= T * (1.0 - 1e-14);
        if (last) h = T - t;

        ComplexMatrix next;
        double err = 0.0;
        double order = 5.0;
        if (cfg.stepper == Stepper::rkf45) {
            const ComplexMatrix k1 = rhs(t, y);
            const ComplexMatrix k2 = rhs(t + c2 * h, y + h * (a21 * k1));
            const ComplexMatrix k3 = rhs(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
            const ComplexMatrix k4 = rhs(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
            const ComplexMatrix k5 = rhs(t + h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            const ComplexMatrix k6 = rhs(t + c6 * h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            next = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            err = (h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6)).norm() / (cfg.atol + cfg.rtol * norm_y);
        } else {
            // step doubling; the two half steps are kept
            const auto step = cfg.stepper == Stepper::magnus2 ? midpoint_step : cf4_step;
            const ComplexMatrix full = step(gen, drive, t, h, shift, y);
            const ComplexMatrix half = step(gen, drive, t, 0.5 * h, shift, y);
            next = step(gen, drive, t + 0.5 * h, 0.5 * h, shift, half);
            err = (next - full).norm() / (cfg.atol + cfg.rtol * norm_y);
            order = cfg.stepper == Stepper::magnus2 ? 3.0 : 5.0;
        }
        if (!std::isfinite(err)) throw NumericalError("non-finite error estimate at t = " + std::to_string(t), "tdse");

        const double factor = std::clamp(0.9 * std::pow(std::max(err, 1e-10), -1.0 / order), 0.2, 5.0);
        if (err <= 1.0) {
            t = last ? T : t + h;
            y = std::move(next);
            ++steps;
            if (tracing && (t - last_trace >= cfg.trace_interval || t == T)) {
                diag.trace.push_back(trace_point(gen, y, t, drive, cfg));
                last_trace = t;
            }
            h = std::min(h * factor, cfg.max_step);
        } else {
            ++rejected;
            h *= std::max(factor, 0.1);
        }
    }

    // undo the offset so phases match the unshifted Hamiltonian
    y *= std::exp(-kI * shift * T);

    double drift = 0.0;
    for (Eigen::Index j = 0; j < y.cols(); ++j) drift = std::max(drift, std::abs(y.col(j).norm() - norms0(j)));
    if (drift > cfg.norm_tolerance)
        throw NumericalError("norm drift " + std::to_string(drift) + " exceeds " + std::to_string(cfg.norm_tolerance), "tdse");
    if (drift > 1e-13) {
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            const double n = y.col(j).norm();
            if (n > 0.0) y.col(j) *= norms0(j) / n;
        }
        spdlog::debug("tdse: renormalised after norm drift {:.3e}", drift);
        diag.renormalized = true;
    }
    if (drive.constant()) {
        double worst = 0.0;
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            if (norms0(j) == 0.0) continue;
            const double e0 = gen.energy(drive.omega_start, drive.scale_start, initial.col(j));
            const double e1 = gen.energy(drive.omega_start, drive.scale_start, y.col(j));
            worst = std::max(worst, std::abs(e1 - e0) / std::max(std::abs(e0), 1e-300));
        }
        diag.energy_drift = std::isnan(diag.energy_drift) ? worst : std::max(diag.energy_drift, worst);
    }
    diag.steps += steps;
    diag.rejected += rejected;
    diag.norm_drift = std::max(diag.norm_drift, drift);
    return y;
}

}  // namespace

RampSegment RampSegment::linear(double from, double to, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("ramp: gamma must be positive and finite");
    return {from, to, gamma, 0.0};
}

RampSegment RampSegment::hold(double omega, double duration) {
    if (!(duration >= 0.0)) throw InvalidArgument("ramp: hold duration must be >= 0");
    return {omega, omega, 0.0, duration};
}

double RampSegment::duration() const {
    if (omega_start == omega_end) return hold_time;
    return std::abs(omega_end - omega_start) / gamma;
}

RampSchedule::RampSchedule(std::vector<RampSegment> segments) : segments_(std::move(segments)) { validate(); }

double RampSchedule::total_time() const {
    double t = 0.0;
    for (const auto& s : segments_) t += s.duration();
    return t;
}

double RampSchedule::seconds(double trap_frequency_hz) const {
    if (!(trap_frequency_hz > 0.0)) throw InvalidArgument("ramp: trap frequency must be positive");
    return total_time() / (2.0 * std::numbers::pi * trap_frequency_hz);
}

double RampSchedule::omega_at(double t) const {
    if (segments_.empty()) throw InvalidArgument("ramp: empty schedule");
    double start = 0.0;
    for (const auto& s : segments_) {
        const double d = s.duration();
        if (t <= start + d) {
            if (s.omega_start == s.omega_end || d == 0.0) return s.omega_start;
            return s.omega_start + (s.omega_end - s.omega_start) * std::clamp((t - start) / d, 0.0, 1.0);
        }
        start += d;
    }
    return segments_.back().omega_end;
}

double RampSchedule::omega_start() const {
    if (segments_.empty()) throw InvalidArgument("ramp: empty schedule");
    return segments_.front().omega_start;
}

double RampSchedule::omega_end() const {
    if (segments_.empty()) throw InvalidArgument("ramp: empty schedule");
    return segments_.back().omega_end;
}

void RampSchedule::validate() const {
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const auto& s = segments_[i];
        if (!std::isfinite(s.omega_start) || !std::isfinite(s.omega_end))
            throw InvalidArgument("ramp: non-finite frequency in segment " + std::to_string(i));
        if (s.omega_start != s.omega_end && !(s.gamma > 0.0 && std::isfinite(s.gamma)))
            throw InvalidArgument("ramp: segment " + std::to_string(i) + " needs a positive rate");
        if (s.omega_start == s.omega_end && !(s.hold_time >= 0.0 && std::isfinite(s.hold_time)))
            throw InvalidArgument("ramp: segment " + std::to_string(i) + " has an invalid hold time");
        if (i > 0 && segments_[i - 1].omega_end != s.omega_start)
            throw InvalidArgument("ramp: segment " + std::to_string(i) + " does not start where the previous one ends");
    }
}

void IntegratorConfig::validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw InvalidArgument("integrator: tolerances must be positive");
    if (!(initial_step > 0.0)) throw InvalidArgument("integrator: initial step must be positive");
    if (!(max_step > 0.0)) throw InvalidArgument("integrator: max step must be positive");
    if (max_steps <= 0) throw InvalidArgument("integrator: max steps must be positive");
    if (!(norm_tolerance > 0.0)) throw InvalidArgument("integrator: norm tolerance must be positive");
    if (trace_interval < 0.0) throw InvalidArgument("integrator: trace interval must be >= 0");
}

void EvolutionDiagnostics::merge(const EvolutionDiagnostics& other) {
    steps += other.steps;
    rejected += other.rejected;
    norm_drift = std::max(norm_drift, other.norm_drift);
    renormalized = renormalized || other.renormalized;
    frame_coverage = std::min(frame_coverage, other.frame_coverage);
    if (std::isnan(energy_drift)) energy_drift = other.energy_drift;
    else if (!std::isnan(other.energy_drift)) energy_drift = std::max(energy_drift, other.energy_drift);
    trace.insert(trace.end(), other.trace.begin(), other.trace.end());
}

double LinearDrive::omega(double t) const {
    if (duration <= 0.0) return omega_end;
    return omega_start + (omega_end - omega_start) * (t / duration);
}

double LinearDrive::scale(double t) const {
    if (duration <= 0.0) return scale_end;
    return scale_start + (scale_end - scale_start) * (t / duration);
}

ComplexMatrix propagate(const IsotropicFrame& frame, const ComplexMatrix& initial, const LinearDrive& drive,
                        const IntegratorConfig& cfg, EvolutionDiagnostics* diagnostics) {
    if (initial.rows() != frame.size()) throw InvalidArgument("propagate: amplitude count does not match the frame");
    EvolutionDiagnostics local;
    return evolve(FrameGenerator(frame), initial, drive, cfg, diagnostics ? *diagnostics : local);
}

EvolutionResult integrate_tdse(const IsotropicFrame& frame, const ComplexVector& initial, const RampSchedule& schedule,
                               const IntegratorConfig& cfg) {
    schedule.validate();
    if (std::abs(initial.norm() - 1.0) > 1e-8) throw InvalidArgument("integrate_tdse: initial state is not normalised");
    EvolutionResult result;
    ComplexMatrix y = initial;
    double t0 = 0.0;
    for (const auto& seg : schedule.segments()) {
        const LinearDrive drive{seg.duration(), seg.omega_start, seg.omega_end, 1.0, 1.0};
        EvolutionDiagnostics d;
        y = propagate(frame, y, drive, cfg, &d);
        for (auto& p : d.trace) p.time += t0;
        t0 += drive.duration;
        result.diagnostics.merge(d);
    }
    result.amplitudes = y.col(0);
    return result;
}

ManyBodyState integrate_tdse(const IsotropicFrame& frame, const ManyBodyState& initial, const RampSchedule& schedule,
                             const IntegratorConfig& cfg, EvolutionDiagnostics* diagnostics) {
    initial.require_normalized(1e-8);
    ComplexVector c = frame.to_frame(initial);
    const double coverage = c.squaredNorm();
    if (coverage < 1.0 - 1e-6) spdlog::warn("tdse: frame captures only {:.8f} of the initial state", coverage);
    c /= std::sqrt(coverage);
    auto result = integrate_tdse(frame, c, schedule, cfg);
    result.diagnostics.frame_coverage = coverage;
    if (diagnostics) *diagnostics = result.diagnostics;
    return frame.state(result.amplitudes);
}

double sudden_guard_ratio(const IsotropicFrame& frame, const ComplexVector& state, double delta_omega,
                          double gamma_max) {
    if (!(gamma_max > 0.0)) throw InvalidArgument("sudden_shift: gamma_max must be positive");
    const double dl = frame.moments(state).stddev;
    if (delta_omega == 0.0) return 0.0;
    if (dl == 0.0) return 0.0;  // no L spread: the shift only adds a global phase
    return std::abs(delta_omega) / std::sqrt(2.0 * gamma_max / dl);
}

SuddenShiftResult sudden_shift(const IsotropicFrame& frame, const ComplexVector& state, double omega_from,
                               double omega_to, double gamma_max, const IntegratorConfig& cfg, SuddenMode mode) {
    if (!(gamma_max > 0.0)) throw InvalidArgument("sudden_shift: gamma_max must be positive");
    SuddenShiftResult r;
    r.guard_ratio = sudden_guard_ratio(frame, state, omega_to - omega_from, gamma_max);
    r.guard_violated = r.guard_ratio > 1.0;
    if (r.guard_violated)
        spdlog::warn("sudden_shift: |dOmega| = {:.3e} is not small against sqrt(2 gamma / dL) (ratio {:.2f})",
                     std::abs(omega_to - omega_from), r.guard_ratio);
    if (mode == SuddenMode::instantaneous || omega_from == omega_to) {
        r.evolution.amplitudes = state;
        r.fidelity = 1.0;
        return r;
    }
    const LinearDrive drive{std::abs(omega_to - omega_from) / gamma_max, omega_from, omega_to, 1.0, 1.0};
    const ComplexMatrix y = propagate(frame, state, drive, cfg, &r.evolution.diagnostics);
    r.evolution.amplitudes = y.col(0);
    r.fidelity = std::norm(state.dot(r.evolution.amplitudes)) / (state.squaredNorm() * r.evolution.amplitudes.squaredNorm());
    return r;
}

ComplexVector free_evolution(const FrameSpectrum& spectrum, const ComplexVector& state, double tau) {
    if (!(tau >= 0.0)) throw InvalidArgument("free_evolution: tau must be >= 0");
    if (state.size() != spectrum.vectors.rows()) throw InvalidArgument("free_evolution: dimension mismatch");
    if (tau == 0.0) return state;
    const RealMatrix& v = spectrum.vectors;
    const double e0 = spectrum.values(0);
    const ComplexVector phase = (-kI * tau * (spectrum.values.array() - e0).cast<Complex>()).exp().matrix();
    ComplexVector coeff(v.cols());
    coeff.real() = v.transpose() * state.real();
    coeff.imag() = v.transpose() * state.imag();
    coeff = phase.asDiagonal() * coeff;
    ComplexVector out(state.size());
    out.real() = v * coeff.real();
    out.imag() = v * coeff.imag();
    return out;
}

ComplexVector free_evolution(const IsotropicFrame& frame, const ComplexVector& state, double omega_delta, double tau) {
    if (!(tau >= 0.0)) throw InvalidArgument("free_evolution: tau must be >= 0");
    if (tau == 0.0) return state;
    if (frame.size() <= kDenseExponentialLimit) return free_evolution(frame.diagonalize(omega_delta, 1.0), state, tau);
    if (state.size() != frame.size()) throw InvalidArgument("free_evolution: dimension mismatch");
    SolverOptions solver;
    solver.dense_threshold = 0;
    const auto gs = lowest_eigenpairs(frame.hamiltonian(omega_delta, 1.0), 1, solver);
    return krylov_propagate(frame, state, omega_delta, 1.0, tau, gs.values(0));
}

ComplexVector krylov_propagate(const IsotropicFrame& frame, const ComplexVector& v, double omega, double scale, double t,
                               double shift, double tolerance) {
    if (v.size() != frame.size()) throw InvalidArgument("krylov_propagate: dimension mismatch");
    if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("krylov_propagate: time must be finite and >= 0");
    if (!(tolerance > 0.0)) throw InvalidArgument("krylov_propagate: tolerance must be positive");
    const double beta0 = v.norm();
    if (t == 0.0 || beta0 == 0.0) return v;

    const RealVector d = frame.diagonal(omega).array() - shift;
    const double k = scale * frame.coupling();
    auto op = [&](const ComplexVector& x) -> ComplexVector {
        ComplexVector y = d.asDiagonal() * x;
        if (k != 0.0) y += k * sparse_times(frame.quadrupole(), x).col(0);
        return y;
    };

    const Eigen::Index n = v.size();
    const int m_max = static_cast<int>(std::min<Eigen::Index>(40, n));
    ComplexMatrix basis(n, m_max + 1);
    RealVector alpha(m_max), off(m_max);
    ComplexVector w = v;
    double done = 0.0, dt = t;
    while (done < t) {
        const double beta = w.norm();
        basis.col(0) = w / beta;
        int m = 0;
        bool invariant = false;
        while (m < m_max) {
            ComplexVector u = op(basis.col(m));
            alpha(m) = basis.col(m).dot(u).real();
            // full reorthogonalisation, twice: one pass loses orthogonality geometrically when ‖H‖ ≫ β
            for (int pass = 0; pass < 2; ++pass)
                for (int r = 0; r <= m; ++r) u -= basis.col(r).dot(u) * basis.col(r);
            off(m) = u.norm();
            ++m;
            if (off(m - 1) <= 1e-13 * (1.0 + std::abs(alpha(m - 1)))) {
                invariant = true;
                break;
            }
            basis.col(m) = u / off(m - 1);
        }
        Eigen::SelfAdjointEigenSolver<RealMatrix> es;
        es.computeFromTridiagonal(alpha.head(m), off.head(std::max(m - 1, 0)));
        const RealMatrix& q = es.eigenvectors();
        auto small_exp = [&](double h) -> ComplexVector {
            const ComplexVector ph = (-kI * h * es.eigenvalues().cast<Complex>()).array().exp();
            return q.cast<Complex>() * (ph.asDiagonal() * q.row(0).transpose().cast<Complex>());
        };
        dt = std::min(dt, t - done);
        ComplexVector c;
        for (;;) {
            c = small_exp(dt);
            const double err = invariant ? 0.0 : beta * off(m - 1) * std::abs(c(m - 1));
            if (err <= tolerance * beta0 * dt / t) break;
            dt *= 0.5;
            if (dt < 1e-12 * t) throw NumericalError("Lanczos exponential cannot reach its tolerance", "tdse");
        }
        w = beta * (basis.leftCols(m) * c);
        done = (t - done - dt <= 1e-14 * t) ? t : done + dt;
        dt *= 2.0;
    }
    return w;
}

double frame_energy(const IsotropicFrame& frame, const ComplexVector& state, double omega, double scale) {
    const double n2 = state.squaredNorm();
    if (n2 == 0.0) throw InvalidArgument("frame_energy: zero state");
    const RealVector d = frame.diagonal(omega);
    double e = state.cwiseAbs2().dot(d);
    const double k = scale * frame.coupling();
    if (k != 0.0) e += k * state.dot(sparse_times(frame.quadrupole(), state).col(0)).real();
    return e / n2;
}

std::vector<ComplexVector> anisotropy_switch_off_many(const IsotropicFrame& frame, const std::vector<ComplexVector>& states,
                                                      double omega_c, double duration, const SwitchOffOptions& options,
                                                      EvolutionDiagnostics* diagnostics, Eigen::Index* subspace_dimension,
                                                      double* discarded_weight) {
    if (!(duration > 0.0)) throw InvalidArgument("anisotropy_switch_off: duration must be positive");
    if (options.subspace_levels < 0 || options.intervals < 1)
        throw InvalidArgument("anisotropy_switch_off: need subspace_levels >= 0 and intervals >= 1");
    if (states.empty()) return {};
    if (subspace_dimension) *subspace_dimension = frame.size();
    if (discarded_weight) *discarded_weight = 0.0;
    if (frame.coupling() == 0.0) return states;  // nothing to switch off
    const auto k = static_cast<Eigen::Index>(states.size());
    ComplexMatrix s(frame.size(), k);
    for (Eigen::Index j = 0; j < k; ++j) {
        if (states[static_cast<std::size_t>(j)].size() != frame.size())
            throw InvalidArgument("anisotropy_switch_off: dimension mismatch");
        s.col(j) = states[static_cast<std::size_t>(j)];
    }
    // orthonormal basis of the span; every input is an exact combination of it
    Eigen::BDCSVD<ComplexMatrix> svd(s, Eigen::ComputeThinU);
    const RealVector& sv = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > 1e-13 * sv(0)) ++rank;
    const ComplexMatrix u = svd.matrixU().leftCols(rank);
    const ComplexMatrix coeff = u.adjoint() * s;
    if ((s - u * coeff).norm() > 1e-10 * s.norm()) throw NumericalError("span compression lost accuracy", "switch-off");

    EvolutionDiagnostics local;
    EvolutionDiagnostics& diag = diagnostics ? *diagnostics : local;
    const Eigen::Index levels = std::min<Eigen::Index>(options.subspace_levels, frame.size());
    ComplexMatrix evolved;
    if (levels == 0 || 2 * levels >= frame.size()) {
        const LinearDrive drive{duration, omega_c, omega_c, 1.0, 0.0};
        evolved = evolve(FrameGenerator(frame), u, drive, options.integrator, diag);
    } else {
        auto orthonormal = [](const RealMatrix& m) {
            Eigen::BDCSVD<RealMatrix> svd_m(m, Eigen::ComputeThinU);
            const RealVector& w = svd_m.singularValues();
            Eigen::Index dim = 0;
            while (dim < w.size() && w(dim) > 1e-10 * w(0)) ++dim;
            return RealMatrix(svd_m.matrixU().leftCols(dim));
        };
        RealMatrix seed;
        auto low = [&](double scale) {
            const auto ep = lowest_eigenpairs(frame.hamiltonian(omega_c, scale), static_cast<int>(levels), {},
                                              seed.size() ? &seed : nullptr);
            seed = ep.vectors;
            return ep.vectors;
        };
        const double piece = duration / options.intervals;
        const double input_weight = u.squaredNorm();
        RealMatrix left = low(1.0);
        ComplexMatrix psi = u;  // frame amplitudes at the start of the current piece
        Eigen::Index widest = 0;
        for (int i = 0; i < options.intervals; ++i) {
            const double s0 = 1.0 - static_cast<double>(i) / options.intervals;
            const double s1 = 1.0 - static_cast<double>(i + 1) / options.intervals;
            const RealMatrix right = low(s1);
            RealMatrix cols(frame.size(), 2 * levels);
            cols << left, right;
            const RealMatrix q = orthonormal(cols);
            widest = std::max(widest, q.cols());
            const RealMatrix h0 = q.transpose() * frame.energies().asDiagonal() * q;
            const RealMatrix l = q.transpose() * frame.angular_momentum().asDiagonal() * q;
            const RealMatrix v = frame.coupling() * (q.transpose() * (frame.quadrupole() * q));
            const LinearDrive drive{piece, omega_c, omega_c, s0, s1};
            const ComplexMatrix y0 = real_times(q.transpose(), psi);
            psi = real_times(q, evolve(DenseGenerator(h0, l, v), y0, drive, options.integrator, diag));
            left = right;
        }
        const double lost = std::max(0.0, 1.0 - psi.squaredNorm() / input_weight);
        if (discarded_weight) *discarded_weight = lost;
        if (subspace_dimension) *subspace_dimension = widest;
        if (lost > 1e-6) spdlog::warn("switch-off: projections discarded {:.3e} of the weight", lost);
        // hand-over losses are outside the integrator's norm control; restore the norms
        for (Eigen::Index j = 0; j < psi.cols(); ++j) {
            const double n = psi.col(j).norm();
            if (n > 0.0) psi.col(j) /= n;
        }
        if (lost > 0.0) spdlog::debug("switch-off: renormalised after discarding {:.3e}", lost);
        evolved = psi;
    }
    evolved = evolved * coeff;
    std::vector<ComplexVector> out;
    out.reserve(states.size());
    for (Eigen::Index j = 0; j < k; ++j) out.emplace_back(evolved.col(j));
    return out;
}

SwitchOffResult anisotropy_switch_off(const IsotropicFrame& frame, const ComplexVector& state, double omega_c,
                                      double duration, const SwitchOffOptions& options) {
    if (options.manifold < 1) throw InvalidArgument("anisotropy_switch_off: manifold must be >= 1");
    SwitchOffResult r;
    r.duration = duration;
    r.evolution.amplitudes =
        anisotropy_switch_off_many(frame, {state}, omega_c, duration, options, &r.evolution.diagnostics, &r.subspace_dimension,
                                   &r.discarded_weight)
            .front();
    if (frame.coupling() == 0.0) return r;

    const auto m = std::min<Eigen::Index>(options.manifold, frame.size());
    const auto before = lowest_eigenpairs(frame.hamiltonian(omega_c, 1.0), static_cast<int>(m));
    const double w_in = (before.vectors.cast<Complex>().adjoint() * state).squaredNorm() / state.squaredNorm();
    // isotropic eigenstates are frame unit vectors
    std::vector<Eigen::Index> order(static_cast<std::size_t>(frame.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const RealVector d = frame.diagonal(omega_c);
    std::partial_sort(order.begin(), order.begin() + m, order.end(), [&](auto a, auto b) { return d(a) < d(b); });
    double w_out = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) w_out += std::norm(r.evolution.amplitudes(order[static_cast<std::size_t>(i)]));
    w_out /= r.evolution.amplitudes.squaredNorm();
    r.leakage = std::max(0.0, w_in - w_out);
    return r;
}

std::vector<ComplexVector> adiabatic_switch_off_limit(const IsotropicFrame& frame, const std::vector<ComplexVector>& states,
                                                      double omega_c, int levels, double* discarded_weight) {
    if (levels < 1) throw InvalidArgument("adiabatic switch-off: levels must be >= 1");
    if (discarded_weight) *discarded_weight = 0.0;
    if (frame.coupling() == 0.0) return states;
    const auto m = std::min<Eigen::Index>(levels, frame.size());
    const auto ep = lowest_eigenpairs(frame.hamiltonian(omega_c, 1.0), static_cast<int>(m));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(frame.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const RealVector d = frame.diagonal(omega_c);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return d(a) < d(b); });
    if (m < frame.size() && d(order[static_cast<std::size_t>(m)]) - d(order[static_cast<std::size_t>(m - 1)]) < 1e-12)
        spdlog::warn("adiabatic switch-off: isotropic level {} is degenerate with the next one", m - 1);
    std::vector<ComplexVector> out;
    out.reserve(states.size());
    double worst = 0.0;
    for (const auto& x : states) {
        if (x.size() != frame.size()) throw InvalidArgument("adiabatic switch-off: dimension mismatch");
        ComplexVector a(ep.vectors.cols());
        a.real() = ep.vectors.transpose() * x.real();
        a.imag() = ep.vectors.transpose() * x.imag();
        ComplexVector y = ComplexVector::Zero(frame.size());
        for (Eigen::Index n = 0; n < m; ++n) y(order[static_cast<std::size_t>(n)]) = a(n);
        const double total = x.squaredNorm();
        if (total > 0.0) worst = std::max(worst, 1.0 - y.squaredNorm() / total);
        out.push_back(std::move(y));
    }
    if (discarded_weight) *discarded_weight = std::max(0.0, worst);
    return out;
}

SwitchOffConvergence converge_switch_off_duration(const IsotropicFrame& frame, const std::vector<ComplexVector>& states,
                                                  double omega_c, double start, double max_duration, double threshold,
                                                  const SwitchOffOptions& options) {
    if (!(start > 0.0) || !(max_duration >= start)) throw InvalidArgument("switch-off convergence: bad duration range");
    auto weights = [&](const std::vector<ComplexVector>& v) {
        std::vector<double> w;
        for (const auto& x : v)
            for (const auto& [l, p] : frame.block_weights(x)) w.push_back(p);
        return w;
    };
    SwitchOffConvergence c;
    double duration = start;
    auto prev = weights(anisotropy_switch_off_many(frame, states, omega_c, duration, options));
    c.durations.push_back(duration);
    c.duration = duration;
    while (duration * 2.0 <= max_duration * (1.0 + 1e-12)) {
        duration *= 2.0;
        const auto cur = weights(anisotropy_switch_off_many(frame, states, omega_c, duration, options));
        double change = 0.0;
        for (std::size_t i = 0; i < cur.size(); ++i) change = std::max(change, std::abs(cur[i] - prev[i]));
        c.durations.push_back(duration);
        c.changes.push_back(change);
        c.duration = duration;
        c.change = change;
        spdlog::debug("switch-off duration {:.4g}: block population change {:.3e}", duration, change);
        if (change < threshold) {
            c.converged = true;
            return c;
        }
        prev = cur;
    }
    return c;
}

RampPlan plan_adiabatic_ramp(const HamiltonianModel& model, double omega_start, double omega_c, double delta_omega,
                             double p01, const RampPlanOptions& options) {
    if (!(omega_start < omega_c)) throw InvalidArgument("ramp plan: omega_start must lie below omega_c");
    if (!(delta_omega > 0.0)) throw InvalidArgument("ramp plan: delta_omega must be positive");
    if (!(p01 > 0.0 && p01 < 1.0)) throw InvalidArgument("ramp plan: p01 must lie in (0, 1)");
    if (options.subgrid_points < 2) throw InvalidArgument("ramp plan: need at least two sub-grid points");
    // without anisotropy L is conserved and the L=0 / L=N levels cross rather than anti-cross
    if (model.params().quadrupole_coefficient() == 0.0)
        throw NumericalError("ground-state gap closes at the level crossing: anisotropy is zero", "ramp-plan");
    const int n = model.basis().spec().n_particles;

    std::vector<double> edges{omega_start};
    while (edges.back() + delta_omega < omega_c - 1e-12 * delta_omega) edges.push_back(edges.back() + delta_omega);
    edges.push_back(omega_c);

    RampPlan plan;
    std::vector<RampSegment> segments;
    const RealMatrix* seed = nullptr;
    RealMatrix last_vectors;
    auto gap_at = [&](double w) {
        const auto sol = solve_at(model, w, 2, options.solver, seed);
        last_vectors = sol.vectors;
        seed = &last_vectors;
        const double g = sol.gap();
        plan.sample_omegas.push_back(w);
        plan.sample_gaps.push_back(g);
        const double scale = std::max(1.0, std::abs(sol.values(0)));
        if (!(g > 1e-10 * scale))
            throw NumericalError("ground-state gap indistinguishable from zero at omega = " + std::to_string(w) +
                                     " (no anisotropy?)",
                                 "ramp-plan");
        return g;
    };

    double left = gap_at(edges.front());
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        double gmin = left;
        if (options.sampling == GapSampling::subgrid) {
            const auto grid = linspace(edges[i], edges[i + 1], options.subgrid_points);
            for (std::size_t j = 1; j + 1 < grid.size(); ++j) gmin = std::min(gmin, gap_at(grid[j]));
        }
        const double right = gap_at(edges[i + 1]);
        gmin = std::min(gmin, right);
        left = right;
        plan.segment_gaps.push_back(gmin);
        const double gamma = gmin * gmin * std::sqrt(p01) / n;
        segments.push_back(RampSegment::linear(edges[i], edges[i + 1], gamma));
    }
    plan.schedule = RampSchedule(std::move(segments));
    plan.total_time = plan.schedule.total_time();
    plan.seconds = plan.schedule.seconds(options.trap_frequency_hz);
    plan.feasible = plan.seconds <= options.lifetime_seconds;
    return plan;
}

void write_trajectory_csv(std::ostream& out, const std::vector<TracePoint>& trace) {
    CsvWriter csv(out, {"time", "omega", "scale", "norm", "mean_L", "ground_fidelity"});
    for (const auto& p : trace) csv.row({p.time, p.omega, p.scale, p.norm, p.mean_l, p.ground_fidelity});
}

}  // namespace rotgyro
