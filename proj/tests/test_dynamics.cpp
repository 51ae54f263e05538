#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "rotgyro/dynamics.hpp"
#include "rotgyro/spectrum.hpp"

using namespace rotgyro;

namespace {

HamiltonianModel make_model(int n, double g6, double anisotropy = 0.03) {
    const ModelParams p = ModelParams::from_reduced_coupling(n, g6, anisotropy);
    return HamiltonianModel(p, std::make_shared<const ManyBodyBasis>(p.spec));
}

double state_fidelity(const ComplexVector& a, const ComplexVector& b) {
    return std::norm(a.dot(b)) / (a.squaredNorm() * b.squaredNorm());
}

ComplexVector frame_ground(const IsotropicFrame& frame, double omega, int index = 0) {
    return frame.diagonalize(omega).vectors.col(index).cast<Complex>();
}

int dominant_l(const IsotropicFrame& frame, const ComplexVector& v) {
    int best = -1;
    double w = -1.0;
    for (const auto& [l, p] : frame.block_weights(v)) {
        if (p > w) {
            w = p;
            best = l;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("ramp schedules") {
    const RampSchedule s({RampSegment::linear(0.4, 0.5, 0.01), RampSegment::hold(0.5, 3.0),
                          RampSegment::linear(0.5, 0.45, 0.05)});
    CHECK(s.total_time() == doctest::Approx(10.0 + 3.0 + 1.0));
    CHECK(s.omega_start() == 0.4);
    CHECK(s.omega_end() == 0.45);
    CHECK(s.omega_at(0.0) == doctest::Approx(0.4));
    CHECK(s.omega_at(5.0) == doctest::Approx(0.45));
    CHECK(s.omega_at(11.0) == doctest::Approx(0.5));
    CHECK(s.omega_at(13.5) == doctest::Approx(0.475));
    CHECK(s.seconds(2100.0) == doctest::Approx(14.0 / (2.0 * std::numbers::pi * 2100.0)));
    CHECK_NOTHROW(s.validate());

    CHECK_THROWS_AS(RampSchedule({RampSegment::linear(0.4, 0.5, 0.01), RampSegment::linear(0.6, 0.7, 0.01)}).validate(),
                    InvalidArgument);
    CHECK_THROWS_AS(RampSegment::linear(0.4, 0.5, 0.0), InvalidArgument);
    CHECK_THROWS_AS(RampSegment::hold(0.4, -1.0), InvalidArgument);
    IntegratorConfig bad;
    bad.rtol = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("two-particle evolution matches the dense exponential oracle") {
    for (const auto& c : oracle::two_particle_checks()) {
        INFO(c.name << ": " << c.value << " " << c.detail);
        CHECK(c.passed);
    }
}

TEST_CASE("norm and energy conservation") {
    for (const auto& c : oracle::conservation_checks()) {
        INFO(c.name << ": " << c.value << " " << c.detail);
        CHECK(c.passed);
    }
}

TEST_CASE("steppers agree with the ordered exponential") {
    const HamiltonianModel model = make_model(4, 1.0, 0.2);
    const IsotropicFrame frame(model, {.energy_window = 2.0, .omega_min = 0.6, .omega_max = 0.7});
    const ComplexVector psi0 = frame_ground(frame, 0.6);
    const LinearDrive drive{5.0, 0.6, 0.7, 1.0, 1.0};
    const ComplexVector ref = oracle::ramp_expm_apply([&](double w) { return frame.dense_hamiltonian(w); }, 0.6, 0.7,
                                                      5.0, psi0, 400);
    for (Stepper st : {Stepper::rkf45, Stepper::magnus2, Stepper::magnus4}) {
        IntegratorConfig cfg;
        cfg.stepper = st;
        cfg.rtol = 1e-10;
        cfg.atol = 1e-13;
        const ComplexMatrix y = propagate(frame, psi0, drive, cfg);
        INFO("stepper " << static_cast<int>(st));
        CHECK((y.col(0) - ref).norm() < 1e-7);
    }
}

TEST_CASE("evolution is linear") {
    const HamiltonianModel model = make_model(2, 1.0, 0.2);
    const IsotropicFrame frame(model);
    REQUIRE(frame.complete());
    const ComplexVector a = frame_ground(frame, 0.5, 0);
    const ComplexVector b = frame_ground(frame, 0.5, 2);
    const Complex ca(0.6, 0.1);
    const Complex cb(-0.2, 0.77);
    ComplexMatrix cols(a.size(), 3);
    cols.col(0) = a;
    cols.col(1) = b;
    cols.col(2) = ca * a + cb * b;
    const LinearDrive drive{4.0, 0.5, 0.9, 1.0, 1.0};
    const ComplexMatrix y = propagate(frame, cols, drive, {});
    CHECK((y.col(2) - (ca * y.col(0) + cb * y.col(1))).norm() < 1e-8);
}

TEST_CASE("isotropic eigenstate only picks up the dynamical phase") {
    const HamiltonianModel model = make_model(4, 1.0, 0.0);
    const IsotropicFrame frame(model);
    const Eigen::Index i = 3;
    ComplexVector psi = ComplexVector::Zero(frame.size());
    psi(i) = 1.0;
    const RampSchedule schedule({RampSegment::linear(0.5, 0.6, 0.01)});
    IntegratorConfig cfg;
    cfg.rtol = 1e-11;
    const EvolutionResult r = integrate_tdse(frame, psi, schedule, cfg);
    const double t = schedule.total_time();
    const double phase = frame.energies()(i) * t - frame.angular_momentum()(i) * 0.5 * (0.5 + 0.6) * t;
    CHECK(std::abs(r.amplitudes(i) - std::polar(1.0, -phase)) < 1e-7);
    CHECK(std::abs(r.amplitudes.norm() - 1.0) < 1e-9);
}

TEST_CASE("free evolution") {
    const HamiltonianModel model = make_model(4, 1.0);
    const IsotropicFrame frame(model, {.energy_window = 2.45, .omega_min = 0.8, .omega_max = 0.84});
    const double omega = 0.82;
    const FrameSpectrum spec = frame.diagonalize(omega);
    const ComplexVector v0 = spec.vectors.col(0).cast<Complex>();
    const ComplexVector v1 = spec.vectors.col(1).cast<Complex>();

    SUBCASE("tau = 0 and eigenstates") {
        const ComplexVector mix = (v0 + v1) / std::sqrt(2.0);
        CHECK(free_evolution(spec, mix, 0.0) == mix);
        CHECK(state_fidelity(free_evolution(spec, v1, 7.0), v1) == doctest::Approx(1.0).epsilon(1e-13));
    }
    SUBCASE("two-level relative phase") {
        const double tau = 37.0;
        const ComplexVector out = free_evolution(spec, ComplexVector((v0 + v1) / std::sqrt(2.0)), tau);
        const Complex c0 = v0.dot(out);
        const Complex c1 = v1.dot(out);
        const double rel = std::arg(c0 / c1);
        const double expected = std::remainder((spec.values(1) - spec.values(0)) * tau, 2.0 * std::numbers::pi);
        CHECK(std::abs(std::remainder(rel - expected, 2.0 * std::numbers::pi)) < 1e-9);
        CHECK(out.norm() == doctest::Approx(1.0).epsilon(1e-13));
    }
    SUBCASE("TDSE at constant rotation agrees") {
        ComplexVector psi = spec.vectors.leftCols(4).cast<Complex>() * ComplexVector::Constant(4, 0.5);
        psi.normalize();
        const double tau = 20.0;
        IntegratorConfig cfg;
        cfg.rtol = 1e-11;
        cfg.atol = 1e-14;
        const EvolutionResult r = integrate_tdse(frame, psi, RampSchedule({RampSegment::hold(omega, tau)}), cfg);
        const ComplexVector exact = free_evolution(spec, psi, tau);
        CHECK(1.0 - state_fidelity(r.amplitudes, exact) < 1e-8);
        const ComplexVector lanczos = free_evolution(frame, psi, omega, tau);
        CHECK((lanczos - exact).norm() < 1e-9);
    }
    SUBCASE("Krylov propagator matches the dense exponential") {
        const ComplexVector psi = ((v0 + Complex(0.0, 1.0) * v1) / std::sqrt(2.0)).eval();
        const ComplexVector k = krylov_propagate(frame, psi, 0.8, 0.5, 13.0);
        const ComplexVector d = oracle::expm_apply(frame.dense_hamiltonian(0.8, 0.5), psi, 13.0);
        CHECK((k - d).norm() < 1e-10);
    }
}

TEST_CASE("large frames use the Lanczos exponential") {
    const HamiltonianModel model = make_model(8, 1.0);
    const IsotropicFrame frame(model, {.energy_window = 4.0, .omega_min = 0.81, .omega_max = 0.84});
    REQUIRE(frame.size() > 400);
    const FrameSpectrum spec = frame.diagonalize(0.825);
    ComplexVector psi = spec.vectors.leftCols(3).cast<Complex>() * ComplexVector::Ones(3);
    psi(0) += Complex(0.0, 0.1);
    psi.normalize();
    const ComplexVector a = free_evolution(frame, psi, 0.825, 10.0);
    const ComplexVector b = free_evolution(spec, psi, 10.0);
    CHECK((a - b).norm() < 1e-9);
}

TEST_CASE("sudden shifts") {
    const HamiltonianModel model = make_model(4, 1.0);
    const IsotropicFrame frame(model, {.energy_window = 2.45, .omega_min = 0.8, .omega_max = 0.84});
    const ComplexVector psi = frame_ground(frame, 0.82);

    SUBCASE("no shift is the identity") {
        const auto r = sudden_shift(frame, psi, 0.82, 0.82, 5e-4, {});
        CHECK(r.fidelity == 1.0);
        CHECK(r.evolution.amplitudes == psi);
    }
    SUBCASE("instantaneous mode keeps the state") {
        const auto r = sudden_shift(frame, psi, 0.82, 0.818, 5e-4, {}, SuddenMode::instantaneous);
        CHECK(r.fidelity == 1.0);
        CHECK(r.evolution.amplitudes == psi);
    }
    SUBCASE("guard ratio") {
        const double dl = frame.moments(psi).stddev;
        REQUIRE(dl > 0.0);
        const double ratio = sudden_guard_ratio(frame, psi, 2e-3, 5e-4);
        CHECK(ratio == doctest::Approx(2e-3 / std::sqrt(2.0 * 5e-4 / dl)));
        const auto r = sudden_shift(frame, psi, 0.82, 0.818, 5e-4, {});
        CHECK(r.guard_ratio == doctest::Approx(ratio));
        CHECK(r.guard_violated == (ratio > 1.0));
        CHECK(r.fidelity > 0.96);
        CHECK(r.fidelity <= 1.0 + 1e-12);
        CHECK(r.evolution.diagnostics.norm_drift <= 1e-6);
    }
}

TEST_CASE("slow ramp across a gapped region stays adiabatic") {
    const HamiltonianModel model = make_model(4, 1.0);
    const double p01 = 0.01;
    const RampPlan plan = plan_adiabatic_ramp(model, 0.70, 0.72, 0.01, p01);
    const IsotropicFrame frame(model, {.energy_window = 2.45, .omega_min = 0.7, .omega_max = 0.72});
    const ComplexVector start = frame_ground(frame, 0.70);
    const EvolutionResult r = integrate_tdse(frame, start, plan.schedule, {});
    CHECK(state_fidelity(r.amplitudes, frame_ground(frame, 0.72)) >= 1.0 - p01);
}

TEST_CASE("ramp plan rates") {
    const HamiltonianModel model = make_model(4, 1.0);
    const RampPlan plan = plan_adiabatic_ramp(model, 0.4, 0.8, 0.01, 0.01);
    const auto& segs = plan.schedule.segments();
    REQUIRE(segs.size() == 40);
    REQUIRE(plan.segment_gaps.size() == segs.size());
    // 10 sub-grid points per segment, shared edges
    CHECK(plan.sample_omegas.size() == 40 * 9 + 1);
    for (std::size_t i = 0; i < segs.size(); ++i) {
        CHECK(segs[i].gamma == doctest::Approx(plan.segment_gaps[i] * plan.segment_gaps[i] * 0.1 / 4.0));
        double gmin = 1e300;
        for (std::size_t j = 0; j < plan.sample_omegas.size(); ++j) {
            const double w = plan.sample_omegas[j];
            if (w >= segs[i].omega_start - 1e-12 && w <= segs[i].omega_end + 1e-12) gmin = std::min(gmin, plan.sample_gaps[j]);
        }
        CHECK(plan.segment_gaps[i] == doctest::Approx(gmin));
    }
    CHECK(plan.total_time == doctest::Approx(plan.schedule.total_time()));
    CHECK(plan.seconds == doctest::Approx(plan.total_time / (2.0 * std::numbers::pi * 2100.0)));
    CHECK(plan.feasible == (plan.seconds <= 16.0));

    // γ ∝ √p01: four times the tolerance halves the time
    const RampPlan loose = plan_adiabatic_ramp(model, 0.4, 0.8, 0.01, 0.04);
    CHECK(loose.total_time == doctest::Approx(0.5 * plan.total_time));

    // endpoint sampling can only see larger gaps
    const RampPlan ends = plan_adiabatic_ramp(model, 0.4, 0.8, 0.01, 0.01, {.sampling = GapSampling::endpoints});
    CHECK(ends.total_time <= plan.total_time * (1.0 + 1e-12));

    CHECK_THROWS_AS(plan_adiabatic_ramp(model, 0.8, 0.4, 0.01, 0.01), InvalidArgument);
    CHECK_THROWS_AS(plan_adiabatic_ramp(make_model(4, 1.0, 0.0), 0.4, 0.9, 0.01, 0.01), NumericalError);
}

TEST_CASE("anisotropy switch-off") {
    SUBCASE("without anisotropy it is the identity on populations") {
        const HamiltonianModel model = make_model(4, 1.0, 0.0);
        const IsotropicFrame frame(model, {.energy_window = 2.45, .omega_min = 0.8, .omega_max = 0.84});
        ComplexVector psi = ComplexVector::Zero(frame.size());
        psi(0) = 0.6;
        psi(1) = Complex(0.0, 0.8);
        const auto r = anisotropy_switch_off(frame, psi, 0.82, 100.0);
        CHECK((r.evolution.amplitudes.cwiseAbs() - psi.cwiseAbs()).norm() < 1e-8);
    }
    SUBCASE("moving subspace agrees with the full frame") {
        const HamiltonianModel model = make_model(4, 1.0);
        const IsotropicFrame frame(model, {.energy_window = 2.45, .omega_min = 0.8, .omega_max = 0.84});
        const ComplexVector psi = frame_ground(frame, 0.82);
        SwitchOffOptions full;
        full.subspace_levels = 0;
        const auto a = anisotropy_switch_off(frame, psi, 0.82, 200.0);
        const auto b = anisotropy_switch_off(frame, psi, 0.82, 200.0, full);
        const auto wa = frame.block_weights(a.evolution.amplitudes);
        const auto wb = frame.block_weights(b.evolution.amplitudes);
        REQUIRE(wa.size() == wb.size());
        for (std::size_t i = 0; i < wa.size(); ++i) CHECK(std::abs(wa[i].second - wb[i].second) < 1e-4);
        CHECK(a.subspace_dimension < b.subspace_dimension);
        CHECK(a.discarded_weight < 1e-4);
    }
    SUBCASE("adiabatic limit for the cat sends ground to L=N and the excited state to L=0") {
        const HamiltonianModel model = make_model(6, 1.0);
        const double wc = find_critical_frequency(model, 0.78, 0.9).omega_c;
        const IsotropicFrame frame(model, {.energy_window = 2.45, .omega_min = wc - 0.01, .omega_max = wc + 0.01});
        const std::vector<ComplexVector> in{frame_ground(frame, wc, 0), frame_ground(frame, wc, 1)};
        double discarded = 0.0;
        const auto out = adiabatic_switch_off_limit(frame, in, wc, 24, &discarded);
        CHECK(discarded < 1e-12);
        CHECK(dominant_l(frame, out[0]) == 6);
        CHECK(dominant_l(frame, out[1]) == 0);
        for (const auto& v : out) CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("duration doubling converges away from the avoided crossing") {
        const HamiltonianModel model = make_model(4, 1.0);
        const IsotropicFrame frame(model, {.energy_window = 2.45, .omega_min = 0.6, .omega_max = 0.6});
        const auto conv = converge_switch_off_duration(frame, {frame_ground(frame, 0.6)}, 0.6, 10.0, 2560.0);
        CHECK(conv.converged);
        CHECK(conv.change < 1e-3);
        CHECK(conv.durations.size() == conv.changes.size() + 1);
    }
}

TEST_CASE("trajectory CSV header") {
    std::ostringstream out;
    write_trajectory_csv(out, {TracePoint{0.0, 0.5, 1.0, 1.0, 3.0, 0.9}});
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "time,omega,scale,norm,mean_L,ground_fidelity");
    std::getline(in, line);
    CHECK(std::count(line.begin(), line.end(), ',') == 5);
}
