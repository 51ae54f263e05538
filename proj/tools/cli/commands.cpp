#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "oracles.hpp"
#include "rotgyro/csv.hpp"
#include "rotgyro/digest.hpp"
#include "rotgyro/dynamics.hpp"
#include "rotgyro/metrology.hpp"
#include "rotgyro/spectrum.hpp"
#include "rotgyro/states.hpp"

#ifndef ROTGYRO_VERSION
#define ROTGYRO_VERSION "unknown"
#endif

namespace rotgyro::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// NaN and infinities are not valid JSON numbers
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

const char* scheme_name(MeasurementScheme s) { return s == MeasurementScheme::l_moment ? "l_moment" : "binomial"; }

CriticalOptions critical_options(const json& cfg) {
    CriticalOptions o;
    o.tolerance = cfg.at("solver").at("critical_tolerance").get<double>();
    o.solver = solver_options(cfg);
    return o;
}

double resolve_omega_c(const HamiltonianModel& model, const json& cfg, json* report = nullptr) {
    const auto& s = cfg.at("stage");
    if (!s.at("omega_c").is_null()) return s.at("omega_c").get<double>();
    const CriticalPoint cp = find_critical_frequency(model, s.at("critical_lo").get<double>(),
                                                     s.at("critical_hi").get<double>(), critical_options(cfg));
    if (report) {
        (*report)["omega_c"] = cp.omega_c;
        (*report)["imbalance_at_omega_c"] = cp.imbalance;
        (*report)["bisection_iterations"] = cp.iterations;
        (*report)["min_gap"] = cp.min_gap;
        (*report)["min_gap_omega"] = cp.min_gap_omega;
    }
    return cp.omega_c;
}

json model_summary(const ModelBundle& b) {
    const auto& p = b.model->params();
    return {{"n_particles", p.spec.n_particles}, {"l_max", p.spec.l_max}, {"n_ll_max", p.spec.n_ll_max},
            {"dimension", b.basis->dimension()},   {"g", p.g},                {"g_n_over_6", p.reduced_coupling()},
            {"anisotropy", p.anisotropy},        {"anisotropy_convention", to_string(p.convention)},
            {"quadrupole_coefficient", p.quadrupole_coefficient()}};
}

// ---------------------------------------------------------------- spectrum

json run_spectrum(RunContext& ctx) {
    const json& cfg = ctx.config();
    const ModelBundle b = build_model(model_params(cfg), ctx.cache());
    const auto& sp = cfg.at("spectrum");
    const auto omegas = linspace(sp.at("omega_min").get<double>(), sp.at("omega_max").get<double>(),
                                 sp.at("points").get<int>());
    SpectrumOptions opts;
    opts.levels = std::min<int>(sp.at("levels").get<int>(), static_cast<int>(b.basis->dimension()));
    opts.solver = solver_options(cfg);
    opts.cache = ctx.cache();
    const auto solutions = sweep(*b.model, omegas, opts);

    write_spectrum_csv(*ctx.open_csv("spectrum.csv"), solutions, opts.levels);

    double min_gap = std::numeric_limits<double>::infinity(), min_gap_omega = kNaN, worst_residual = 0.0;
    for (const auto& s : solutions) {
        worst_residual = std::max(worst_residual, s.max_residual);
        if (s.levels() > 1 && s.gap() < min_gap) {
            min_gap = s.gap();
            min_gap_omega = s.omega;
        }
    }
    return {{"model", model_summary(b)},    {"levels", opts.levels}, {"points", omegas.size()},
            {"min_gap", number(min_gap)},    {"min_gap_omega", number(min_gap_omega)},
            {"max_residual", worst_residual}};
}

// ---------------------------------------------------------------- ground-state

json run_ground_state(RunContext& ctx) {
    const json& cfg = ctx.config();
    const ModelBundle b = build_model(model_params(cfg), ctx.cache());
    json results{{"model", model_summary(b)}};
    const double omega_c = resolve_omega_c(*b.model, cfg, &results);
    results["omega_c"] = omega_c;

    const EigenSolution sol = solve_at(*b.model, omega_c, std::min<int>(2, static_cast<int>(b.basis->dimension())),
                                       solver_options(cfg), nullptr, ctx.cache());
    const ManyBodyState gs = ground_state(*b.model, sol);
    const NaturalOrbitals no = spdm(gs);
    const TwoModeDecomposition tm = two_mode_project(gs, no);
    const AngularMomentumMoments mom = angular_momentum_moments(gs);

    {
        auto out = ctx.open_csv("two_mode_pn.csv");
        CsvWriter w(*out, {"n", "quanta_in_mode_2", "c_real", "c_imag", "p_n"});
        for (std::size_t n = 0; n < tm.probabilities.size(); ++n) {
            w.row({static_cast<double>(n), 2.0 * static_cast<double>(n), tm.coefficients[n].real(),
                   tm.coefficients[n].imag(), tm.probabilities[n]});
        }
    }
    {
        auto out = ctx.open_csv("natural_orbitals.csv");
        CsvWriter w(*out, {"index", "population", "m_parity"});
        for (Eigen::Index i = 0; i < no.populations.size(); ++i) {
            w.row({static_cast<double>(i), no.populations(i), static_cast<double>(no.m_parity[static_cast<std::size_t>(i)])});
        }
    }
    json pn = json::array();
    for (double p : tm.probabilities) pn.push_back(p);
    results["energies"] = {sol.values(0), sol.levels() > 1 ? number(sol.values(1)) : json(nullptr)};
    results["gap_at_omega_c"] = number(sol.gap());
    results["population_imbalance"] = population_imbalance(gs);
    results["leading_population_even_m"] = no.leading_population(+1);
    results["leading_population_odd_m"] = no.leading_population(-1);
    results["fidelity"] = tm.fidelity;
    results["odd_sector_weight"] = tm.odd_sector_weight;
    results["projected_two_mode_entropy"] = mode_entropy(tm);
    results["p_n"] = pn;
    results["mean_l"] = mom.mean;
    results["delta_l_squared"] = mom.variance();
    return results;
}

// ---------------------------------------------------------------- ramp-plan

json plan_json(const RampPlan& plan) {
    return {{"total_time", plan.total_time},
            {"seconds", plan.seconds},
            {"feasible", plan.feasible},
            {"segments", plan.schedule.segments().size()},
            {"min_gap", plan.segment_gaps.empty() ? json(nullptr)
                                                  : json(*std::min_element(plan.segment_gaps.begin(), plan.segment_gaps.end()))}};
}

json run_ramp_plan(RunContext& ctx) {
    const json& cfg = ctx.config();
    const ModelParams params = model_params(cfg);
    const ModelBundle b = build_model(params, ctx.cache());
    json results{{"model", model_summary(b)}};
    const double omega_c = resolve_omega_c(*b.model, cfg, &results);
    results["omega_c"] = omega_c;

    const auto& s = cfg.at("stage");
    const double w0 = s.at("omega_start").get<double>(), dw = s.at("delta_omega").get<double>();
    const double p01 = s.at("p01").get<double>();
    const RampPlanOptions base = ramp_plan_options(cfg);

    auto plans_out = ctx.open_csv("ramp_plan.csv");
    CsvWriter plans(*plans_out, {"sampling", "segment", "omega_start", "omega_end", "min_gap", "gamma", "duration"});
    auto gaps_out = ctx.open_csv("ramp_gaps.csv");
    CsvWriter gaps(*gaps_out, {"sampling", "omega", "gap"});
    json variants = json::object();
    for (GapSampling sampling : {GapSampling::subgrid, GapSampling::endpoints}) {
        RampPlanOptions o = base;
        o.sampling = sampling;
        const RampPlan plan = plan_adiabatic_ramp(*b.model, w0, omega_c, dw, p01, o);
        const std::string name = sampling == GapSampling::subgrid ? "subgrid" : "endpoints";
        const auto& segs = plan.schedule.segments();
        for (std::size_t i = 0; i < segs.size(); ++i) {
            plans.row({name, std::to_string(i), format_number(segs[i].omega_start), format_number(segs[i].omega_end),
                       format_number(plan.segment_gaps[i]), format_number(segs[i].gamma), format_number(segs[i].duration())});
        }
        for (std::size_t i = 0; i < plan.sample_omegas.size(); ++i) {
            gaps.row({name, format_number(plan.sample_omegas[i]), format_number(plan.sample_gaps[i])});
        }
        variants[name] = plan_json(plan);
    }
    results["plans"] = variants;
    results["primary_sampling"] = cfg.at("ramp").at("sampling");

    // sweeps over gN/6 at fixed N and over N at fixed gN/6
    const auto g_sweep = cfg.at("ramp").at("g_n_over_6_sweep").get<std::vector<double>>();
    const auto n_sweep = cfg.at("ramp").at("n_sweep").get<std::vector<int>>();
    if (!g_sweep.empty() || !n_sweep.empty()) {
        auto sweep_out = ctx.open_csv("ramp_sweep.csv");
        CsvWriter w(*sweep_out, {"variable", "n_particles", "g_n_over_6", "omega_c", "total_time", "seconds", "feasible"});
        json rows = json::array();
        auto one = [&](const std::string& variable, const ModelParams& p) {
            const ModelBundle mb = build_model(p, ctx.cache());
            json tmp = cfg;
            tmp["stage"]["omega_c"] = nullptr;
            const double wc = resolve_omega_c(*mb.model, tmp);
            const RampPlan plan = plan_adiabatic_ramp(*mb.model, w0, wc, dw, p01, base);
            w.row({variable, std::to_string(p.spec.n_particles), format_number(p.reduced_coupling()), format_number(wc),
                   format_number(plan.total_time), format_number(plan.seconds), plan.feasible ? "1" : "0"});
            rows.push_back({{"variable", variable},
                            {"n_particles", p.spec.n_particles},
                            {"g_n_over_6", p.reduced_coupling()},
                            {"omega_c", wc},
                            {"total_time", plan.total_time},
                            {"seconds", plan.seconds},
                            {"feasible", plan.feasible}});
        };
        for (double g6 : g_sweep) {
            ModelParams p = params;
            p.g = 6.0 * g6 / p.spec.n_particles;
            one("g_n_over_6", p);
        }
        for (int n : n_sweep) {
            ModelParams p = params;
            const int extra = params.spec.l_max - params.spec.n_particles;
            p.spec.n_particles = n;
            p.spec.l_max = n + extra;
            p.g = 6.0 * params.reduced_coupling() / n;
            one("n_particles", p);
        }
        results["sweep"] = rows;
    }
    return results;
}

// ---------------------------------------------------------------- protocol

json precision_json(const PrecisionCurve& c) {
    double best = std::numeric_limits<double>::infinity(), worst = 0.0;
    int divergent = 0, below = 0, counted = 0;
    for (std::size_t i = 0; i < c.scaled.size(); ++i) {
        if (c.divergent[i]) {
            ++divergent;
            continue;
        }
        ++counted;
        best = std::min(best, c.scaled[i]);
        worst = std::max(worst, c.scaled[i]);
        if (c.scaled[i] < c.shot_noise) ++below;
    }
    return {{"shot_noise", c.shot_noise},
            {"min_scaled", number(best)},
            {"max_scaled", number(counted ? worst : kNaN)},
            {"points", c.scaled.size()},
            {"divergent_points", divergent},
            {"below_shot_noise", below},
            {"all_below_shot_noise", counted > 0 && below == counted}};
}

void write_points_csv(std::ostream& out, const ProtocolResult& r) {
    std::vector<std::string> header{"omega_ext", "omega_delta", "shift_fidelity", "decouple_fidelity",
                                    "guard_ratio", "guard_violated", "energy_drift", "p0"};
    for (int l : r.labels) header.push_back("p_L" + std::to_string(l));
    CsvWriter w(out, header);
    for (const auto& p : r.points) {
        std::vector<double> row{p.omega_ext,    p.omega_delta,   p.shift_fidelity, p.decouple_fidelity,
                                p.guard_ratio, p.guard_violated ? 1.0 : 0.0, p.energy_drift, p.p0};
        row.insert(row.end(), p.p_l.begin(), p.p_l.end());
        w.row(row);
    }
}

json run_protocol(RunContext& ctx) {
    const json& cfg = ctx.config();
    const ModelBundle b = build_model(model_params(cfg), ctx.cache());
    json results{{"model", model_summary(b)}};
    ProtocolConfig pc = protocol_config(cfg);
    pc.omega_c = resolve_omega_c(*b.model, cfg, &results);

    const Protocol protocol(*b.model, pc);
    const ProtocolResult r = protocol.run();
    write_points_csv(*ctx.open_csv("protocol_points.csv"), r);
    json schemes = json::object();
    for (MeasurementScheme s : {MeasurementScheme::l_moment, MeasurementScheme::binomial}) {
        const PrecisionCurve c = estimate_precision(r, s);
        write_precision_csv(*ctx.open_csv(std::string("precision_") + scheme_name(s) + ".csv"), c);
        schemes[scheme_name(s)] = precision_json(c);
    }
    const PrecisionCurve cl = estimate_precision(r, MeasurementScheme::l_moment);
    const PrecisionCurve cb = estimate_precision(r, MeasurementScheme::binomial);
    bool binomial_better = true;
    double max_drift = 0.0, min_shift_fid = 1.0;
    int guard = 0;
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        if (!cl.divergent[i] && !cb.divergent[i] && cb.scaled[i] > cl.scaled[i]) binomial_better = false;
        max_drift = std::max(max_drift, r.points[i].energy_drift);
        min_shift_fid = std::min(min_shift_fid, r.points[i].shift_fidelity);
        guard += r.points[i].guard_violated ? 1 : 0;
    }
    results["omega_c"] = r.omega_c;
    results["tau"] = r.tau;
    results["frame_size"] = r.frame_size;
    results["frame_ground_overlap"] = number(r.frame_ground_overlap);
    results["initial_delta_l_squared"] = r.initial_moments.variance();
    results["stage_one_time"] = r.stage_one_time;
    results["switch_off"] = {{"mode", cfg.at("stage").at("switch_off")},
                             {"duration", r.switch_off_duration},
                             {"converged", r.switch_off_converged},
                             {"discarded_weight", r.switch_off_discarded}};
    results["schemes"] = schemes;
    results["binomial_not_worse_than_l_moment"] = binomial_better;
    results["guard_violations"] = guard;
    results["min_shift_fidelity"] = min_shift_fid;
    results["max_free_evolution_energy_drift"] = max_drift;
    results["integration"] = {{"steps", r.diagnostics.steps},
                              {"rejected", r.diagnostics.rejected},
                              {"norm_drift", r.diagnostics.norm_drift},
                              {"renormalized", r.diagnostics.renormalized}};
    return results;
}

// ---------------------------------------------------------------- qfi

struct QfiRow {
    QfiEstimate estimate;
    bool stable = true;
    std::string note;
};

QfiRow safe_qfi(const Protocol& p, double omega_ext, double delta) {
    QfiRow row;
    try {
        row.estimate = qfi_pure([&](double w) { return p.decoupled_state(w); }, omega_ext, delta);
    } catch (const NumericalError& e) {
        // a kink of the state family (e.g. the ramp duration at Ω_ext = 0) makes δ matter
        row.stable = false;
        row.note = e.what();
        row.estimate.value = row.estimate.coarse = kNaN;
    }
    return row;
}

json run_qfi(RunContext& ctx) {
    const json& cfg = ctx.config();
    const ModelBundle b = build_model(model_params(cfg), ctx.cache());
    json results{{"model", model_summary(b)}};
    ProtocolConfig pc = protocol_config(cfg);
    pc.omega_c = resolve_omega_c(*b.model, cfg, &results);
    const double delta = cfg.at("qfi").at("delta").get<double>();

    // QFI against τ at the first grid point
    const double w_tau = pc.omega_ext.front();
    auto tau_out = ctx.open_csv("qfi_tau.csv");
    CsvWriter tw(*tau_out, {"tau", "omega_ext", "qfi", "qfi_coarse", "relative_change", "quadratic", "quadratic_valid", "stable"});
    json tau_rows = json::array();
    for (double tau : cfg.at("qfi").at("taus").get<std::vector<double>>()) {
        ProtocolConfig c = pc;
        c.tau = tau;
        c.omega_ext = {w_tau};
        const Protocol p(*b.model, c);
        const AngularMomentumMoments mom = p.frame().moments(p.initial());
        const QfiRow row = safe_qfi(p, w_tau, delta);
        const QfiComparison cmp = compare_qfi(row.estimate, mom, tau);
        tw.row({tau, w_tau, row.estimate.value, row.estimate.coarse, row.estimate.relative_change, cmp.quadratic,
                cmp.quadratic_valid ? 1.0 : 0.0, row.stable ? 1.0 : 0.0});
        tau_rows.push_back({{"tau", tau},
                            {"qfi", number(row.estimate.value)},
                            {"quadratic", cmp.quadratic},
                            {"quadratic_valid", row.stable && cmp.quadratic_valid},
                            {"stable", row.stable}});
    }
    results["vs_tau"] = tau_rows;
    results["vs_tau_omega_ext"] = w_tau;

    // QFI and Cramér–Rao products across the Ω_ext grid at the configured τ
    const Protocol p(*b.model, pc);
    const ProtocolResult r = p.run();
    const PrecisionCurve cl = estimate_precision(r, MeasurementScheme::l_moment);
    const PrecisionCurve cb = estimate_precision(r, MeasurementScheme::binomial);
    const double quadratic = qfi_quadratic_approx(r.initial_moments, pc.tau);
    auto grid_out = ctx.open_csv("qfi_omega.csv");
    CsvWriter gw(*grid_out, {"omega_ext", "qfi", "qfi_coarse", "relative_change", "quadratic", "stable",
                             "cramer_rao_l_moment", "cramer_rao_binomial"});
    double worst_cr = std::numeric_limits<double>::infinity();
    int unstable = 0;
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        const QfiRow row = safe_qfi(p, r.points[i].omega_ext, delta);
        unstable += row.stable ? 0 : 1;
        const double f = row.estimate.value;
        const double crl = cl.divergent[i] ? kNaN : cl.delta_omega[i] * std::sqrt(f);
        const double crb = cb.divergent[i] ? kNaN : cb.delta_omega[i] * std::sqrt(f);
        for (double v : {crl, crb}) {
            if (std::isfinite(v)) worst_cr = std::min(worst_cr, v);
        }
        gw.row({r.points[i].omega_ext, f, row.estimate.coarse, row.estimate.relative_change, quadratic,
                row.stable ? 1.0 : 0.0, crl, crb});
    }
    results["tau"] = pc.tau;
    results["min_cramer_rao_product"] = number(worst_cr);
    results["unstable_points"] = unstable;
    return results;
}

// ---------------------------------------------------------------- convergence

json run_convergence(RunContext& ctx) {
    const json& cfg = ctx.config();
    const ModelParams base = model_params(cfg);
    const auto& cv = cfg.at("convergence");
    const int levels = cv.at("levels").get<int>();
    const bool critical = cv.at("critical").get<bool>();
    json results;
    double omega = kNaN;
    if (!cv.at("omega").is_null()) {
        omega = cv.at("omega").get<double>();
    } else {
        const ModelBundle b = build_model(base, ctx.cache());
        json report;
        omega = resolve_omega_c(*b.model, cfg, &report);
        results["reference_critical"] = report;
    }
    results["omega"] = omega;

    std::vector<std::string> header{"n_ll_max", "l_max", "dimension"};
    for (int k = 0; k < levels; ++k) header.push_back("E_" + std::to_string(k));
    header.push_back("omega_c");
    auto out = ctx.open_csv("convergence.csv");
    CsvWriter w(*out, header);
    json rows = json::array();
    for (int nll : cv.at("n_ll_max").get<std::vector<int>>()) {
        for (int extra : cv.at("l_max_extra").get<std::vector<int>>()) {
            ModelParams p = base;
            p.spec.n_ll_max = nll;
            p.spec.l_max = p.spec.n_particles + extra;
            const ModelBundle b = build_model(p, ctx.cache());
            const int k = std::min<int>(levels, static_cast<int>(b.basis->dimension()));
            const EigenSolution s = solve_at(*b.model, omega, k, solver_options(cfg), nullptr, ctx.cache());
            double wc = kNaN;
            if (critical) {
                json tmp = cfg;
                tmp["stage"]["omega_c"] = nullptr;
                wc = resolve_omega_c(*b.model, tmp);
            }
            std::vector<double> row{static_cast<double>(nll), static_cast<double>(p.spec.l_max),
                                    static_cast<double>(b.basis->dimension())};
            json energies = json::array();
            for (int i = 0; i < levels; ++i) {
                const double e = i < k ? s.values(i) : kNaN;
                row.push_back(e);
                energies.push_back(number(e));
            }
            row.push_back(wc);
            w.row(row);
            rows.push_back({{"n_ll_max", nll},
                            {"l_max", p.spec.l_max},
                            {"dimension", b.basis->dimension()},
                            {"energies", energies},
                            {"omega_c", number(wc)}});
        }
    }
    results["truncations"] = rows;
    return results;
}

// ---------------------------------------------------------------- selftest

json run_selftest(RunContext& ctx) {
    const auto checks = oracle::run_all();
    auto out = ctx.open_csv("selftest.csv");
    CsvWriter w(*out, {"check", "value", "bound", "passed"});
    json rows = json::array();
    int failed = 0;
    for (const auto& c : checks) {
        w.row({c.name, format_number(c.value), format_number(c.bound), c.passed ? "1" : "0"});
        rows.push_back({{"check", c.name}, {"value", c.value}, {"bound", c.bound}, {"passed", c.passed}, {"detail", c.detail}});
        failed += c.passed ? 0 : 1;
    }
    json results{{"checks", rows}, {"failed", failed}, {"all_passed", failed == 0}};
    if (failed > 0) throw NumericalError(std::to_string(failed) + " oracle check(s) failed", "selftest");
    return results;
}

class NullBuffer : public std::streambuf {
protected:
    int overflow(int c) override { return c; }
};

}  // namespace

RunContext::RunContext(const json& merged) : config_(merged) {
    out_dir_ = merged.at("output").at("directory").get<std::string>();
    csv_ = false;
    for (const auto& f : merged.at("output").at("formats")) csv_ = csv_ || f == "csv";
    if (merged.at("cache").at("enabled").get<bool>()) cache_.emplace(merged.at("cache").at("path").get<std::string>());
}

std::unique_ptr<std::ostream> RunContext::open_csv(const std::string& name) {
    if (!csv_) {
        static NullBuffer null;
        return std::make_unique<std::ostream>(&null);
    }
    std::filesystem::create_directories(out_dir_);
    const auto path = out_dir_ / name;
    auto f = std::make_unique<std::ofstream>(path);
    if (!*f) throw Error("cannot write " + path.string());
    artifacts_.push_back(path.string());
    return f;
}

ModelBundle build_model(const ModelParams& params, const Cache* cache) {
    ModelBundle b;
    b.basis = std::make_shared<const ManyBodyBasis>(params.spec);
    if (cache == nullptr) {
        b.model = std::make_unique<HamiltonianModel>(params, b.basis);
        return b;
    }
    const int order = OrbitalIntegrals::required_order(b.basis->orbitals());
    const std::uint64_t key = Digest().add(std::string_view("interaction-tensor")).add(b.basis->digest()).add(order).value();
    const auto path = cache->path_for(key);
    std::optional<InteractionTensor> tensor = InteractionTensor::load(path, b.basis->digest(), order);
    if (!tensor) {
        tensor.emplace(b.basis->orbitals(), order);
        std::filesystem::create_directories(path.parent_path());
        tensor->save(path, b.basis->digest());
    }
    HamiltonianModel::Options opts;
    opts.tensor = &*tensor;
    b.model = std::make_unique<HamiltonianModel>(params, b.basis, opts);
    return b;
}

json execute(const std::string& subcommand, RunContext& ctx) {
    if (subcommand == "spectrum") return run_spectrum(ctx);
    if (subcommand == "ground-state") return run_ground_state(ctx);
    if (subcommand == "ramp-plan") return run_ramp_plan(ctx);
    if (subcommand == "protocol") return run_protocol(ctx);
    if (subcommand == "qfi") return run_qfi(ctx);
    if (subcommand == "convergence") return run_convergence(ctx);
    if (subcommand == "selftest") return run_selftest(ctx);
    throw ConfigError("unknown subcommand '" + subcommand + "'");
}

json versions() {
    std::ostringstream eigen;
    eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
    std::ostringstream nl;
    nl << NLOHMANN_JSON_VERSION_MAJOR << '.' << NLOHMANN_JSON_VERSION_MINOR << '.' << NLOHMANN_JSON_VERSION_PATCH;
    std::ostringstream sp;
    sp << SPDLOG_VER_MAJOR << '.' << SPDLOG_VER_MINOR << '.' << SPDLOG_VER_PATCH;
    return {{"rotgyro", ROTGYRO_VERSION}, {"cache_format", kCacheVersion}, {"eigen", eigen.str()},
            {"nlohmann_json", nl.str()},  {"cli11", CLI11_VERSION},         {"spdlog", sp.str()},
            {"compiler", __VERSION__}};
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"rotgyro: rotating-gas gyroscope simulations"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    std::string config_path;
    std::vector<std::string> overrides;
    std::string output;
    bool no_cache = false, verbose = false, quiet = false;
    app.add_option("-c,--config", config_path, "JSON configuration file");
    app.add_option("-s,--set", overrides, "override a key, e.g. --set model.n_particles=8")->expected(1, -1)->take_all();
    app.add_option("-o,--output", output, "output directory (same as --set output.directory=...)");
    app.add_flag("--no-cache", no_cache, "disable the eigen/tensor cache");
    app.add_flag("-v,--verbose", verbose, "debug logging");
    app.add_flag("-q,--quiet", quiet, "warnings and errors only");
    for (const auto& name : subcommands()) app.add_subcommand(name);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return 2;
    }
    const std::string sub = app.get_subcommands().front()->get_name();

    auto logger = spdlog::stderr_color_mt("rotgyro-" + std::to_string(reinterpret_cast<std::uintptr_t>(&app)));
    spdlog::set_default_logger(logger);
    spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

    json summary{{"subcommand", sub}, {"versions", versions()}};
    std::optional<RunContext> ctx;
    int code = 0;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        json user = config_path.empty() ? json::object() : read_config_file(config_path);
        for (const auto& o : overrides) apply_override(user, o);
        if (!output.empty()) apply_override(user, "output.directory=\"" + output + "\"");
        if (no_cache) apply_override(user, "cache.enabled=false");
        const json merged = merge_config(user);
        summary["config_hash"] = config_hash(merged);
        summary["config"] = merged;
        ctx.emplace(merged);
        spdlog::info("{}: config {}", sub, summary["config_hash"].get<std::string>());
        summary["results"] = execute(sub, *ctx);
        summary["status"] = "ok";
    } catch (const InvalidArgument& e) {
        code = 2;
        summary["status"] = "error";
        summary["error"] = {{"kind", "config"}, {"message", e.what()}};
    } catch (const NumericalError& e) {
        code = 3;
        summary["status"] = "error";
        summary["error"] = {{"kind", "numerical"}, {"stage", e.stage()}, {"message", e.what()}};
    } catch (const CapacityError& e) {
        code = 3;
        summary["status"] = "error";
        summary["error"] = {{"kind", "numerical"}, {"stage", "basis"}, {"message", e.what()}};
    } catch (const std::exception& e) {
        code = 1;
        summary["status"] = "error";
        summary["error"] = {{"kind", "runtime"}, {"message", e.what()}};
    }
    summary["exit_code"] = code;
    summary["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (code != 0) err << "rotgyro " << sub << ": " << summary["error"]["message"].get<std::string>() << '\n';

    if (ctx) {
        bool write_json = false;
        for (const auto& f : ctx->config().at("output").at("formats")) write_json = write_json || f == "json";
        json artifacts = ctx->artifacts();
        if (write_json) {
            try {
                std::filesystem::create_directories(ctx->output_dir());
                const auto path = ctx->output_dir() / (sub + ".summary.json");
                artifacts.push_back(path.string());
                summary["artifacts"] = artifacts;
                std::ofstream(path) << summary.dump(2) << '\n';
            } catch (const std::exception& e) {
                err << "rotgyro: cannot write summary: " << e.what() << '\n';
                if (code == 0) code = 1;
            }
        } else {
            summary["artifacts"] = artifacts;
        }
    }
    out << summary.dump(2) << '\n';
    spdlog::drop(logger->name());
    return code;
}

}  // namespace rotgyro::cli
