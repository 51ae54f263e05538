#include "config.hpp"

#include <cmath>
#include <fstream>

#include "rotgyro/digest.hpp"
#include "rotgyro/spectrum.hpp"

namespace rotgyro::cli {

json default_config() {
    return json::parse(R"({
  "model": {
    "n_particles": 12,
    "g_n_over_6": 1.0,
    "g": null,
    "anisotropy": 0.03,
    "anisotropy_convention": "elliptic",
    "l_max": null,
    "n_ll_max": 2,
    "even_parity": true
  },
  "stage": {
    "omega_start": 0.4,
    "delta_omega": 0.01,
    "p01": 0.01,
    "gamma_max": 0.0005,
    "tau": 10.0,
    "omega_c": null,
    "critical_lo": 0.78,
    "critical_hi": 1.0,
    "omega_ext": {"min": -0.005, "max": 0.005, "points": 21, "values": []},
    "sudden": "ramped",
    "stage_one": "direct",
    "switch_off": "adiabatic_limit",
    "switch_off_duration": 0.0,
    "switch_off_levels": 24,
    "frame_window": 2.45,
    "trap_frequency_hz": 2100.0,
    "lifetime_seconds": 16.0
  },
  "spectrum": {"omega_min": 0.0, "omega_max": 1.0, "points": 101, "levels": 8},
  "ramp": {"sampling": "subgrid", "subgrid_points": 10, "g_n_over_6_sweep": [], "n_sweep": []},
  "qfi": {"taus": [0.25, 0.5, 1.0, 2.0, 5.0, 10.0], "delta": 1e-05},
  "convergence": {"omega": null, "levels": 4, "l_max_extra": [0, 2, 4, 6], "n_ll_max": [1, 2], "critical": false},
  "solver": {
    "tol": 1e-10,
    "dense_threshold": 2000,
    "max_products": 20000,
    "critical_tolerance": 1e-09,
    "rtol": 1e-09,
    "atol": 1e-12
  },
  "output": {"directory": "out", "formats": ["csv", "json"]},
  "cache": {"path": "cache", "enabled": true}
})");
}

namespace {

bool is_integer(const json& v) { return v.is_number_integer() || v.is_number_unsigned(); }

void check(const json& def, const json& user, const std::string& path) {
    if (!user.is_object()) throw ConfigError("config: '" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
    for (const auto& [key, value] : user.items()) {
        const std::string where = path.empty() ? key : path + "." + key;
        if (!def.contains(key)) throw ConfigError("config: unknown key '" + where + "'");
        const json& d = def.at(key);
        bool ok = false;
        if (d.is_object()) {
            check(d, value, where);
            ok = true;
        } else if (d.is_null()) {
            ok = value.is_null() || value.is_number();
        } else if (d.is_number_float()) {
            ok = value.is_number();
        } else if (is_integer(d)) {
            ok = is_integer(value);
        } else if (d.is_boolean()) {
            ok = value.is_boolean();
        } else if (d.is_string()) {
            ok = value.is_string();
        } else if (d.is_array()) {
            ok = value.is_array();
            const bool strings = key == "formats";
            for (const auto& e : value) ok = ok && (strings ? e.is_string() : e.is_number());
        }
        if (!ok) throw ConfigError("config: '" + where + "' has the wrong type (" + std::string(value.type_name()) + ")");
    }
}

void merge_into(json& base, const json& user) {
    for (const auto& [key, value] : user.items()) {
        if (value.is_object() && base.at(key).is_object()) {
            merge_into(base[key], value);
        } else if (base.at(key).is_number_float()) {
            base[key] = value.get<double>();  // 1 and 1.0 must hash alike
        } else {
            base[key] = value;
        }
    }
}

template <class E>
E pick(const json& v, const std::string& where, std::initializer_list<std::pair<const char*, E>> options) {
    const auto s = v.get<std::string>();
    for (const auto& [name, e] : options) {
        if (s == name) return e;
    }
    throw ConfigError("config: '" + where + "' has unsupported value '" + s + "'");
}

}  // namespace

json merge_config(const json& user) {
    json merged = default_config();
    check(merged, user, "");
    merge_into(merged, user);

    const auto& m = merged["model"];
    if (m["n_particles"].get<long>() < 1) throw ConfigError("config: model.n_particles must be >= 1");
    if (!m["l_max"].is_null() && !is_integer(m["l_max"])) throw ConfigError("config: model.l_max must be an integer");
    if (m["n_ll_max"].get<long>() < 1) throw ConfigError("config: model.n_ll_max must be >= 1");
    for (const auto& f : merged["output"]["formats"]) {
        if (f != "csv" && f != "json") throw ConfigError("config: output.formats accepts 'csv' and 'json'");
    }
    // enumerations are checked here so that a bad value fails before any work
    (void)protocol_config(merged);
    (void)ramp_plan_options(merged);
    (void)model_params(merged);
    return merged;
}

json read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read " + path.string());
    try {
        return json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
}

void apply_override(json& user, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
    const std::string key(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &user;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
        if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        if (!node->contains(part)) (*node)[part] = json::object();
        node = &(*node)[part];
        start = dot + 1;
    }
}

std::string config_hash(const json& merged) {
    // where results go and whether they are cached does not change them
    json physics = merged;
    physics.erase("output");
    physics.erase("cache");
    Digest d;
    d.add(std::string_view(physics.dump()));
    return d.hex();
}

ModelParams model_params(const json& cfg) {
    const auto& m = cfg.at("model");
    const int n = m.at("n_particles").get<int>();
    ModelParams p;
    p.spec = TruncationSpec::standard(n);
    if (!m.at("l_max").is_null()) p.spec.l_max = m.at("l_max").get<int>();
    p.spec.n_ll_max = m.at("n_ll_max").get<int>();
    p.spec.even_parity = m.at("even_parity").get<bool>();
    p.g = m.at("g").is_null() ? 6.0 * m.at("g_n_over_6").get<double>() / n : m.at("g").get<double>();
    p.anisotropy = m.at("anisotropy").get<double>();
    p.convention = pick<AnisotropyConvention>(m.at("anisotropy_convention"), "model.anisotropy_convention",
                                              {{"elliptic", AnisotropyConvention::elliptic},
                                               {"quadrupole", AnisotropyConvention::quadrupole}});
    try {
        p.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return p;
}

SolverOptions solver_options(const json& cfg) {
    const auto& s = cfg.at("solver");
    SolverOptions o;
    o.tol = s.at("tol").get<double>();
    o.dense_threshold = s.at("dense_threshold").get<Eigen::Index>();
    o.max_products = s.at("max_products").get<int>();
    return o;
}

IntegratorConfig integrator_config(const json& cfg) {
    IntegratorConfig c;
    c.rtol = cfg.at("solver").at("rtol").get<double>();
    c.atol = cfg.at("solver").at("atol").get<double>();
    return c;
}

std::vector<double> omega_ext_grid(const json& cfg) {
    const auto& g = cfg.at("stage").at("omega_ext");
    if (!g.at("values").empty()) return g.at("values").get<std::vector<double>>();
    const int points = g.at("points").get<int>();
    if (points < 1) throw ConfigError("config: stage.omega_ext.points must be >= 1");
    if (points == 1) return {g.at("min").get<double>()};
    return linspace(g.at("min").get<double>(), g.at("max").get<double>(), points);
}

ProtocolConfig protocol_config(const json& cfg) {
    const auto& s = cfg.at("stage");
    ProtocolConfig p;
    if (!s.at("omega_c").is_null()) p.omega_c = s.at("omega_c").get<double>();
    p.critical_lo = s.at("critical_lo").get<double>();
    p.critical_hi = s.at("critical_hi").get<double>();
    p.omega_start = s.at("omega_start").get<double>();
    p.tau = s.at("tau").get<double>();
    p.omega_ext = omega_ext_grid(cfg);
    p.gamma_max = s.at("gamma_max").get<double>();
    p.ramp_delta_omega = s.at("delta_omega").get<double>();
    p.p01 = s.at("p01").get<double>();
    p.sudden = pick<SuddenMode>(s.at("sudden"), "stage.sudden",
                                {{"ramped", SuddenMode::ramped}, {"instantaneous", SuddenMode::instantaneous}});
    p.stage_one = pick<StageOneMode>(s.at("stage_one"), "stage.stage_one",
                                     {{"direct", StageOneMode::direct}, {"ramp", StageOneMode::ramp}});
    p.switch_off = pick<SwitchOffMode>(s.at("switch_off"), "stage.switch_off",
                                       {{"adiabatic_limit", SwitchOffMode::adiabatic_limit},
                                        {"dynamic", SwitchOffMode::dynamic}});
    p.switch_off_duration = s.at("switch_off_duration").get<double>();
    p.switch_off_options.subspace_levels = s.at("switch_off_levels").get<int>();
    p.frame_window = s.at("frame_window").get<double>();
    p.integrator = integrator_config(cfg);
    try {
        p.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return p;
}

RampPlanOptions ramp_plan_options(const json& cfg) {
    RampPlanOptions o;
    o.sampling = pick<GapSampling>(cfg.at("ramp").at("sampling"), "ramp.sampling",
                                   {{"subgrid", GapSampling::subgrid}, {"endpoints", GapSampling::endpoints}});
    o.subgrid_points = cfg.at("ramp").at("subgrid_points").get<int>();
    o.trap_frequency_hz = cfg.at("stage").at("trap_frequency_hz").get<double>();
    o.lifetime_seconds = cfg.at("stage").at("lifetime_seconds").get<double>();
    o.solver = solver_options(cfg);
    return o;
}

}  // namespace rotgyro::cli
