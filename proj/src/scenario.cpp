#include "bcl/scenario.hpp"

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "bcl/errors.hpp"

namespace bcl {

namespace {

void check_keys(const YAML::Node& node, const std::string& section,
                const std::set<std::string>& allowed)
{
    if (!node.IsMap()) {
        throw ConfigError("section '" + section + "' must be a map");
    }
    for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        if (!allowed.count(key)) {
            throw ConfigError("unknown key '" + key + "' in section '" + section + "'");
        }
    }
}

double get_num(const YAML::Node& node, const char* key, double fallback)
{
    return node[key] ? node[key].as<double>() : fallback;
}

} // namespace

Scenario load_scenario(const std::string& path)
{
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw ConfigError("cannot parse scenario file " + path + ": " + e.what());
    }
    check_keys(root, "(top level)",
               {"plant", "reference", "controller", "performance", "disturbance", "sim",
                "output"});

    Scenario s;

    if (root["plant"]) {
        const YAML::Node p = root["plant"];
        check_keys(p, "plant", {"preset", "order", "u_min", "u_max", "x0"});
        if (p["preset"]) {
            s.plant_preset = p["preset"].as<std::string>();
        }
        if (p["order"]) {
            s.order = p["order"].as<std::size_t>();
        }
        if (p["u_min"]) {
            s.u_min = p["u_min"].as<double>();
        }
        if (p["u_max"]) {
            s.u_max = p["u_max"].as<double>();
        }
        if (p["x0"]) {
            s.x0 = p["x0"].as<Vec>();
        }
    }

    if (root["reference"]) {
        s.reference = root["reference"].as<std::string>();
    }

    if (!root["controller"]) {
        throw ConfigError("scenario needs a controller section");
    }
    {
        const YAML::Node c = root["controller"];
        check_keys(c, "controller", {"type", "gains", "tau", "nu", "force_safe"});
        if (!c["type"] || !c["gains"]) {
            throw ConfigError("controller section needs 'type' and 'gains'");
        }
        s.controller.type = controller_from_string(c["type"].as<std::string>());
        s.controller.gains = c["gains"].as<Vec>();
        if (c["tau"]) {
            s.controller.tau = c["tau"].as<std::vector<double>>();
        }
        s.controller.nu = get_num(c, "nu", 0.0);
        if (c["force_safe"]) {
            s.controller.force_safe = c["force_safe"].as<bool>();
        }
    }

    if (root["performance"]) {
        const YAML::Node p = root["performance"];
        check_keys(p, "performance",
                   {"rho0", "rho_inf", "kappa", "k_rho", "delta_bar", "delta_underbar",
                    "sigma", "phi0", "epsilon_dz"});
        s.perf.rho0 = get_num(p, "rho0", s.perf.rho0);
        s.perf.rho_inf = get_num(p, "rho_inf", s.perf.rho_inf);
        s.perf.kappa = get_num(p, "kappa", s.perf.kappa);
        s.perf.k_rho = get_num(p, "k_rho", s.perf.k_rho);
        s.perf.delta_bar = get_num(p, "delta_bar", s.perf.delta_bar);
        s.perf.delta_under = get_num(p, "delta_underbar", s.perf.delta_under);
        s.perf.sigma = get_num(p, "sigma", s.perf.sigma);
        s.perf.phi0 = get_num(p, "phi0", s.perf.phi0);
        s.perf.eps_dz = get_num(p, "epsilon_dz", s.perf.eps_dz);
    }

    if (root["disturbance"]) {
        const YAML::Node d = root["disturbance"];
        check_keys(d, "disturbance", {"preset", "pulse_times", "pulse_amp", "pulse_decay"});
        if (d["preset"]) {
            s.dist_preset = d["preset"].as<std::string>();
        }
        if (d["pulse_times"]) {
            s.pulse_times = d["pulse_times"].as<std::vector<double>>();
        }
        s.pulse_amp = get_num(d, "pulse_amp", 0.0);
        s.pulse_decay = get_num(d, "pulse_decay", 0.1);
    }

    if (root["sim"]) {
        const YAML::Node n = root["sim"];
        check_keys(n, "sim", {"h", "T", "integrator", "record_every", "seed"});
        s.sim.h = get_num(n, "h", s.sim.h);
        s.sim.T = get_num(n, "T", s.sim.T);
        if (n["integrator"]) {
            const std::string v = n["integrator"].as<std::string>();
            if (v == "rk4") {
                s.sim.integrator = IntegratorKind::RK4;
            } else if (v == "euler") {
                s.sim.integrator = IntegratorKind::Euler;
            } else {
                throw ConfigError("unknown integrator: " + v);
            }
        }
        if (n["record_every"]) {
            s.sim.record_every = n["record_every"].as<int>();
        }
        if (n["seed"]) {
            s.sim.seed = n["seed"].as<std::uint64_t>();
        }
    }

    if (root["output"]) {
        const YAML::Node o = root["output"];
        check_keys(o, "output", {"csv", "events"});
        if (o["csv"]) {
            s.out_csv = o["csv"].as<std::string>();
        }
        if (o["events"]) {
            s.out_events = o["events"].as<std::string>();
        }
    }
    return s;
}

std::string scenario_to_yaml(const Scenario& s)
{
    YAML::Node root;
    root["plant"]["preset"] = s.plant_preset;
    if (s.plant_preset == "integrator-chain") {
        root["plant"]["order"] = s.order;
    }
    if (s.u_min) {
        root["plant"]["u_min"] = *s.u_min;
    }
    if (s.u_max) {
        root["plant"]["u_max"] = *s.u_max;
    }
    if (s.x0) {
        root["plant"]["x0"] = *s.x0;
    }
    root["reference"] = s.reference;
    root["controller"]["type"] = std::string(to_string(s.controller.type));
    root["controller"]["gains"] = s.controller.gains;
    root["controller"]["tau"] = s.controller.tau;
    if (s.controller.type == ControllerType::bpc) {
        root["controller"]["nu"] = s.controller.nu;
        root["controller"]["force_safe"] = s.controller.force_safe;
    }
    root["performance"]["rho0"] = s.perf.rho0;
    root["performance"]["rho_inf"] = s.perf.rho_inf;
    root["performance"]["kappa"] = s.perf.kappa;
    root["performance"]["k_rho"] = s.perf.k_rho;
    root["performance"]["delta_bar"] = s.perf.delta_bar;
    root["performance"]["delta_underbar"] = s.perf.delta_under;
    root["performance"]["sigma"] = s.perf.sigma;
    root["performance"]["phi0"] = s.perf.phi0;
    root["performance"]["epsilon_dz"] = s.perf.eps_dz;
    root["disturbance"]["preset"] = s.dist_preset;
    root["disturbance"]["pulse_times"] = s.pulse_times;
    root["disturbance"]["pulse_amp"] = s.pulse_amp;
    root["disturbance"]["pulse_decay"] = s.pulse_decay;
    root["sim"]["h"] = s.sim.h;
    root["sim"]["T"] = s.sim.T;
    root["sim"]["integrator"] =
        std::string(s.sim.integrator == IntegratorKind::RK4 ? "rk4" : "euler");
    root["sim"]["record_every"] = s.sim.record_every;
    root["sim"]["seed"] = s.sim.seed;
    root["output"]["csv"] = s.out_csv;
    root["output"]["events"] = s.out_events;

    std::ostringstream os;
    os << root << "\n";
    return os.str();
}

void save_scenario(const Scenario& s, const std::string& path)
{
    write_file_atomic(path, scenario_to_yaml(s));
}

ScenarioRuntime make_runtime(const Scenario& s, const std::string& name)
{
    ScenarioRuntime rt;
    rt.name = name;

    if (s.plant_preset == "paper-sec5") {
        rt.plant = make_paper_plant();
    } else if (s.plant_preset == "integrator-chain") {
        rt.plant = make_integrator_chain(s.order);
    } else {
        throw ConfigError("unknown plant preset: " + s.plant_preset);
    }
    if (s.u_min) {
        rt.plant.u_min = *s.u_min;
    }
    if (s.u_max) {
        rt.plant.u_max = *s.u_max;
    }
    rt.plant.validate();

    if (s.x0) {
        rt.x0 = *s.x0;
    } else if (s.plant_preset == "paper-sec5") {
        rt.x0 = {-0.8, 0.9, 0.1};
    } else {
        rt.x0 = Vec(rt.plant.n, 0.0);
    }
    if (rt.x0.size() != rt.plant.n) {
        throw ConfigError("x0 dimension does not match the plant order");
    }

    if (s.reference == "sin") {
        rt.reference = [](double t) { return Reference{std::sin(t), std::cos(t)}; };
    } else if (s.reference == "zero") {
        rt.reference = [](double) { return Reference{0.0, 0.0}; };
    } else {
        throw ConfigError("unknown reference preset: " + s.reference);
    }

    if (s.dist_preset == "paper-sec5") {
        rt.dist = make_paper_disturbance(s.pulse_amp, s.pulse_times, s.pulse_decay);
    } else if (s.dist_preset == "none") {
        rt.dist = make_zero_disturbance(rt.plant.n);
        rt.dist.pulse_times = s.pulse_times;
        rt.dist.pulse_amp = s.pulse_amp;
        rt.dist.pulse_decay = s.pulse_decay;
    } else {
        throw ConfigError("unknown disturbance preset: " + s.dist_preset);
    }

    rt.controller = s.controller;
    if (rt.controller.gains.size() != rt.plant.n) {
        throw ConfigError("need one gain per plant stage");
    }
    if (rt.plant.n >= 2 && rt.controller.tau.size() != rt.plant.n - 1) {
        throw ConfigError("need one tau per command filter");
    }
    for (double tau : rt.controller.tau) {
        if (!(tau > 0.0)) {
            throw ConfigError("filter constants must be positive");
        }
    }
    if (rt.controller.type == ControllerType::bpc && !(rt.controller.nu > -1.0)) {
        throw ConfigError("nu must exceed -1");
    }

    rt.perf = s.perf;
    rt.etf = EtfState::make(s.perf.delta_bar, s.perf.delta_under);
    rt.sim = s.sim;
    return rt;
}

DisturbanceSchedule make_disturbance_variant(const DisturbanceSchedule& base,
                                             std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-2.0, 2.0);
    std::uniform_real_distribution<double> scale(0.5, 1.5);

    DisturbanceSchedule d = base;
    for (double& t : d.pulse_times) {
        t = std::max(0.5, t + jitter(rng));
    }
    const double factor = scale(rng);
    const double sign = (rng() & 1) ? 1.0 : -1.0;
    d.pulse_amp = base.pulse_amp * factor * sign;
    return d;
}

std::string emit_plot_script(const SimulationTrace& trace, const std::string& csv_path)
{
    bool eta1_zero = true;
    for (const TraceRow& r : trace.rows) {
        if (r.eta[0] != 0.0) {
            eta1_zero = false;
            break;
        }
    }
    const bool rho_dot_panel = eta1_zero && trace.n >= 2;
    const int panels = rho_dot_panel ? 5 : 4;

    std::ostringstream os;
    os << "#!/usr/bin/env python3\n"
       << "# Rendered from " << csv_path << "\n"
       << "import csv\n"
       << "import matplotlib\n"
       << "matplotlib.use('Agg')\n"
       << "import matplotlib.pyplot as plt\n\n"
       << "PANELS = " << panels << "\n"
       << "REGION_CODE = {'safe': 0, 'transition': 1, 'outside': 2, 'deadzone': 3}\n\n"
       << "cols = {}\n"
       << "with open(" << "'" << csv_path << "'" << ") as f:\n"
       << "    reader = csv.DictReader(f)\n"
       << "    names = reader.fieldnames\n"
       << "    for name in names:\n"
       << "        cols[name] = []\n"
       << "    for row in reader:\n"
       << "        for name in names:\n"
       << "            v = row[name]\n"
       << "            cols[name].append(REGION_CODE[v] if name == 'region' else float(v))\n\n"
       << "t = cols['t']\n"
       << "ref = [x - s for x, s in zip(cols['x1'], cols['s1'])]\n"
       << "fig, axes = plt.subplots(PANELS, 1, figsize=(9, 3 * PANELS), sharex=True)\n\n"
       << "axes[0].plot(t, cols['x1'], label='x1')\n"
       << "axes[0].plot(t, ref, '--', label='x1 - s1')\n"
       << "axes[0].set_ylabel('output')\n"
       << "axes[0].legend()\n\n"
       << "axes[1].plot(t, cols['s1'], label='s1')\n"
       << "axes[1].plot(t, cols['z1'], label='z1')\n"
       << "axes[1].plot(t, cols['rho'], 'k--', label='+rho')\n"
       << "axes[1].plot(t, [-r for r in cols['rho']], 'k--', label='-rho')\n"
       << "axes[1].set_ylabel('errors / band')\n"
       << "axes[1].legend()\n\n"
       << "axes[2].plot(t, cols['u_raw'], label='u_raw')\n"
       << "axes[2].plot(t, cols['u_applied'], label='u_applied')\n"
       << "axes[2].set_ylabel('control')\n"
       << "axes[2].legend()\n\n"
       << "ratio = [l / g if g else 0.0 for l, g in zip(cols['lyap'], cols['gamma'])]\n"
       << "axes[3].plot(t, cols['f_p'], label='f_p')\n"
       << "axes[3].plot(t, cols['f_t'], label='f_t')\n"
       << "axes[3].plot(t, ratio, label='V/Gamma' if max(cols['gamma']) != 1.0 else 'Phi')\n"
       << "axes[3].plot(t, cols['region'], drawstyle='steps-post', label='region code')\n"
       << "axes[3].plot(t, cols['rho'], ':', label='rho')\n"
       << "axes[3].set_ylabel('evaluation')\n"
       << "axes[3].legend()\n\n";
    if (rho_dot_panel) {
        os << "rho_dot = [0.0] + [(b - a) / (tb - ta) for a, b, ta, tb in\n"
           << "           zip(cols['rho'][:-1], cols['rho'][1:], t[:-1], t[1:])]\n"
           << "axes[4].plot(t, rho_dot, label='d rho / dt')\n"
           << "axes[4].set_ylabel('rho rate')\n"
           << "axes[4].legend()\n\n";
    }
    os << "axes[-1].set_xlabel('t [s]')\n"
       << "fig.tight_layout()\n"
       << "out = '" << csv_path << ".png'\n"
       << "fig.savefig(out, dpi=130)\n"
       << "print('wrote', out)\n";
    return os.str();
}

} // namespace bcl
