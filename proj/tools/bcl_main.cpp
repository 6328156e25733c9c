#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "bcl/errors.hpp"
#include "bcl/invariant.hpp"
#include "bcl/scenario.hpp"
#include "bcl/sim.hpp"

namespace {

std::string stem_of(const std::string& path)
{
    return std::filesystem::path(path).stem().string();
}

void print_summary(const std::string& name, const bcl::ScenarioRuntime& rt,
                   const bcl::RunResult& res)
{
    const bcl::SimSummary& s = res.summary;
    std::printf("scenario %s: controller=%s T=%g h=%g steps=%zu\n", name.c_str(),
                bcl::to_string(rt.controller.type), rt.sim.T, rt.sim.h, s.steps);
    if (!s.precondition_ok || !s.precondition_note.empty()) {
        std::printf("  note: %s\n",
                    s.precondition_note.empty() ? "-" : s.precondition_note.c_str());
    }
    std::printf("  max|s1|=%.6g  max|s1-z1|=%.6g  rmse(s1)=%.6g\n", s.max_abs_s1,
                s.max_s1_minus_z1, s.rmse_s1);
    std::printf("  band: max ratio=%.6g  violations=%ld  level exceedances=%ld  "
                "set exits=%ld\n",
                s.max_band_ratio, s.violations, s.v_violations, s.omega_exits);
    std::printf("  saturation duty=%.4f  min rho=%.6g\n", s.saturation_duty, s.min_rho);
}

void write_run_outputs(const bcl::RunResult& res, const std::string& csv_path,
                       const std::string& events_path)
{
    {
        std::ostringstream os;
        bcl::write_trace_csv(res.trace, os);
        bcl::write_file_atomic(csv_path, os.str());
    }
    {
        std::ostringstream os;
        bcl::write_events_csv(res.events, os);
        bcl::write_file_atomic(events_path, os.str());
    }
    std::printf("  trace: %s (%zu rows)  events: %s (%zu)\n", csv_path.c_str(),
                res.trace.rows.size(), events_path.c_str(), res.events.events.size());
}

struct CheckLmiArgs {
    std::vector<double> gains;
    double kappa = 0.5;
    double w_scale = 1.0;
    double rho0 = 1.0;
    double rho_inf = 0.1;
    double g_min = 1.0;
    double g_max = 1.0;
    std::string form = "eq5";
    std::string out;
};

int run_check_lmi(const CheckLmiArgs& a)
{
    const std::size_t n = a.gains.size();
    if (!(a.w_scale > 0.0)) {
        throw bcl::DomainError("w-scale must be positive");
    }
    const bcl::Mat w = bcl::Mat::identity(n).scaled(a.w_scale);
    std::vector<std::pair<double, double>> g_bounds(n, {a.g_min, a.g_max});
    const bcl::LmiForm form = bcl::lmi_form_from_string(a.form);

    const bcl::InvariantCertificate cert = bcl::search_trivial_solution(
        a.gains, a.kappa, w, g_bounds, a.rho0, a.rho_inf, form);

    std::printf("check-lmi: n=%zu kappa=%g W=%g*I form=%s\n", n, a.kappa, a.w_scale,
                bcl::to_string(form));
    std::printf("  witness X=I (alpha=0.5, eps=0.1): damping slack=%.6g -> %s\n",
                cert.witness_slack, cert.witness_slack <= 0.0 ? "feasible" : "infeasible");
    std::printf("  search: %s  V_h=%.6g alpha=%.3g eps=%.3g\n",
                cert.feasible ? "feasible" : "INFEASIBLE", cert.v_h, cert.alpha,
                cert.eps_lmi);
    std::printf("  slack(direct)=%.6g  slack(schur)=%.6g\n", cert.slack_eq5, cert.slack_h);
    std::printf("  Gamma_inf=%.6g  disturbance condition 1 <= Gamma_inf: %s\n",
                cert.gamma_inf, cert.w_condition_ok ? "satisfied" : "NOT satisfied");
    std::printf("  certified disturbance level: omega'Womega <= %.6g\n",
                cert.admissible_level());
    if (!a.out.empty()) {
        cert.save(a.out);
        std::printf("  certificate written: %s\n", a.out.c_str());
    }
    return cert.feasible ? 0 : 2;
}

struct SimulateArgs {
    std::string scenario;
    std::string cert;
    std::string out_csv;
    std::string out_events;
    bool force = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int sweep = 0;
};

int run_simulate(const SimulateArgs& a)
{
    bcl::Scenario s = bcl::load_scenario(a.scenario);
    if (a.seed_set) {
        s.sim.seed = a.seed;
    }
    const std::string name = stem_of(a.scenario);
    bcl::ScenarioRuntime rt = bcl::make_runtime(s, name);
    if (!a.cert.empty()) {
        rt.cert = bcl::InvariantCertificate::load(a.cert);
        rt.cert_loaded = true;
    }
    rt.force = a.force;

    if (a.sweep <= 0) {
        const bcl::RunResult res = bcl::run_simulation(rt);
        print_summary(name, rt, res);
        const std::string csv =
            !a.out_csv.empty() ? a.out_csv
                               : (!s.out_csv.empty() ? s.out_csv : name + "-trace.csv");
        const std::string events = !a.out_events.empty()
            ? a.out_events
            : (!s.out_events.empty() ? s.out_events : name + "-events.csv");
        write_run_outputs(res, csv, events);
        return res.summary.violations > 0 ? 3 : 0;
    }

    // Seeded disturbance sweep: base run plus jittered pulse schedules.
    const int runs = a.sweep + 1;
    std::vector<bcl::ScenarioRuntime> rts(static_cast<std::size_t>(runs), rt);
    for (int i = 1; i < runs; ++i) {
        rts[static_cast<std::size_t>(i)].dist = bcl::make_disturbance_variant(
            rt.dist, rt.sim.seed + static_cast<std::uint64_t>(i));
    }
    std::vector<bcl::RunResult> results(static_cast<std::size_t>(runs));
    std::vector<std::string> failures(static_cast<std::size_t>(runs));
    const unsigned workers =
        std::min<unsigned>(bcl::worker_count(), static_cast<unsigned>(runs));
    std::vector<std::thread> pool;
    for (unsigned wkr = 0; wkr < workers; ++wkr) {
        pool.emplace_back([&, wkr]() {
            for (int i = static_cast<int>(wkr); i < runs; i += static_cast<int>(workers)) {
                try {
                    results[static_cast<std::size_t>(i)] =
                        bcl::run_simulation(rts[static_cast<std::size_t>(i)]);
                } catch (const std::exception& e) {
                    failures[static_cast<std::size_t>(i)] = e.what();
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    long total_viol = 0;
    for (int i = 0; i < runs; ++i) {
        const auto& fail = failures[static_cast<std::size_t>(i)];
        if (!fail.empty()) {
            std::printf("run %02d: ABORTED: %s\n", i, fail.c_str());
            total_viol += 1;
            continue;
        }
        const bcl::SimSummary& sm = results[static_cast<std::size_t>(i)].summary;
        long dz = 0;
        for (const bcl::Event& e : results[static_cast<std::size_t>(i)].events.events) {
            dz += e.kind == bcl::EventKind::EnterDeadZone ? 1 : 0;
        }
        std::printf("run %02d: violations=%ld max_ratio=%.4f duty=%.4f deadzone_entries=%ld\n",
                    i, sm.violations, sm.max_band_ratio, sm.saturation_duty, dz);
        total_viol += sm.violations;
    }
    std::printf("sweep: %d runs, total violations=%ld\n", runs, total_viol);
    return total_viol > 0 ? 3 : 0;
}

struct CompareArgs {
    std::string scenario_a;
    std::string scenario_b;
    std::string cert;
    std::string out_report;
    bool force = false;
};

int run_compare(const CompareArgs& a)
{
    const bcl::Scenario sa = bcl::load_scenario(a.scenario_a);
    const bcl::Scenario sb = bcl::load_scenario(a.scenario_b);
    if (sa.sim.h != sb.sim.h || sa.sim.T != sb.sim.T
        || sa.sim.record_every != sb.sim.record_every
        || sa.sim.integrator != sb.sim.integrator) {
        throw bcl::ConfigError("scenarios must share an identical sim section");
    }
    bcl::ScenarioRuntime ra = bcl::make_runtime(sa, stem_of(a.scenario_a));
    bcl::ScenarioRuntime rb = bcl::make_runtime(sb, stem_of(a.scenario_b));
    if (!a.cert.empty()) {
        ra.cert = bcl::InvariantCertificate::load(a.cert);
        ra.cert_loaded = true;
        rb.cert = ra.cert;
        rb.cert_loaded = true;
    }
    ra.force = rb.force = a.force;

    const bcl::RunResult res_a = bcl::run_simulation(ra);
    const bcl::RunResult res_b = bcl::run_simulation(rb);
    bcl::ComparisonReport rep = bcl::compare_runs(res_a.trace, res_b.trace);
    rep.a.label = ra.name;
    rep.b.label = rb.name;
    std::fputs(bcl::comparison_table(rep).c_str(), stdout);
    if (!a.out_report.empty()) {
        bcl::write_file_atomic(a.out_report, bcl::comparison_csv(rep));
        std::printf("report written: %s\n", a.out_report.c_str());
    }
    return 0;
}

struct VerifyArgs {
    std::string cert;
    int trials = 200;
    double horizon = 20.0;
    std::uint64_t seed = 7;
    double omega_scale = 1.0;
};

int run_verify(const VerifyArgs& a)
{
    const bcl::InvariantCertificate cert = bcl::InvariantCertificate::load(a.cert);
    const bcl::InvarianceReport rep =
        bcl::monte_carlo_invariance(cert, a.trials, a.horizon, a.seed, a.omega_scale);
    std::printf("verify-invariance: trials=%d horizon=%g level=%.6g scale=%g\n", rep.trials,
                a.horizon, rep.omega_level, a.omega_scale);
    if (rep.vacuous) {
        std::printf("  WARNING: zero trials requested; pass is vacuous\n");
        return 0;
    }
    std::printf("  max V/Gamma=%.6f  max |z1|/rho=%.6f  -> %s\n", rep.max_ratio_v,
                rep.max_ratio_z1, rep.pass ? "PASS" : "FAIL");
    if (!rep.pass) {
        std::printf("  worst trial seed: %llu (rerun with --trials 1 --seed %llu)\n",
                    static_cast<unsigned long long>(rep.worst_seed),
                    static_cast<unsigned long long>(rep.worst_seed));
    }
    return rep.pass ? 0 : 2;
}

struct PlotArgs {
    std::string trace_csv;
    std::string out;
};

int run_emit_plots(const PlotArgs& a)
{
    std::ifstream f(a.trace_csv);
    if (!f) {
        throw bcl::ConfigError("cannot open trace: " + a.trace_csv);
    }
    const bcl::SimulationTrace trace = bcl::parse_trace_csv(f);
    const std::string script = bcl::emit_plot_script(trace, a.trace_csv);
    const std::string out = a.out.empty() ? a.trace_csv + ".plot.py" : a.out;
    bcl::write_file_atomic(out, script);
    std::printf("plot script written: %s\n", out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"balanced control design and simulation toolkit"};
    app.require_subcommand(1);

    CheckLmiArgs lmi;
    CLI::App* c_lmi =
        app.add_subcommand("check-lmi", "search the scalar stability certificate");
    c_lmi->add_option("--gains", lmi.gains, "backstepping gains k1..kn")
        ->required()
        ->delimiter(',');
    c_lmi->add_option("--kappa", lmi.kappa, "certified envelope rate");
    c_lmi->add_option("--w-scale", lmi.w_scale, "disturbance weight W = w*I");
    c_lmi->add_option("--lmi-form", lmi.form, "inequality form: eq5 | h-matrix")
        ->check(CLI::IsMember({"eq5", "h-matrix"}));
    c_lmi->add_option("--rho0", lmi.rho0, "envelope start");
    c_lmi->add_option("--rho-inf", lmi.rho_inf, "envelope floor");
    c_lmi->add_option("--g-min", lmi.g_min, "coupling lower bound");
    c_lmi->add_option("--g-max", lmi.g_max, "coupling upper bound");
    c_lmi->add_option("--out", lmi.out, "certificate output path");

    SimulateArgs sim;
    CLI::App* c_sim = app.add_subcommand("simulate", "run a scenario file");
    c_sim->add_option("scenario", sim.scenario, "scenario file")->required();
    c_sim->add_option("--cert", sim.cert, "invariant certificate file");
    c_sim->add_option("--out-csv", sim.out_csv, "trace output path");
    c_sim->add_option("--out-events", sim.out_events, "event log output path");
    c_sim->add_flag("--force", sim.force, "run without a feasible certificate");
    c_sim->add_option("--seed", sim.seed, "override scenario seed")
        ->each([&sim](const std::string&) { sim.seed_set = true; });
    c_sim->add_option("--sweep", sim.sweep, "additional seeded disturbance variants");

    CompareArgs cmp;
    CLI::App* c_cmp = app.add_subcommand("compare", "run two scenarios on one grid");
    c_cmp->add_option("scenario_a", cmp.scenario_a, "first scenario")->required();
    c_cmp->add_option("scenario_b", cmp.scenario_b, "second scenario")->required();
    c_cmp->add_option("--cert", cmp.cert, "certificate used by both runs");
    c_cmp->add_option("--out-report", cmp.out_report, "report CSV path");
    c_cmp->add_flag("--force", cmp.force, "run without a feasible certificate");

    VerifyArgs ver;
    CLI::App* c_ver =
        app.add_subcommand("verify-invariance", "Monte Carlo check of a certificate");
    c_ver->add_option("--cert", ver.cert, "certificate file")->required();
    c_ver->add_option("--trials", ver.trials, "number of trials");
    c_ver->add_option("--horizon", ver.horizon, "trial horizon in seconds");
    c_ver->add_option("--seed", ver.seed, "base RNG seed");
    c_ver->add_option("--omega-scale", ver.omega_scale,
                      "scale disturbances beyond the admissible level");

    PlotArgs plot;
    CLI::App* c_plot = app.add_subcommand("emit-plots", "write a plot script for a trace");
    c_plot->add_option("trace", plot.trace_csv, "trace CSV")->required();
    c_plot->add_option("--out", plot.out, "script output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (c_lmi->parsed()) {
            return run_check_lmi(lmi);
        }
        if (c_sim->parsed()) {
            return run_simulate(sim);
        }
        if (c_cmp->parsed()) {
            return run_compare(cmp);
        }
        if (c_ver->parsed()) {
            return run_verify(ver);
        }
        if (c_plot->parsed()) {
            return run_emit_plots(plot);
        }
    } catch (const bcl::NonFiniteError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
