#include "bcl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bcl/errors.hpp"

namespace bcl {

namespace {

std::string fmt9(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void require_finite(const Vec& v, double t, const char* what)
{
    if (!all_finite(v)) {
        throw NonFiniteError(std::string(what) + " became non-finite at t="
                             + std::to_string(t));
    }
}

struct EvalResult {
    Vec deriv;
    ControlOutput out;
    bool rho_floored = false;
};

// Bundle layout: [x(n) | x_c(n-1) | eta(n) | rho (bpc only)].
struct Layout {
    std::size_t n = 0;
    bool has_rho = false;
    std::size_t size() const { return n + (n - 1) + n + (has_rho ? 1 : 0); }
    std::size_t xc(std::size_t i) const { return n + i; }
    std::size_t eta(std::size_t i) const { return n + (n - 1) + i; }
    std::size_t rho() const { return n + (n - 1) + n; }
};

class ClosedLoop {
public:
    explicit ClosedLoop(const ScenarioRuntime& rt, const InvariantCertificate& cert)
        : rt_(rt), cert_(cert)
    {
        layout_.n = rt.plant.n;
        layout_.has_rho = rt.controller.type == ControllerType::bpc;
    }

    const Layout& layout() const { return layout_; }

    Vec initial_bundle() const
    {
        const Reference ref0 = rt_.reference(0.0);
        Vec bundle(layout_.size(), 0.0);
        std::copy(rt_.x0.begin(), rt_.x0.end(), bundle.begin());
        if (rt_.controller.type == ControllerType::bpc) {
            const BpcState st =
                init_bpc_state(rt_.plant, rt_.controller, rt_.perf, rt_.etf, rt_.x0, ref0);
            for (std::size_t i = 0; i + 1 < layout_.n; ++i) {
                bundle[layout_.xc(i)] = st.filters[i].x_c;
            }
            bundle[layout_.rho()] = st.rho;
        } else {
            const BcfbState st = init_bcfb_state(rt_.plant, rt_.controller, rt_.x0, ref0);
            for (std::size_t i = 0; i + 1 < layout_.n; ++i) {
                bundle[layout_.xc(i)] = st.filters[i].x_c;
            }
        }
        return bundle;
    }

    EvalResult evaluate(double t, const Vec& bundle) const
    {
        const std::size_t n = layout_.n;
        Vec x(bundle.begin(), bundle.begin() + static_cast<long>(n));
        require_finite(x, t, "plant state");
        const Reference ref = rt_.reference(t);

        EvalResult res;
        Vec eta_dot;
        double rho_dot = 0.0;

        if (rt_.controller.type == ControllerType::bpc) {
            BpcState st;
            st.nu = rt_.controller.nu;
            st.rho = std::max(bundle[layout_.rho()], 0.5 * rt_.perf.rho_inf);
            st.eta.assign(n, 0.0);
            for (std::size_t i = 1; i < n; ++i) {
                st.eta[i] = bundle[layout_.eta(i)];
            }
            for (std::size_t i = 0; i + 1 < n; ++i) {
                st.filters.push_back(
                    CommandFilter{rt_.controller.tau[i], bundle[layout_.xc(i)]});
            }
            res.out = bpc_control(rt_.plant, x, ref, st, rt_.controller, cert_.P, rt_.perf,
                                  rt_.etf);
            const BpcAuxDerivative aux = bpc_aux_derivative(
                st, res.out.f_p, res.out.f_t, res.out.e, res.out.g_vals, res.out.x_e,
                res.out.delta_u, rt_.perf, rt_.controller.gains);
            eta_dot = aux.eta_dot;
            rho_dot = aux.rho_dot;
            res.rho_floored = aux.floored;
        } else {
            BcfbState st;
            st.eta.assign(bundle.begin() + static_cast<long>(layout_.eta(0)),
                          bundle.begin() + static_cast<long>(layout_.eta(0) + n));
            for (std::size_t i = 0; i + 1 < n; ++i) {
                st.filters.push_back(
                    CommandFilter{rt_.controller.tau[i], bundle[layout_.xc(i)]});
            }
            if (rt_.controller.type == ControllerType::bcfb) {
                res.out = bcfb_control(rt_.plant, x, ref, st, rt_.controller, cert_,
                                       rt_.perf, t);
                eta_dot = bcfb_aux_derivative(st, res.out.f_p, res.out.g_vals, res.out.x_e,
                                              res.out.delta_u, rt_.controller.gains);
            } else {
                res.out = cfb_control(rt_.plant, x, ref, st, rt_.controller, cert_, rt_.perf,
                                      t);
                eta_dot = cfb_aux_derivative(st, res.out.g_vals, res.out.x_e,
                                             res.out.delta_u, rt_.controller.gains);
            }
        }

        const Vec omega = evaluate_disturbance(rt_.dist, t, x);
        const Vec dx = plant_derivative(rt_.plant, PlantState{x, t}, res.out.u_raw, omega);

        res.deriv.assign(layout_.size(), 0.0);
        std::copy(dx.begin(), dx.end(), res.deriv.begin());
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const CommandFilter f{rt_.controller.tau[i], bundle[layout_.xc(i)]};
            res.deriv[layout_.xc(i)] = filter_derivative(f, res.out.x_d[i]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            res.deriv[layout_.eta(i)] = eta_dot.empty() ? 0.0 : eta_dot[i];
        }
        if (layout_.has_rho) {
            res.deriv[layout_.rho()] = rho_dot;
        }
        require_finite(res.deriv, t, "state derivative");
        return res;
    }

private:
    const ScenarioRuntime& rt_;
    const InvariantCertificate& cert_;
    Layout layout_;
};

TraceRow make_row(double t, const ControlOutput& out, const Vec& x)
{
    TraceRow row;
    row.t = t;
    row.x = x;
    row.s = out.s;
    row.z = out.z;
    row.eta.assign(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        row.eta[i] = out.s[i] - out.z[i];
    }
    row.rho = out.rho;
    row.gamma = out.gamma;
    row.lyap = out.lyap;
    row.f_p = out.f_p;
    row.f_t = out.f_t;
    row.u_raw = out.u_raw;
    row.u_applied = out.u_applied;
    row.delta_u = out.delta_u;
    row.region = out.region;
    row.x_e = out.x_e;
    return row;
}

InvariantCertificate identity_cert(std::size_t n)
{
    InvariantCertificate c;
    c.n = n;
    c.gains = Vec(n, 1.0);
    c.X = Mat::identity(n);
    c.P = Mat::identity(n);
    c.W = Mat::identity(n);
    c.v_h = 1.0;
    c.feasible = false;
    return c;
}

} // namespace

Vec rk4_step(const DerivFn& fn, double t, const Vec& state, double h)
{
    const Vec k1 = fn(t, state);
    Vec tmp(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) tmp[i] = state[i] + 0.5 * h * k1[i];
    const Vec k2 = fn(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < state.size(); ++i) tmp[i] = state[i] + 0.5 * h * k2[i];
    const Vec k3 = fn(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < state.size(); ++i) tmp[i] = state[i] + h * k3[i];
    const Vec k4 = fn(t + h, tmp);
    Vec out(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) {
        out[i] = state[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if (!all_finite(out)) {
        throw NonFiniteError("integration step produced a non-finite state");
    }
    return out;
}

Vec euler_step(const DerivFn& fn, double t, const Vec& state, double h)
{
    const Vec d = fn(t, state);
    Vec out(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) {
        out[i] = state[i] + h * d[i];
    }
    if (!all_finite(out)) {
        throw NonFiniteError("integration step produced a non-finite state");
    }
    return out;
}

const char* to_string(EventKind k)
{
    switch (k) {
    case EventKind::SaturationOn: return "saturation_on";
    case EventKind::SaturationOff: return "saturation_off";
    case EventKind::EnterSafe: return "enter_safe";
    case EventKind::ExitSafe: return "exit_safe";
    case EventKind::ExitOmega: return "exit_omega";
    case EventKind::EnterOmega: return "enter_omega";
    case EventKind::EnterDeadZone: return "enter_deadzone";
    case EventKind::ExitDeadZone: return "exit_deadzone";
    case EventKind::EtfClamp: return "etf_clamp";
    case EventKind::RhoFloor: return "rho_floor";
    }
    return "?";
}

RunResult run_simulation(const ScenarioRuntime& rt)
{
    rt.plant.validate();
    if (rt.x0.size() != rt.plant.n) {
        throw ConfigError("initial state dimension mismatch");
    }
    if (!(rt.sim.h > 0.0) || !(rt.sim.T >= rt.sim.h)) {
        throw ConfigError("step size and horizon must satisfy 0 < h <= T");
    }
    if (rt.sim.record_every < 1) {
        throw ConfigError("record_every must be >= 1");
    }
    const bool needs_cert = rt.controller.type != ControllerType::cfb;
    if (needs_cert && !(rt.cert_loaded && rt.cert.feasible) && !rt.force) {
        throw ConfigError("a feasible invariant certificate is required "
                          "(pass --force to run without one)");
    }
    rt.perf.validate(rt.controller.gains.empty() ? 1.0 : rt.controller.gains.front(),
                     rt.controller.type != ControllerType::bpc);

    InvariantCertificate cert = rt.cert_loaded ? rt.cert : identity_cert(rt.plant.n);
    if (rt.cert_loaded) {
        if (cert.n != rt.plant.n) {
            throw ConfigError("certificate dimension does not match the plant");
        }
        const double want_rate = rt.controller.type == ControllerType::bpc
            ? rt.perf.k_rho
            : rt.perf.kappa;
        bool match = cert.gains.size() == rt.controller.gains.size()
            && std::fabs(cert.kappa - want_rate) < 1e-9;
        for (std::size_t i = 0; match && i < cert.gains.size(); ++i) {
            match = std::fabs(cert.gains[i] - rt.controller.gains[i]) < 1e-9;
        }
        if (!match && !rt.force) {
            throw ConfigError("certificate gains/rate do not match the scenario "
                              "(pass --force to override)");
        }
    }

    RunResult result;
    SimSummary& sum = result.summary;
    sum.precondition_ok = true;

    const Reference ref0 = rt.reference(0.0);
    const double e0 = rt.x0[0] - ref0.y;
    if (rt.controller.type == ControllerType::bpc) {
        const double lo = -rt.perf.delta_under * rt.perf.rho0;
        const double hi = rt.perf.delta_bar * rt.perf.rho0;
        if (!(e0 > lo) || !(e0 < hi)) {
            throw PreconditionError("initial tracking error lies outside the open band");
        }
    }

    ClosedLoop loop(rt, cert);
    Vec bundle = loop.initial_bundle();
    const Layout& lay = loop.layout();

    const std::size_t steps = static_cast<std::size_t>(std::llround(rt.sim.T / rt.sim.h));
    const double h = rt.sim.h;
    sum.steps = steps;
    result.trace.n = rt.plant.n;
    result.trace.rows.reserve(steps / static_cast<std::size_t>(rt.sim.record_every) + 2);

    EvalResult cur = loop.evaluate(0.0, bundle);

    // Membership of the initial compensated error in the invariant set is part
    // of the covered start regime; outside starts are reported, not rejected,
    // and the evaluation gate handles them (f_p = 0 until entry).
    if (needs_cert && !(rt.cert_loaded && rt.cert.feasible)) {
        sum.precondition_ok = false;
        sum.precondition_note = "forced run without a feasible certificate; "
                                "safety evaluation is unsound";
    }
    if (cur.out.lyap > cur.out.gamma) {
        sum.precondition_ok = false;
        std::ostringstream note;
        note << "initial compensated error outside the invariant set ("
             << (rt.controller.type == ControllerType::bpc ? "Phi" : "V/Gamma") << "="
             << (cur.out.lyap / (cur.out.gamma > 0 ? cur.out.gamma : 1.0)) << ")";
        if (!sum.precondition_note.empty()) {
            sum.precondition_note += "; ";
        }
        sum.precondition_note += note.str();
    }
    if (rt.cert_loaded && !cert.w_condition_ok && sum.precondition_note.empty()) {
        sum.precondition_note = "certificate disturbance condition 1 <= Gamma_inf not met";
    }

    double rmse_acc = 0.0;
    long sat_count = 0;
    bool g_envelope_noted = false;
    sum.min_rho = cur.out.rho;

    auto account = [&](const ControlOutput& out) {
        if (!g_envelope_noted) {
            for (std::size_t i = 0; i < rt.plant.g_bounds.size() && i < out.g_vals.size();
                 ++i) {
                const double mag = std::fabs(out.g_vals[i]);
                if (mag < rt.plant.g_bounds[i].first || mag > rt.plant.g_bounds[i].second) {
                    g_envelope_noted = true;
                    if (!sum.precondition_note.empty()) {
                        sum.precondition_note += "; ";
                    }
                    sum.precondition_note += "stage gain left its documented envelope";
                    break;
                }
            }
        }
        double ratio = 0.0;
        bool violated = false;
        if (rt.controller.type == ControllerType::bpc) {
            const double hi = rt.perf.delta_bar * out.rho;
            const double lo = -rt.perf.delta_under * out.rho;
            ratio = std::max(out.e / hi, out.e / lo);
            violated = !(out.e > lo) || !(out.e < hi);
        } else {
            ratio = std::fabs(out.z[0]) / out.rho;
            violated = ratio > 1.0 + 1e-3;
        }
        sum.max_band_ratio = std::max(sum.max_band_ratio, ratio);
        if (violated) {
            ++sum.violations;
        }
        if (out.lyap > out.gamma * (1.0 + 1e-3)) {
            ++sum.v_violations;
        }
        sum.max_abs_s1 = std::max(sum.max_abs_s1, std::fabs(out.s[0]));
        sum.max_s1_minus_z1 =
            std::max(sum.max_s1_minus_z1, std::fabs(out.s[0] - out.z[0]));
        rmse_acc += out.s[0] * out.s[0];
        if (out.delta_u != 0.0) {
            ++sat_count;
        }
        sum.min_rho = std::min(sum.min_rho, out.rho);
    };

    auto emit_region_events = [&](double t, Region prev, Region curr) {
        if (prev == curr) {
            return;
        }
        auto push = [&](EventKind k) {
            result.events.events.push_back(
                {t, k, std::string(to_string(prev)) + "->" + to_string(curr)});
            if (k == EventKind::ExitOmega) {
                ++sum.omega_exits;
            }
        };
        if (prev == Region::DeadZone) push(EventKind::ExitDeadZone);
        if (prev == Region::Safe && curr != Region::Safe) push(EventKind::ExitSafe);
        if (prev != Region::Outside && curr == Region::Outside) push(EventKind::ExitOmega);
        if (prev == Region::Outside && curr != Region::Outside) push(EventKind::EnterOmega);
        if (prev != Region::Safe && curr == Region::Safe) push(EventKind::EnterSafe);
        if (curr == Region::DeadZone) push(EventKind::EnterDeadZone);
    };

    account(cur.out);
    result.trace.rows.push_back(make_row(0.0, cur.out, Vec(bundle.begin(),
                                         bundle.begin() + static_cast<long>(lay.n))));
    if (cur.out.delta_u != 0.0) {
        result.events.events.push_back(
            {0.0, EventKind::SaturationOn, "u_raw=" + fmt9(cur.out.u_raw)});
    }
    if (cur.out.etf_clamped) {
        result.events.events.push_back({0.0, EventKind::EtfClamp, "band ratio clamped"});
    }

    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * h;
        if (rt.sim.integrator == IntegratorKind::RK4) {
            // Reuse the boundary evaluation as the first stage.
            const Vec& d1 = cur.deriv;
            Vec tmp(bundle.size());
            for (std::size_t i = 0; i < bundle.size(); ++i) {
                tmp[i] = bundle[i] + 0.5 * h * d1[i];
            }
            const Vec d2 = loop.evaluate(t + 0.5 * h, tmp).deriv;
            for (std::size_t i = 0; i < bundle.size(); ++i) {
                tmp[i] = bundle[i] + 0.5 * h * d2[i];
            }
            const Vec d3 = loop.evaluate(t + 0.5 * h, tmp).deriv;
            for (std::size_t i = 0; i < bundle.size(); ++i) {
                tmp[i] = bundle[i] + h * d3[i];
            }
            const Vec d4 = loop.evaluate(t + h, tmp).deriv;
            for (std::size_t i = 0; i < bundle.size(); ++i) {
                bundle[i] += h / 6.0 * (d1[i] + 2.0 * d2[i] + 2.0 * d3[i] + d4[i]);
            }
        } else {
            for (std::size_t i = 0; i < bundle.size(); ++i) {
                bundle[i] += h * cur.deriv[i];
            }
        }
        if (lay.has_rho) {
            bundle[lay.rho()] = std::max(bundle[lay.rho()], 0.5 * rt.perf.rho_inf);
        }
        require_finite(bundle, t + h, "state bundle");

        const double t_next = static_cast<double>(k + 1) * h;
        EvalResult next = loop.evaluate(t_next, bundle);

        emit_region_events(t_next, cur.out.region, next.out.region);
        if (cur.out.delta_u == 0.0 && next.out.delta_u != 0.0) {
            result.events.events.push_back(
                {t_next, EventKind::SaturationOn, "u_raw=" + fmt9(next.out.u_raw)});
        } else if (cur.out.delta_u != 0.0 && next.out.delta_u == 0.0) {
            result.events.events.push_back({t_next, EventKind::SaturationOff, ""});
        }
        if (!cur.out.etf_clamped && next.out.etf_clamped) {
            result.events.events.push_back(
                {t_next, EventKind::EtfClamp, "band ratio clamped"});
        }
        if (!cur.rho_floored && next.rho_floored) {
            result.events.events.push_back(
                {t_next, EventKind::RhoFloor, "rho held at 0.5*rho_inf"});
        }

        account(next.out);
        if ((k + 1) % static_cast<std::size_t>(rt.sim.record_every) == 0 || k + 1 == steps) {
            result.trace.rows.push_back(make_row(
                t_next, next.out,
                Vec(bundle.begin(), bundle.begin() + static_cast<long>(lay.n))));
        }
        cur = std::move(next);
    }

    sum.rmse_s1 = std::sqrt(rmse_acc / static_cast<double>(steps + 1));
    sum.saturation_duty = static_cast<double>(sat_count) / static_cast<double>(steps + 1);
    return result;
}

ComparisonReport compare_runs(const SimulationTrace& a, const SimulationTrace& b)
{
    if (a.rows.size() != b.rows.size() || a.rows.empty()) {
        throw GridMismatchError("traces have different lengths");
    }
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        if (std::fabs(a.rows[i].t - b.rows[i].t) > 1e-9) {
            throw GridMismatchError("trace time grids differ");
        }
    }
    ComparisonReport rep;
    rep.rows = a.rows.size();
    auto fill = [](const SimulationTrace& tr, ComparisonSide& side) {
        double sx = 0.0, ss = 0.0, sz = 0.0, su = 0.0;
        long sat = 0;
        for (const TraceRow& r : tr.rows) {
            sx += r.x[0] * r.x[0];
            ss += r.s[0] * r.s[0];
            sz += r.z[0] * r.z[0];
            su += r.u_applied * r.u_applied;
            side.max_abs_s1 = std::max(side.max_abs_s1, std::fabs(r.s[0]));
            side.max_s1_minus_z1 =
                std::max(side.max_s1_minus_z1, std::fabs(r.s[0] - r.z[0]));
            if (r.delta_u != 0.0) {
                ++sat;
            }
            if (std::fabs(r.z[0]) > r.rho * (1.0 + 1e-3)) {
                ++side.violations;
            }
        }
        const double m = static_cast<double>(tr.rows.size());
        side.rmse_x1 = std::sqrt(sx / m);
        side.rmse_s1 = std::sqrt(ss / m);
        side.rmse_z1 = std::sqrt(sz / m);
        side.rmse_u = std::sqrt(su / m);
        side.saturation_duty = static_cast<double>(sat) / m;
    };
    fill(a, rep.a);
    fill(b, rep.b);
    return rep;
}

std::string comparison_table(const ComparisonReport& r)
{
    std::ostringstream os;
    auto line = [&os](const char* name, double a, double b) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "  %-18s %14.6g %14.6g\n", name, a, b);
        os << buf;
    };
    os << "metric                " << (r.a.label.empty() ? "run A" : r.a.label);
    os << std::string(
        r.a.label.size() < 14 ? 15 - std::max<std::size_t>(r.a.label.size(), 5) : 1, ' ');
    os << (r.b.label.empty() ? "run B" : r.b.label) << "\n";
    line("rmse(x1)", r.a.rmse_x1, r.b.rmse_x1);
    line("rmse(s1)", r.a.rmse_s1, r.b.rmse_s1);
    line("rmse(z1)", r.a.rmse_z1, r.b.rmse_z1);
    line("rmse(u)", r.a.rmse_u, r.b.rmse_u);
    line("max|s1|", r.a.max_abs_s1, r.b.max_abs_s1);
    line("max|s1-z1|", r.a.max_s1_minus_z1, r.b.max_s1_minus_z1);
    line("saturation duty", r.a.saturation_duty, r.b.saturation_duty);
    line("violations", static_cast<double>(r.a.violations),
         static_cast<double>(r.b.violations));
    return os.str();
}

std::string comparison_csv(const ComparisonReport& r)
{
    std::ostringstream os;
    os << "metric,a,b\n";
    auto line = [&os](const char* name, double a, double b) {
        os << name << "," << fmt9(a) << "," << fmt9(b) << "\n";
    };
    line("rmse_x1", r.a.rmse_x1, r.b.rmse_x1);
    line("rmse_s1", r.a.rmse_s1, r.b.rmse_s1);
    line("rmse_z1", r.a.rmse_z1, r.b.rmse_z1);
    line("rmse_u", r.a.rmse_u, r.b.rmse_u);
    line("max_abs_s1", r.a.max_abs_s1, r.b.max_abs_s1);
    line("max_s1_minus_z1", r.a.max_s1_minus_z1, r.b.max_s1_minus_z1);
    line("saturation_duty", r.a.saturation_duty, r.b.saturation_duty);
    line("violations", static_cast<double>(r.a.violations),
         static_cast<double>(r.b.violations));
    return os.str();
}

void write_trace_csv(const SimulationTrace& trace, std::ostream& os)
{
    const std::size_t n = trace.n;
    os << "t";
    for (std::size_t i = 1; i <= n; ++i) os << ",x" << i;
    for (std::size_t i = 1; i <= n; ++i) os << ",s" << i;
    for (std::size_t i = 1; i <= n; ++i) os << ",z" << i;
    for (std::size_t i = 1; i <= n; ++i) os << ",eta" << i;
    os << ",rho,gamma,lyap,f_p,f_t,u_raw,u_applied,delta_u,region";
    for (std::size_t i = 2; i <= n; ++i) os << ",xe" << i;
    os << "\n";
    for (const TraceRow& r : trace.rows) {
        os << fmt9(r.t);
        for (double v : r.x) os << "," << fmt9(v);
        for (double v : r.s) os << "," << fmt9(v);
        for (double v : r.z) os << "," << fmt9(v);
        for (double v : r.eta) os << "," << fmt9(v);
        os << "," << fmt9(r.rho) << "," << fmt9(r.gamma) << "," << fmt9(r.lyap) << ","
           << fmt9(r.f_p) << "," << fmt9(r.f_t) << "," << fmt9(r.u_raw) << ","
           << fmt9(r.u_applied) << "," << fmt9(r.delta_u) << "," << to_string(r.region);
        for (double v : r.x_e) os << "," << fmt9(v);
        os << "\n";
    }
}

SimulationTrace parse_trace_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) {
        throw ConfigError("empty trace file");
    }
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            header.push_back(tok);
        }
    }
    if (header.empty() || header[0] != "t") {
        throw ConfigError("malformed trace header");
    }
    std::size_t n = 0;
    while (1 + n < header.size() && header[1 + n] == "x" + std::to_string(n + 1)) {
        ++n;
    }
    if (n == 0) {
        throw ConfigError("malformed trace header: no state columns");
    }
    const std::size_t expected = 1 + 4 * n + 9 + (n - 1);
    if (header.size() != expected) {
        throw ConfigError("malformed trace header: wrong column count");
    }

    SimulationTrace trace;
    trace.n = n;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> cells;
        while (std::getline(ss, tok, ',')) {
            cells.push_back(tok);
        }
        if (cells.size() != expected) {
            throw ConfigError("malformed trace row");
        }
        std::size_t c = 0;
        auto num = [&cells, &c]() {
            std::size_t pos = 0;
            const double v = std::stod(cells[c], &pos);
            if (pos != cells[c].size()) {
                throw ConfigError("malformed numeric cell: " + cells[c]);
            }
            ++c;
            return v;
        };
        TraceRow r;
        r.t = num();
        r.x.resize(n);
        for (double& v : r.x) v = num();
        r.s.resize(n);
        for (double& v : r.s) v = num();
        r.z.resize(n);
        for (double& v : r.z) v = num();
        r.eta.resize(n);
        for (double& v : r.eta) v = num();
        r.rho = num();
        r.gamma = num();
        r.lyap = num();
        r.f_p = num();
        r.f_t = num();
        r.u_raw = num();
        r.u_applied = num();
        r.delta_u = num();
        r.region = region_from_string(cells[c++]);
        r.x_e.resize(n - 1);
        for (double& v : r.x_e) v = num();
        trace.rows.push_back(std::move(r));
    }
    if (trace.rows.empty()) {
        throw ConfigError("trace has no data rows");
    }
    return trace;
}

void write_events_csv(const EventLog& log, std::ostream& os)
{
    os << "t,kind,detail\n";
    for (const Event& e : log.events) {
        std::string detail = e.detail;
        std::replace(detail.begin(), detail.end(), ',', ';');
        os << fmt9(e.t) << "," << to_string(e.kind) << "," << detail << "\n";
    }
}

void write_file_atomic(const std::string& path, const std::string& content)
{
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) {
            throw ConfigError("cannot open for writing: " + tmp);
        }
        f << content;
        if (!f.good()) {
            throw ConfigError("write failed: " + tmp);
        }
    }
    std::remove(path.c_str());
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw ConfigError("cannot move file into place: " + path);
    }
}

std::vector<Region> reconstruct_regions(Region initial, const EventLog& log,
                                        const std::vector<double>& times)
{
    std::vector<Region> out;
    out.reserve(times.size());
    Region cur = initial;
    std::size_t idx = 0;
    for (double t : times) {
        while (idx < log.events.size() && log.events[idx].t <= t + 1e-12) {
            switch (log.events[idx].kind) {
            case EventKind::ExitDeadZone: cur = Region::Transition; break;
            case EventKind::ExitSafe: cur = Region::Transition; break;
            case EventKind::ExitOmega: cur = Region::Outside; break;
            case EventKind::EnterOmega: cur = Region::Transition; break;
            case EventKind::EnterSafe: cur = Region::Safe; break;
            case EventKind::EnterDeadZone: cur = Region::DeadZone; break;
            default: break;
            }
            ++idx;
        }
        out.push_back(cur);
    }
    return out;
}

} // namespace bcl
