#include "bcl/controllers.hpp"

#include <cmath>

#include "bcl/errors.hpp"

namespace bcl {

namespace {

constexpr double kGainSingularTol = 1e-9;

void eval_stages(const PlantModel& model, const Vec& x, Vec& f_vals, Vec& g_vals)
{
    const std::size_t n = model.n;
    f_vals.resize(n);
    g_vals.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        f_vals[i] = model.f[i](x);
        g_vals[i] = model.g[i](x);
        if (!std::isfinite(f_vals[i]) || !std::isfinite(g_vals[i])) {
            throw NonFiniteError("plant stage evaluation is non-finite");
        }
        if (std::fabs(g_vals[i]) < kGainSingularTol) {
            throw DomainError("stage gain is singular");
        }
    }
}

Region classify_bcfb(double v, double gamma, double sigma)
{
    if (v <= sigma * gamma) {
        return Region::Safe;
    }
    return v <= gamma ? Region::Transition : Region::Outside;
}

Region classify_bpc(double phi, double phi0, double band_ratio, double eps_dz)
{
    if (phi > phi0 && band_ratio <= eps_dz) {
        return Region::DeadZone;
    }
    if (phi <= phi0) {
        return Region::Safe;
    }
    return phi <= 1.0 ? Region::Transition : Region::Outside;
}

// Shared backstepping cascade for the filtered schemes. first_error is z_1
// (gated scheme) or s_1 (baseline).
void backstepping_cascade(const PlantModel& model, const Reference& ref,
                          const BcfbState& st, const Vec& k, const Vec& f_vals,
                          const Vec& g_vals, const Vec& s, const Vec& z,
                          double first_error, ControlOutput& out)
{
    const std::size_t n = model.n;
    out.x_d.assign(n >= 1 ? n - 1 : 0, 0.0);
    out.x_e.assign(n >= 1 ? n - 1 : 0, 0.0);

    const double top = -k[0] * first_error - f_vals[0] + ref.dy;
    if (n == 1) {
        out.u_raw = top / g_vals[0];
    } else {
        out.x_d[0] = top / g_vals[0];
        double xc_dot = filter_derivative(st.filters[0], out.x_d[0]);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            out.x_d[i] =
                (-k[i] * s[i] - f_vals[i] - g_vals[i - 1] * z[i - 1] + xc_dot) / g_vals[i];
            xc_dot = filter_derivative(st.filters[i], out.x_d[i]);
        }
        out.u_raw =
            (-k[n - 1] * s[n - 1] - f_vals[n - 1] - g_vals[n - 2] * z[n - 2] + xc_dot)
            / g_vals[n - 1];
        for (std::size_t i = 0; i + 1 < n; ++i) {
            out.x_e[i] = st.filters[i].x_c - out.x_d[i];
        }
    }
    out.u_applied = saturate(out.u_raw, model.u_min, model.u_max);
    out.delta_u = out.u_applied - out.u_raw;
}

} // namespace

const char* to_string(Region r)
{
    switch (r) {
    case Region::Safe: return "safe";
    case Region::Transition: return "transition";
    case Region::Outside: return "outside";
    case Region::DeadZone: return "deadzone";
    }
    return "?";
}

Region region_from_string(const std::string& s)
{
    if (s == "safe") return Region::Safe;
    if (s == "transition") return Region::Transition;
    if (s == "outside") return Region::Outside;
    if (s == "deadzone") return Region::DeadZone;
    throw ConfigError("unknown region label: " + s);
}

const char* to_string(ControllerType t)
{
    switch (t) {
    case ControllerType::bcfb: return "bcfb";
    case ControllerType::cfb: return "cfb";
    case ControllerType::bpc: return "bpc";
    }
    return "?";
}

ControllerType controller_from_string(const std::string& s)
{
    if (s == "bcfb") return ControllerType::bcfb;
    if (s == "cfb") return ControllerType::cfb;
    if (s == "bpc") return ControllerType::bpc;
    throw ConfigError("unknown controller type: " + s);
}

void bcfb_errors(const Vec& x, double y_d, const BcfbState& st, Vec& s, Vec& z)
{
    const std::size_t n = x.size();
    s.resize(n);
    z.resize(n);
    s[0] = x[0] - y_d;
    for (std::size_t i = 1; i < n; ++i) {
        s[i] = x[i] - st.filters[i - 1].x_c;
    }
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = s[i] - st.eta[i];
    }
}

BcfbState init_bcfb_state(const PlantModel& model, const ControllerConfig& cfg,
                          const Vec& x0, const Reference& ref0)
{
    const std::size_t n = model.n;
    if (cfg.gains.size() != n) {
        throw DimensionError("need one gain per stage");
    }
    if (n >= 2 && cfg.tau.size() != n - 1) {
        throw DimensionError("need one filter constant per virtual stage");
    }
    BcfbState st;
    st.eta.assign(n, 0.0);

    Vec f_vals, g_vals;
    eval_stages(model, x0, f_vals, g_vals);

    // Filters start on their commands, so every xdot_{i,c}(0) is exactly zero
    // and the cascade can be unrolled sequentially.
    Vec s(n, 0.0);
    s[0] = x0[0] - ref0.y;
    double prev_xd = (-cfg.gains[0] * s[0] - f_vals[0] + ref0.dy) / g_vals[0];
    for (std::size_t i = 1; i < n; ++i) {
        st.filters.push_back(init_filter(cfg.tau[i - 1], prev_xd));
        s[i] = x0[i] - prev_xd;
        if (i + 1 < n) {
            prev_xd = (-cfg.gains[i] * s[i] - f_vals[i] - g_vals[i - 1] * s[i - 1] + 0.0)
                / g_vals[i];
        }
    }
    return st;
}

ControlOutput bcfb_control(const PlantModel& model, const Vec& x, const Reference& ref,
                           const BcfbState& st, const ControllerConfig& cfg,
                           const InvariantCertificate& cert, const PerformanceSpec& spec,
                           double t)
{
    ControlOutput out;
    Vec f_vals;
    eval_stages(model, x, f_vals, out.g_vals);
    bcfb_errors(x, ref.y, st, out.s, out.z);

    out.rho = ppf(spec, t);
    out.gamma = cert.gamma_at(out.rho);
    out.lyap = quadratic_form(cert.P, out.z);
    out.f_p = pse_bcfb(out.lyap, out.gamma, spec.sigma * out.gamma);
    out.f_t = 1.0;
    out.e = out.s[0];
    out.region = classify_bcfb(out.lyap, out.gamma, spec.sigma);

    backstepping_cascade(model, ref, st, cfg.gains, f_vals, out.g_vals, out.s, out.z,
                         out.z[0], out);
    return out;
}

ControlOutput cfb_control(const PlantModel& model, const Vec& x, const Reference& ref,
                          const BcfbState& st, const ControllerConfig& cfg,
                          const InvariantCertificate& cert, const PerformanceSpec& spec,
                          double t)
{
    ControlOutput out;
    Vec f_vals;
    eval_stages(model, x, f_vals, out.g_vals);
    bcfb_errors(x, ref.y, st, out.s, out.z);

    out.rho = ppf(spec, t);
    out.gamma = cert.gamma_at(out.rho);
    out.lyap = quadratic_form(cert.P, out.z);
    // Reported for comparison plots only; the baseline never acts on it.
    out.f_p = pse_bcfb(out.lyap, out.gamma, spec.sigma * out.gamma);
    out.f_t = 1.0;
    out.e = out.s[0];
    out.region = classify_bcfb(out.lyap, out.gamma, spec.sigma);

    backstepping_cascade(model, ref, st, cfg.gains, f_vals, out.g_vals, out.s, out.z,
                         out.s[0], out);
    return out;
}

Vec bcfb_aux_derivative(const BcfbState& st, double f_p, const Vec& g_vals, const Vec& x_e,
                        double delta_u, const Vec& k)
{
    const std::size_t n = st.eta.size();
    Vec d(n, 0.0);
    if (n == 1) {
        d[0] = -k[0] * st.eta[0] + g_vals[0] * delta_u;
        return d;
    }
    d[0] = -f_p * k[0] * st.eta[0] + (1.0 - f_p) * g_vals[0] * (st.eta[1] + x_e[0]);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        d[i] = -k[i] * st.eta[i] + g_vals[i] * (st.eta[i + 1] + x_e[i]);
    }
    d[n - 1] = -k[n - 1] * st.eta[n - 1] + g_vals[n - 1] * delta_u;
    return d;
}

Vec cfb_aux_derivative(const BcfbState& st, const Vec& g_vals, const Vec& x_e,
                       double delta_u, const Vec& k)
{
    const std::size_t n = st.eta.size();
    Vec d(n, 0.0);
    if (n == 1) {
        d[0] = -k[0] * st.eta[0] + g_vals[0] * delta_u;
        return d;
    }
    d[0] = -k[0] * st.eta[0] + g_vals[0] * (st.eta[1] + x_e[0]);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        d[i] = -k[i] * st.eta[i] + g_vals[i] * (st.eta[i + 1] + x_e[i]);
    }
    d[n - 1] = -k[n - 1] * st.eta[n - 1] + g_vals[n - 1] * delta_u;
    return d;
}

void bpc_errors(const Vec& x, double y_r, const BpcState& st, const EtfState& etf, Vec& s,
                Vec& z)
{
    const std::size_t n = x.size();
    if (!(st.rho > 0.0)) {
        throw DomainError("performance state must be positive");
    }
    s.resize(n);
    z.resize(n);
    const double e = x[0] - y_r;
    s[0] = etf_inverse(etf, e / st.rho).z1;
    z[0] = s[0];
    for (std::size_t i = 1; i < n; ++i) {
        s[i] = x[i] - st.filters[i - 1].x_c;
        z[i] = s[i] - st.eta[i];
    }
}

BpcState init_bpc_state(const PlantModel& model, const ControllerConfig& cfg,
                        const PerformanceSpec& spec, const EtfState& etf, const Vec& x0,
                        const Reference& ref0)
{
    const std::size_t n = model.n;
    if (cfg.gains.size() != n) {
        throw DimensionError("need one gain per stage");
    }
    if (n >= 2 && cfg.tau.size() != n - 1) {
        throw DimensionError("need one filter constant per virtual stage");
    }
    if (!(cfg.nu > -1.0)) {
        throw DomainError("nu must exceed -1");
    }
    BpcState st;
    st.rho = spec.rho0;
    st.nu = cfg.nu;
    st.eta.assign(n, 0.0);

    Vec f_vals, g_vals;
    eval_stages(model, x0, f_vals, g_vals);

    const double e0 = x0[0] - ref0.y;
    const double z1 = etf_inverse(etf, e0 / st.rho).z1;
    const double mu = etf_lambda_mu(etf, e0, st.rho).mu;

    Vec s(n, 0.0);
    s[0] = z1;
    double prev_xd =
        (-cfg.gains[0] * std::pow(mu, cfg.nu - 1.0) * z1 - f_vals[0] + ref0.dy) / g_vals[0];
    for (std::size_t i = 1; i < n; ++i) {
        st.filters.push_back(init_filter(cfg.tau[i - 1], prev_xd));
        s[i] = x0[i] - prev_xd;
        if (i + 1 < n) {
            const double cross = (i == 1) ? g_vals[0] * mu * z1 : g_vals[i - 1] * s[i - 1];
            prev_xd = (-cfg.gains[i] * s[i] - f_vals[i] - cross + 0.0) / g_vals[i];
        }
    }
    return st;
}

ControlOutput bpc_control(const PlantModel& model, const Vec& x, const Reference& ref,
                          const BpcState& st, const ControllerConfig& cfg, const Mat& P,
                          const PerformanceSpec& spec, const EtfState& etf)
{
    const std::size_t n = model.n;
    ControlOutput out;
    Vec f_vals;
    eval_stages(model, x, f_vals, out.g_vals);

    out.e = x[0] - ref.y;
    const EtfInverse inv = etf_inverse(etf, out.e / st.rho);
    const EtfSlope slope = etf_lambda_mu(etf, out.e, st.rho);
    out.etf_clamped = inv.clamped || slope.clamped;
    out.mu = slope.mu;
    bpc_errors(x, ref.y, st, etf, out.s, out.z);

    const Vec& k = cfg.gains;
    out.x_d.assign(n >= 1 ? n - 1 : 0, 0.0);
    out.x_e.assign(n >= 1 ? n - 1 : 0, 0.0);
    const double top =
        -k[0] * std::pow(out.mu, st.nu - 1.0) * out.z[0] - f_vals[0] + ref.dy;
    if (n == 1) {
        out.u_raw = top / out.g_vals[0];
    } else {
        out.x_d[0] = top / out.g_vals[0];
        double xc_dot = filter_derivative(st.filters[0], out.x_d[0]);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            // Stage 2 couples back through the scaled first error.
            const double cross =
                (i == 1) ? out.g_vals[0] * out.mu * out.z[0] : out.g_vals[i - 1] * out.z[i - 1];
            out.x_d[i] = (-k[i] * out.s[i] - f_vals[i] - cross + xc_dot) / out.g_vals[i];
            xc_dot = filter_derivative(st.filters[i], out.x_d[i]);
        }
        const double cross_u = (n == 2) ? out.g_vals[0] * out.mu * out.z[0]
                                        : out.g_vals[n - 2] * out.z[n - 2];
        out.u_raw = (-k[n - 1] * out.s[n - 1] - f_vals[n - 1] - cross_u + xc_dot)
            / out.g_vals[n - 1];
        for (std::size_t i = 0; i + 1 < n; ++i) {
            out.x_e[i] = st.filters[i].x_c - out.x_d[i];
        }
    }
    out.u_applied = saturate(out.u_raw, model.u_min, model.u_max);
    out.delta_u = out.u_applied - out.u_raw;

    out.lyap = phi_level(out.z, P, out.mu, st.nu);
    out.gamma = 1.0;
    out.rho = st.rho;
    out.f_p = cfg.force_safe ? 1.0 : pse_bpc(out.lyap, spec.phi0);
    out.f_t = dzt(out.e, st.rho, spec.eps_dz);
    out.region =
        classify_bpc(out.lyap, spec.phi0, std::fabs(out.e) / st.rho, spec.eps_dz);
    return out;
}

BpcAuxDerivative bpc_aux_derivative(const BpcState& st, double f_p, double f_t, double e,
                                    const Vec& g_vals, const Vec& x_e, double delta_u,
                                    const PerformanceSpec& spec, const Vec& k)
{
    const std::size_t n = st.eta.size();
    BpcAuxDerivative out;
    out.eta_dot.assign(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        out.eta_dot[i] = -k[i] * st.eta[i] + g_vals[i] * st.eta[i + 1] + g_vals[i] * x_e[i];
    }
    if (n >= 2) {
        out.eta_dot[n - 1] = -k[n - 1] * st.eta[n - 1] + g_vals[n - 1] * delta_u;
    }

    out.rho_dot = -f_p * spec.k_rho * (st.rho - spec.rho_inf);
    // The (rho/e) factor exists only outside the dead zone, where
    // |e| > eps/2 * rho > 0 by construction.
    if (f_t > 0.0 && f_p < 1.0 && n >= 2) {
        out.rho_dot += (1.0 - f_p) * f_t * (st.rho / e) * g_vals[0] * (st.eta[1] + x_e[0]);
    }
    if (st.rho <= 0.5 * spec.rho_inf && out.rho_dot < 0.0) {
        out.rho_dot = 0.0;
        out.floored = true;
    }
    return out;
}

} // namespace bcl
