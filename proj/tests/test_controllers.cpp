#include <cmath>
#include <random>

#include <doctest.h>

#include "bcl/controllers.hpp"
#include "bcl/errors.hpp"
#include "bcl/sim.hpp"

using namespace bcl;

namespace {

struct CaseASetup {
    PlantModel plant = make_paper_plant();
    ControllerConfig cfg;
    PerformanceSpec spec;
    InvariantCertificate cert;

    CaseASetup()
    {
        cfg.type = ControllerType::bcfb;
        cfg.gains = {2.0, 3.0, 4.0};
        cfg.tau = {0.01, 0.01};
        spec.rho0 = 1.0;
        spec.rho_inf = 0.1;
        spec.kappa = 0.5;
        spec.sigma = 0.9;
        cert = search_trivial_solution(cfg.gains, spec.kappa, Mat::identity(3),
                                       {{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}});
    }
};

struct CaseBSetup {
    PlantModel plant = make_paper_plant();
    ControllerConfig cfg;
    PerformanceSpec spec;
    EtfState etf = EtfState::make(1.0, 1.0);
    InvariantCertificate cert;

    CaseBSetup()
    {
        cfg.type = ControllerType::bpc;
        cfg.gains = {1.0, 1.0, 1.0};
        cfg.tau = {0.01, 0.01};
        cfg.nu = 0.0;
        spec.rho0 = 1.0;
        spec.rho_inf = 0.1;
        spec.k_rho = 0.5;
        spec.phi0 = 0.7;
        spec.eps_dz = 0.05;
        cert = search_trivial_solution(cfg.gains, spec.k_rho, Mat::identity(3),
                                       {{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}});
    }
};

} // namespace

TEST_CASE("error coordinates")
{
    CaseASetup su;
    BcfbState st = init_bcfb_state(su.plant, su.cfg, {-0.8, 0.9, 0.1}, Reference{0.0, 1.0});
    Vec s, z;
    bcfb_errors({-0.8, 0.9, 0.1}, 0.0, st, s, z);
    CHECK(s[0] == doctest::Approx(-0.8));
    CHECK(z == s); // eta starts at zero

    st.eta = {0.1, -0.2, 0.3};
    bcfb_errors({-0.8, 0.9, 0.1}, 0.0, st, s, z);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(z[i] == doctest::Approx(s[i] - st.eta[i]));
    }

    // Output on the reference with no compensation: both first errors vanish.
    st.eta = {0.0, 0.0, 0.0};
    bcfb_errors({0.0, 0.9, 0.1}, 0.0, st, s, z);
    CHECK(s[0] == 0.0);
    CHECK(z[0] == 0.0);
}

TEST_CASE("filters start on their commands")
{
    CaseASetup su;
    const BcfbState st =
        init_bcfb_state(su.plant, su.cfg, {-0.8, 0.9, 0.1}, Reference{0.0, 1.0});
    const ControlOutput out = bcfb_control(su.plant, {-0.8, 0.9, 0.1}, Reference{0.0, 1.0},
                                           st, su.cfg, su.cert, su.spec, 0.0);
    CHECK(out.x_e[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(out.x_e[1] == doctest::Approx(0.0).epsilon(1e-15));

    // Hand cascade: x2d = -k1 z1 - f1 + dy.
    const double f1 = std::sin(-0.8) / 1.64;
    const double x2d = -2.0 * (-0.8) - f1 + 1.0;
    CHECK(st.filters[0].x_c == doctest::Approx(x2d).epsilon(1e-14));
    CHECK(out.x_d[0] == doctest::Approx(x2d).epsilon(1e-14));
}

TEST_CASE("equilibrium gives zero control")
{
    PlantModel chain = make_integrator_chain(3);
    ControllerConfig cfg;
    cfg.type = ControllerType::bcfb;
    cfg.gains = {2.0, 3.0, 4.0};
    cfg.tau = {0.01, 0.01};
    PerformanceSpec spec;
    const InvariantCertificate cert = search_trivial_solution(
        cfg.gains, spec.kappa, Mat::identity(3), {{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}});
    const Vec x0(3, 0.0);
    const BcfbState st = init_bcfb_state(chain, cfg, x0, Reference{0.0, 0.0});
    const ControlOutput out =
        bcfb_control(chain, x0, Reference{0.0, 0.0}, st, cfg, cert, spec, 0.0);
    CHECK(out.u_raw == 0.0);
    CHECK(out.delta_u == 0.0);
    CHECK(out.f_p == 1.0);
    CHECK(out.region == Region::Safe);
}

TEST_CASE("first order reduction")
{
    PlantModel chain = make_integrator_chain(1);
    ControllerConfig cfg;
    cfg.type = ControllerType::bcfb;
    cfg.gains = {2.0};
    PerformanceSpec spec;
    const InvariantCertificate cert =
        search_trivial_solution(cfg.gains, 0.5, Mat::identity(1), {{1.0, 1.0}});
    BcfbState st = init_bcfb_state(chain, cfg, {0.4}, Reference{0.1, 0.3});
    st.eta = {0.05};
    const ControlOutput out =
        bcfb_control(chain, {0.4}, Reference{0.1, 0.3}, st, cfg, cert, spec, 0.0);
    // u = (-k1 z1 - f1 + dy)/g1 with z1 = 0.4 - 0.1 - 0.05.
    CHECK(out.u_raw == doctest::Approx(-2.0 * 0.25 + 0.3).epsilon(1e-14));
}

TEST_CASE("gain singularity is reported")
{
    PlantModel m = make_integrator_chain(2);
    m.g[1] = [](const Vec&) { return 0.0; };
    ControllerConfig cfg;
    cfg.type = ControllerType::bcfb;
    cfg.gains = {1.0, 1.0};
    cfg.tau = {0.01};
    CHECK_THROWS_AS(init_bcfb_state(m, cfg, {0.1, 0.2}, Reference{0.0, 0.0}), DomainError);
}

TEST_CASE("gated compensator derivative")
{
    CaseASetup su;
    BcfbState st;
    st.eta = {0.5, 0.0, 0.0};
    const Vec g(3, 1.0);
    const Vec k = su.cfg.gains;

    // Safe: pure decay of the first channel.
    Vec d = bcfb_aux_derivative(st, 1.0, g, {0.0, 0.0}, 0.0, k);
    CHECK(d[0] == doctest::Approx(-2.0 * 0.5));

    // Danger: the first channel collects the filtered-error chain.
    st.eta = {0.5, 0.3, 0.0};
    d = bcfb_aux_derivative(st, 0.0, g, {0.2, 0.0}, 0.0, k);
    CHECK(d[0] == doctest::Approx(0.3 + 0.2));

    // Ungated baseline keeps the decay term in the first channel.
    const Vec dc = cfb_aux_derivative(st, g, {0.2, 0.0}, 0.0, k);
    CHECK(dc[0] == doctest::Approx(-2.0 * 0.5 + 0.3 + 0.2));

    // Zero solution is exact with clean inputs.
    st.eta = {0.0, 0.0, 0.0};
    d = bcfb_aux_derivative(st, 0.37, g, {0.0, 0.0}, 0.0, k);
    CHECK(norm(d) == 0.0);
    const Vec dz = cfb_aux_derivative(st, g, {0.0, 0.0}, 0.0, k);
    CHECK(norm(dz) == 0.0);
}

TEST_CASE("safe-mode first compensator channel stays at zero once zero")
{
    // With f_p = 1 the first channel decouples, so eta1(t) = eta1(0) e^{-k1 t}.
    CaseASetup su;
    BcfbState st;
    st.eta = {0.8, 0.4, -0.3};
    const Vec g(3, 1.0);
    Vec state = st.eta;
    const double h = 1e-3;
    for (int i = 0; i < 3000; ++i) {
        state = rk4_step(
            [&](double, const Vec& y) {
                BcfbState tmp;
                tmp.eta = y;
                return bcfb_aux_derivative(tmp, 1.0, g, {0.0, 0.0}, 0.0, su.cfg.gains);
            },
            i * h, state, h);
        const double bound = 0.8 * std::exp(-2.0 * (i + 1) * h) + 1e-9;
        CHECK(std::fabs(state[0]) <= bound);
    }
}

TEST_CASE("baseline and gated scheme coincide at a fresh start")
{
    CaseASetup su;
    const Vec x0 = {-0.8, 0.9, 0.1};
    const Reference r0{0.0, 1.0};
    ControllerConfig cfb_cfg = su.cfg;
    cfb_cfg.type = ControllerType::cfb;
    const BcfbState st_b = init_bcfb_state(su.plant, su.cfg, x0, r0);
    const BcfbState st_c = init_bcfb_state(su.plant, cfb_cfg, x0, r0);
    const ControlOutput ob =
        bcfb_control(su.plant, x0, r0, st_b, su.cfg, su.cert, su.spec, 0.0);
    const ControlOutput oc =
        cfb_control(su.plant, x0, r0, st_c, cfb_cfg, su.cert, su.spec, 0.0);
    CHECK(ob.u_raw == doctest::Approx(oc.u_raw).epsilon(1e-14));
    CHECK(ob.x_d[0] == doctest::Approx(oc.x_d[0]).epsilon(1e-14));
}

TEST_CASE("transformed error coordinates")
{
    CaseBSetup su;
    BpcState st = init_bpc_state(su.plant, su.cfg, su.spec, su.etf, {-0.8, 0.9, 0.1},
                                 Reference{0.0, 1.0});
    Vec s, z;

    bpc_errors({0.0, 0.9, 0.1}, 0.0, st, su.etf, s, z);
    CHECK(s[0] == 0.0); // e = 0 with a symmetric band
    CHECK(z[0] == 0.0);

    st.rho = 1.0;
    bpc_errors({0.5, 0.9, 0.1}, 0.0, st, su.etf, s, z);
    CHECK(z[0] == doctest::Approx(std::atanh(0.5)).epsilon(1e-12));

    st.eta = {0.0, 0.0, 0.0};
    bpc_errors({0.5, 0.9, 0.1}, 0.0, st, su.etf, s, z);
    CHECK(z[1] == s[1]);
    CHECK(z[2] == s[2]);
}

TEST_CASE("performance-state control structure")
{
    CaseBSetup su;
    const Vec x0 = {-0.8, 0.9, 0.1};
    const Reference r0{0.0, 1.0};
    const BpcState st = init_bpc_state(su.plant, su.cfg, su.spec, su.etf, x0, r0);
    const ControlOutput out =
        bpc_control(su.plant, x0, r0, st, su.cfg, su.cert.P, su.spec, su.etf);

    // nu = 0 puts 1/mu on the first stage.
    const double e0 = -0.8;
    const double z1 = std::atanh(-0.8);
    const double mu = etf_lambda_mu(su.etf, e0, 1.0).mu;
    const double f1 = std::sin(-0.8) / 1.64;
    CHECK(out.x_d[0] == doctest::Approx(-1.0 * (1.0 / mu) * z1 - f1 + 1.0).epsilon(1e-12));
    CHECK(out.mu == doctest::Approx(mu).epsilon(1e-14));
    CHECK(out.f_t == 1.0); // |e|/rho far beyond the dead zone
    CHECK(out.gamma == 1.0);
}

TEST_CASE("performance-state equilibrium gives zero control")
{
    PlantModel chain = make_integrator_chain(3);
    CaseBSetup su;
    su.plant = chain;
    const Vec x0(3, 0.0);
    const Reference r0{0.0, 0.0};
    const BpcState st = init_bpc_state(chain, su.cfg, su.spec, su.etf, x0, r0);
    const ControlOutput out =
        bpc_control(chain, x0, r0, st, su.cfg, su.cert.P, su.spec, su.etf);
    CHECK(out.u_raw == 0.0);
    CHECK(out.lyap == 0.0);
    CHECK(out.f_p == 1.0);
}

TEST_CASE("performance-state compensator derivative")
{
    CaseBSetup su;
    BpcState st;
    st.rho = 1.0;
    st.eta = {0.0, 0.2, -0.1};
    const Vec g(3, 1.0);
    const Vec k = su.cfg.gains;

    // Safe mode: rho converges toward its floor value.
    BpcAuxDerivative d =
        bpc_aux_derivative(st, 1.0, 1.0, 0.5, g, {0.0, 0.0}, 0.0, su.spec, k);
    CHECK(d.rho_dot == doctest::Approx(-0.5 * (1.0 - 0.1)));
    CHECK(d.eta_dot[1] == doctest::Approx(-0.2 + (-0.1) + 0.0));
    CHECK(d.eta_dot[2] == doctest::Approx(0.1));

    // Frozen inside the dead zone.
    d = bpc_aux_derivative(st, 0.0, 0.0, 1e-9, g, {0.3, 0.0}, 0.0, su.spec, k);
    CHECK(d.rho_dot == 0.0);

    // Compensation pulls rho when unsafe and outside the dead zone.
    d = bpc_aux_derivative(st, 0.0, 1.0, 0.25, g, {0.3, 0.0}, 0.0, su.spec, k);
    CHECK(d.rho_dot == doctest::Approx((1.0 / 0.25) * (0.2 + 0.3)));

    // Floor guard clips a negative compensation drive at the floor; the safe
    // branch below the floor pulls rho back up and is never clipped.
    st.rho = 0.05;
    d = bpc_aux_derivative(st, 0.0, 1.0, 0.25, g, {-0.5, 0.0}, 0.0, su.spec, k);
    CHECK(d.rho_dot == 0.0);
    CHECK(d.floored);
    d = bpc_aux_derivative(st, 1.0, 0.0, 0.5, g, {0.0, 0.0}, 0.0, su.spec, k);
    CHECK(d.rho_dot == doctest::Approx(-0.5 * (0.05 - 0.1)));
    CHECK_FALSE(d.floored);
}

TEST_CASE("bounded transformed error keeps the raw error inside the band")
{
    const EtfState etf = EtfState::make(1.2, 0.6);
    for (double z1 : {-14.0, -3.0, -0.5, 0.0, 0.5, 3.0, 14.0}) {
        const double ratio = etf_forward(etf, z1);
        CHECK(ratio < 1.2);
        CHECK(ratio > -0.6);
    }
}

TEST_CASE("compact-form identity for the gated backstepping scheme")
{
    CaseASetup su;
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> ux(-2.0, 2.0);
    std::uniform_real_distribution<double> uw(-0.5, 0.5);
    const Vec k = su.cfg.gains;

    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Vec x = {ux(rng), ux(rng), ux(rng)};
        BcfbState st;
        st.eta = {uw(rng), uw(rng), uw(rng)};
        st.filters = {CommandFilter{0.01, ux(rng)}, CommandFilter{0.01, ux(rng)}};
        const Reference ref{0.5 * ux(rng), 0.5 * ux(rng)};
        const double t = 2.0 * std::fabs(ux(rng));
        const Vec omega = {uw(rng), uw(rng), uw(rng)};

        const ControlOutput out =
            bcfb_control(su.plant, x, ref, st, su.cfg, su.cert, su.spec, t);
        const Vec eta_dot = bcfb_aux_derivative(st, out.f_p, out.g_vals, out.x_e,
                                                out.delta_u, k);
        const Vec dx = plant_derivative(su.plant, PlantState{x, t}, out.u_raw, omega);

        // Assembled from the definitions of s and z.
        Vec z_dot(3);
        z_dot[0] = dx[0] - ref.dy - eta_dot[0];
        for (std::size_t i = 1; i < 3; ++i) {
            const double xc_dot =
                filter_derivative(st.filters[i - 1], out.x_d[i - 1]);
            z_dot[i] = dx[i] - xc_dot - eta_dot[i];
        }

        // Compact form.
        const Mat a = build_a0(k) + build_ag({out.g_vals[0], out.g_vals[1]});
        Vec rhs = a.apply(out.z);
        rhs[0] += out.f_p
            * (k[0] * st.eta[0] + out.g_vals[0] * (st.eta[1] + out.x_e[0]));
        for (std::size_t i = 0; i < 3; ++i) {
            rhs[i] += omega[i];
            worst = std::max(worst, std::fabs(rhs[i] - z_dot[i]));
        }
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("compact-form identity for the performance-control scheme")
{
    CaseBSetup su;
    std::mt19937 rng(777);
    std::uniform_real_distribution<double> ux(-2.0, 2.0);
    std::uniform_real_distribution<double> uw(-0.5, 0.5);
    std::uniform_real_distribution<double> urho(0.3, 1.2);
    std::uniform_real_distribution<double> uband(-0.85, 0.85);
    const Vec k = su.cfg.gains;

    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        ControllerConfig cfg = su.cfg;
        cfg.nu = (trial % 3 == 0) ? 0.0 : ((trial % 3 == 1) ? 0.5 : -0.4);
        const Vec x = {ux(rng), ux(rng), ux(rng)};
        BpcState st;
        st.nu = cfg.nu;
        st.rho = urho(rng);
        st.eta = {0.0, uw(rng), uw(rng)};
        st.filters = {CommandFilter{0.01, ux(rng)}, CommandFilter{0.01, ux(rng)}};
        // Keep the band ratio away from the clamp so the transform is exact.
        const double ratio = uband(rng);
        const Reference ref{x[0] - ratio * st.rho, 0.5 * ux(rng)};
        const Vec omega = {uw(rng), uw(rng), uw(rng)};

        const ControlOutput out =
            bpc_control(su.plant, x, ref, st, cfg, su.cert.P, su.spec, su.etf);
        REQUIRE_FALSE(out.etf_clamped);
        const BpcAuxDerivative aux =
            bpc_aux_derivative(st, out.f_p, out.f_t, out.e, out.g_vals, out.x_e,
                               out.delta_u, su.spec, k);
        const Vec dx = plant_derivative(su.plant, PlantState{x, 0.0}, out.u_raw, omega);

        Vec z_dot(3);
        const double e_dot = dx[0] - ref.dy;
        z_dot[0] = out.mu * (e_dot - aux.rho_dot * (out.e / st.rho));
        for (std::size_t i = 1; i < 3; ++i) {
            const double xc_dot =
                filter_derivative(st.filters[i - 1], out.x_d[i - 1]);
            z_dot[i] = dx[i] - xc_dot - aux.eta_dot[i];
        }

        const Mat d1 = build_dmu(3, out.mu, 1.0);
        const Mat a = build_dmu(3, out.mu, cfg.nu) * build_a0(k)
            + d1 * build_ag({out.g_vals[0], out.g_vals[1]}) * d1;
        Vec rhs = a.apply(out.z);
        rhs[0] += out.mu * out.f_p * su.spec.k_rho * (out.e / st.rho)
            * (st.rho - su.spec.rho_inf);
        rhs[0] += out.mu * (1.0 + (out.f_p - 1.0) * out.f_t) * out.g_vals[0]
            * (st.eta[1] + out.x_e[0]);
        const Vec dw = d1.apply(omega);
        for (std::size_t i = 0; i < 3; ++i) {
            rhs[i] += dw[i];
            worst = std::max(worst, std::fabs(rhs[i] - z_dot[i]));
        }
    }
    CHECK(worst <= 1e-8);
}
