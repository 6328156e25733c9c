#include <cmath>
#include <random>

#include <doctest.h>

#include "bcl/errors.hpp"
#include "bcl/perf.hpp"

using namespace bcl;

namespace {

PerformanceSpec case_a_spec()
{
    PerformanceSpec s;
    s.rho0 = 1.0;
    s.rho_inf = 0.1;
    s.kappa = 0.5;
    return s;
}

} // namespace

TEST_CASE("performance envelope values")
{
    const PerformanceSpec s = case_a_spec();
    CHECK(ppf(s, 0.0) == doctest::Approx(1.0));
    CHECK(ppf(s, 1e6) == doctest::Approx(0.1));
    CHECK(ppf(s, 2.0) == doctest::Approx(0.9 * std::exp(-1.0) + 0.1).epsilon(1e-14));
}

TEST_CASE("performance envelope decreases toward its floor")
{
    const PerformanceSpec s = case_a_spec();
    double prev = ppf(s, 0.0);
    for (double t = 0.25; t < 20.0; t += 0.25) {
        const double cur = ppf(s, t);
        CHECK(cur < prev);
        CHECK(cur > s.rho_inf);
        prev = cur;
    }
}

TEST_CASE("safety evaluation, time-varying level")
{
    CHECK(pse_bcfb(2.0, 2.0, 1.8) == 0.0);
    CHECK(pse_bcfb(1.8, 2.0, 1.8) == 1.0);
    CHECK(pse_bcfb(1.9, 2.0, 1.8) == doctest::Approx(0.5));
    CHECK(pse_bcfb(5.0, 2.0, 1.8) == 0.0);
    CHECK(pse_bcfb(0.0, 2.0, 1.8) == 1.0);
    CHECK_THROWS_AS(pse_bcfb(1.0, 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(pse_bcfb(1.0, 1.0, 2.0), DomainError);
}

TEST_CASE("safety evaluation, static level")
{
    CHECK(pse_bpc(1.0, 0.7) == 0.0);
    CHECK(pse_bpc(0.7, 0.7) == 1.0);
    CHECK(pse_bpc(0.85, 0.7) == doctest::Approx(0.5));
    CHECK(pse_bpc(3.0, 0.7) == 0.0);
    CHECK(pse_bpc(0.0, 0.7) == 1.0);
}

TEST_CASE("safety evaluations are continuous, monotone and within [0,1]")
{
    const double gamma = 2.0, gamma0 = 1.4;
    double prev = 1.0;
    for (double v = 0.0; v <= 3.0; v += 1e-3) {
        const double f = pse_bcfb(v, gamma, gamma0);
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
        CHECK(f <= prev + 1e-12);
        prev = f;
    }
    // Branch agreement at both boundaries.
    CHECK(pse_bcfb(gamma0 - 1e-12, gamma, gamma0)
          == doctest::Approx(pse_bcfb(gamma0 + 1e-12, gamma, gamma0)).epsilon(1e-9));
    CHECK(pse_bcfb(gamma - 1e-12, gamma, gamma0)
          == doctest::Approx(pse_bcfb(gamma + 1e-12, gamma, gamma0)).epsilon(1e-9));
    CHECK(pse_bpc(0.7 - 1e-12, 0.7) == doctest::Approx(pse_bpc(0.7 + 1e-12, 0.7)));
}

TEST_CASE("dead zone transition ramp")
{
    const double eps = 0.05;
    CHECK(dzt(0.25 * eps * 2.0, 2.0, eps) == 0.0);          // r = 0.25 eps
    CHECK(dzt(2.0 * eps * 2.0, 2.0, eps) == 1.0);           // r = 2 eps
    CHECK(dzt(0.75 * eps * 2.0, 2.0, eps) == doctest::Approx(0.5));
    CHECK(dzt(0.5 * eps, 1.0, eps) == 0.0);                 // lower knee
    CHECK(dzt(eps, 1.0, eps) == 1.0);                       // upper knee
    CHECK(dzt(-0.75 * eps, 1.0, eps) == doctest::Approx(0.5)); // symmetric in e
}

TEST_CASE("error transform forward")
{
    const EtfState s = EtfState::make(1.0, 1.0);
    CHECK(etf_forward(s, 0.0) == 0.0);
    CHECK(etf_forward(s, 0.5) == doctest::Approx(std::tanh(0.5)).epsilon(1e-14));
    CHECK(etf_forward(s, 40.0) == doctest::Approx(1.0));
    CHECK(std::isfinite(etf_forward(s, 1000.0)));
    CHECK(std::isfinite(etf_forward(s, -1000.0)));

    const EtfState asym = EtfState::make(2.0, 0.5);
    CHECK(etf_forward(asym, 50.0) == doctest::Approx(2.0));
    CHECK(etf_forward(asym, -50.0) == doctest::Approx(-0.5));
}

TEST_CASE("error transform inverse")
{
    const EtfState s = EtfState::make(1.0, 1.0);
    CHECK(etf_inverse(s, 0.0).z1 == 0.0);
    CHECK(etf_inverse(s, 0.5).z1 == doctest::Approx(std::atanh(0.5)).epsilon(1e-14));
    CHECK_FALSE(etf_inverse(s, 0.5).clamped);
    CHECK(etf_inverse(s, 2.0).clamped);
    CHECK_THROWS_AS(etf_inverse_strict(s, 1.5), OutOfBandError);
    CHECK_THROWS_AS(etf_inverse_strict(s, -1.0), OutOfBandError);
    CHECK(etf_inverse_strict(s, 0.9) == doctest::Approx(std::atanh(0.9)).epsilon(1e-12));
}

TEST_CASE("error transform round trip")
{
    for (const auto& [db, du] : {std::pair{1.0, 1.0}, {2.0, 0.5}, {0.7, 1.3}}) {
        const EtfState s = EtfState::make(db, du);
        const double lo = -du + 2.0 * s.clamp_margin;
        const double hi = db - 2.0 * s.clamp_margin;
        for (int i = 0; i <= 400; ++i) {
            const double r = lo + (hi - lo) * i / 400.0;
            const double back = etf_forward(s, etf_inverse(s, r).z1);
            CHECK(std::fabs(back - r) <= 1e-10);
        }
    }
}

TEST_CASE("error transform is strictly increasing with the stated range")
{
    const EtfState s = EtfState::make(1.5, 0.8);
    double prev = etf_forward(s, -15.0);
    for (double z = -14.75; z <= 15.0; z += 0.25) {
        const double cur = etf_forward(s, z);
        CHECK(cur > prev);
        CHECK(cur < 1.5);
        CHECK(cur > -0.8);
        prev = cur;
    }
    // Far tails saturate to the band edges at double precision.
    CHECK(etf_forward(s, 400.0) <= 1.5);
    CHECK(etf_forward(s, -400.0) >= -0.8);
}

TEST_CASE("transform slope")
{
    const EtfState s = EtfState::make(1.0, 1.0);
    CHECK(etf_lambda_mu(s, 0.0, 1.0).lambda == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(etf_lambda_mu(s, 0.0, 2.0).mu == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS_AS(etf_lambda_mu(s, 0.0, 0.0), DomainError);

    // At the band edge the slope is capped at the clamp boundary value.
    const EtfSlope capped = etf_lambda_mu(s, 5.0, 1.0);
    CHECK(capped.clamped);
    const double hi = 1.0 - s.clamp_margin;
    const double expect = 0.5 * (1.0 / (hi + 1.0) + 1.0 / (1.0 - hi));
    CHECK(capped.lambda == doctest::Approx(expect).epsilon(1e-12));
    CHECK(capped.lambda == doctest::Approx(0.5 * (0.5 + 1e6)).epsilon(1e-9));
}

TEST_CASE("slope matches a central finite difference of the inverse")
{
    std::mt19937 rng(23);
    for (const auto& [db, du] : {std::pair{1.0, 1.0}, {2.0, 0.5}}) {
        const EtfState s = EtfState::make(db, du);
        std::uniform_real_distribution<double> u(-du + 0.02, db - 0.02);
        for (int i = 0; i < 200; ++i) {
            const double r = u(rng);
            const double h = 1e-6;
            const double fd =
                (etf_inverse(s, r + h).z1 - etf_inverse(s, r - h).z1) / (2.0 * h);
            const double lam = etf_lambda_mu(s, r, 1.0).lambda;
            CHECK(std::fabs(lam - fd) / std::fabs(fd) <= 1e-5);
        }
    }
}

TEST_CASE("invariant set level")
{
    CHECK(gamma_level(1.0, Mat::identity(3).scaled(0.5), {1.0, 0.0, 0.0})
          == doctest::Approx(2.0));
    const Mat x = Mat::diagonal({2.0, 1.0, 1.0});
    CHECK(gamma_level(0.1, x, {1.0, 0.0, 0.0}) == doctest::Approx(0.005));
    CHECK(gamma_level(2.0, x, {1.0, 0.0, 0.0})
          == doctest::Approx(4.0 * gamma_level(1.0, x, {1.0, 0.0, 0.0})));
    CHECK_THROWS_AS(gamma_level(1.0, Mat::diagonal({0.0, 1.0}), {1.0, 0.0}),
                    NotPositiveDefiniteError);
}

TEST_CASE("scaled quadratic level")
{
    const Vec z = {1.0, 1.0, 1.0};
    CHECK(phi_level(z, Mat::identity(3), 2.0, 2.0) == doctest::Approx(6.0));
    CHECK(phi_level({0.0, 0.0, 0.0}, Mat::identity(3), 2.0, 2.0) == 0.0);
    // nu = 0 removes the mu dependence entirely.
    const Mat p = Mat::diagonal({2.0, 1.0, 0.5});
    for (double mu : {0.1, 1.0, 7.3}) {
        CHECK(phi_level(z, p, mu, 0.0) == doctest::Approx(3.5).epsilon(1e-14));
    }
}

TEST_CASE("spec validation")
{
    PerformanceSpec s = case_a_spec();
    s.validate(2.0);
    s.kappa = 2.5;
    CHECK_THROWS_AS(s.validate(2.0), DomainError);
    s.validate(2.0, false); // rate bound waived for the performance-state scheme
    s = case_a_spec();
    s.rho_inf = 1.5;
    CHECK_THROWS_AS(s.validate(2.0), DomainError);
    s = case_a_spec();
    s.sigma = 1.0;
    CHECK_THROWS_AS(s.validate(2.0), DomainError);
    s = case_a_spec();
    s.eps_dz = 0.0;
    CHECK_THROWS_AS(s.validate(2.0), DomainError);
}
