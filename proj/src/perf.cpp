#include "bcl/perf.hpp"

#include <algorithm>
#include <cmath>

#include "bcl/errors.hpp"

namespace bcl {

void PerformanceSpec::validate(double k1, bool kappa_bound_applies) const
{
    if (!(rho0 > rho_inf) || !(rho_inf > 0.0)) {
        throw DomainError("performance envelope requires rho0 > rho_inf > 0");
    }
    if (!(kappa > 0.0) || (kappa_bound_applies && kappa > k1)) {
        throw DomainError("envelope rate must satisfy 0 < kappa <= k1");
    }
    if (!(k_rho > 0.0)) {
        throw DomainError("k_rho must be positive");
    }
    if (!(sigma > 0.0) || !(sigma < 1.0)) {
        throw DomainError("sigma must lie in (0, 1)");
    }
    if (!(phi0 > 0.0) || !(phi0 < 1.0)) {
        throw DomainError("phi0 must lie in (0, 1)");
    }
    if (!(eps_dz > 0.0)) {
        throw DomainError("dead-zone width must be positive");
    }
    if (!(delta_bar > 0.0) || !(delta_under > 0.0)) {
        throw DomainError("band scales must be positive");
    }
}

double ppf(const PerformanceSpec& spec, double t)
{
    return (spec.rho0 - spec.rho_inf) * std::exp(-spec.kappa * t) + spec.rho_inf;
}

double pse_bcfb(double v, double gamma, double gamma0)
{
    if (!(gamma0 < gamma)) {
        throw DomainError("safety level must be strictly below the invariant level");
    }
    if (v >= gamma) {
        return 0.0;
    }
    if (v <= gamma0) {
        return 1.0;
    }
    return (gamma - v) / (gamma - gamma0);
}

double pse_bpc(double phi, double phi0)
{
    if (phi >= 1.0) {
        return 0.0;
    }
    if (phi <= phi0) {
        return 1.0;
    }
    return (1.0 - phi) / (1.0 - phi0);
}

double dzt(double e, double rho, double eps)
{
    const double r = std::fabs(e) / rho;
    if (r <= 0.5 * eps) {
        return 0.0;
    }
    if (r >= eps) {
        return 1.0;
    }
    return 2.0 * r / eps - 1.0;
}

EtfState EtfState::make(double delta_bar, double delta_under, double relative_margin)
{
    if (!(delta_bar > 0.0) || !(delta_under > 0.0)) {
        throw DomainError("band scales must be positive");
    }
    EtfState s;
    s.delta_bar = delta_bar;
    s.delta_under = delta_under;
    s.clamp_margin = relative_margin * std::min(delta_bar, delta_under);
    return s;
}

double etf_forward(const EtfState& s, double z1)
{
    // Factor out exp(-|z1|) so large arguments cannot overflow.
    if (z1 >= 0.0) {
        const double q = std::exp(-2.0 * z1);
        return (s.delta_bar - s.delta_under * q) / (1.0 + q);
    }
    const double q = std::exp(2.0 * z1);
    return (s.delta_bar * q - s.delta_under) / (q + 1.0);
}

EtfInverse etf_inverse(const EtfState& s, double ratio)
{
    const double lo = -s.delta_under + s.clamp_margin;
    const double hi = s.delta_bar - s.clamp_margin;
    const double r = std::clamp(ratio, lo, hi);
    EtfInverse out;
    out.clamped = (r != ratio);
    out.z1 = 0.5 * std::log((r + s.delta_under) / (s.delta_bar - r));
    return out;
}

double etf_inverse_strict(const EtfState& s, double ratio)
{
    if (!(ratio > -s.delta_under) || !(ratio < s.delta_bar)) {
        throw OutOfBandError("ratio outside the open performance band");
    }
    return 0.5 * std::log((ratio + s.delta_under) / (s.delta_bar - ratio));
}

EtfSlope etf_lambda_mu(const EtfState& s, double e, double rho)
{
    if (!(rho > 0.0)) {
        throw DomainError("rho must be positive");
    }
    const double lo = -s.delta_under + s.clamp_margin;
    const double hi = s.delta_bar - s.clamp_margin;
    const double ratio = e / rho;
    const double r = std::clamp(ratio, lo, hi);
    EtfSlope out;
    out.clamped = (r != ratio);
    out.lambda = 0.5 * (1.0 / (r + s.delta_under) + 1.0 / (s.delta_bar - r));
    out.mu = out.lambda / rho;
    return out;
}

double gamma_level(double rho_t, const Mat& X, const Vec& C)
{
    const double cxc = quadratic_form(X, C);
    if (!(cxc > 0.0)) {
        throw NotPositiveDefiniteError("C X C^T must be positive");
    }
    return rho_t * rho_t / cxc;
}

double phi_level(const Vec& z, const Mat& P, double mu, double nu)
{
    if (!(mu > 0.0)) {
        throw DomainError("mu must be positive");
    }
    const Mat d = build_dmu(z.size(), mu, 0.5 * nu);
    return quadratic_form(d * P * d, z);
}

} // namespace bcl
