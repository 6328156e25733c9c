#pragma once

#include "bcl/linalg.hpp"

namespace bcl {

// Constraint geometry shared by both schemes. kappa/sigma drive the filtered
// backstepping branch, k_rho/phi0/eps_dz the performance-control branch.
struct PerformanceSpec {
    double rho0 = 1.0;
    double rho_inf = 0.1;
    double kappa = 0.5;   // envelope decay rate
    double k_rho = 0.5;   // performance-state convergence rate
    double delta_bar = 1.0;
    double delta_under = 1.0;
    double sigma = 0.9;   // safety fraction of the invariant level
    double phi0 = 0.7;    // safety level of Phi
    double eps_dz = 0.05; // dead-zone width on |e|/rho

    // k1 is the first backstepping gain; the envelope rate may not exceed it.
    // The kappa bound only binds the schemes that use the static envelope.
    void validate(double k1, bool kappa_bound_applies = true) const;
};

// Exponential performance envelope rho(t) = (rho0 - rho_inf) e^{-kappa t} + rho_inf.
double ppf(const PerformanceSpec& spec, double t);

// Safety evaluation against a time-varying level: 1 inside the safety region
// (V <= gamma0), 0 outside the invariant set (V >= gamma), linear between.
double pse_bcfb(double v, double gamma, double gamma0);

// Same shape against the static level Phi <= 1 with safety level phi0.
double pse_bpc(double phi, double phi0);

// Dead-zone transition on r = |e|/rho: 0 for r <= eps/2, 1 for r >= eps,
// linear ramp between.
double dzt(double e, double rho, double eps);

struct EtfState {
    double delta_bar = 1.0;
    double delta_under = 1.0;
    double clamp_margin = 1e-6;

    static EtfState make(double delta_bar, double delta_under,
                         double relative_margin = 1e-6);
};

// T(z1) = (db e^z - du e^-z)/(e^z + e^-z), strictly increasing onto (-du, db).
double etf_forward(const EtfState& s, double z1);

struct EtfInverse {
    double z1 = 0.0;
    bool clamped = false;
};

// Inverse transform with the band ratio clamped to [-du+margin, db-margin].
EtfInverse etf_inverse(const EtfState& s, double ratio);

// Throws OutOfBandError instead of clamping.
double etf_inverse_strict(const EtfState& s, double ratio);

struct EtfSlope {
    double lambda = 0.0;
    double mu = 0.0;
    bool clamped = false;
};

// lambda = dT_inv/d(e/rho) = (1/(r+du) + 1/(db-r))/2, mu = lambda/rho,
// evaluated at the clamped ratio so both stay finite at the band edge.
EtfSlope etf_lambda_mu(const EtfState& s, double e, double rho);

// Invariant-set level Gamma(t) = rho(t)^2 / (C X C^T).
double gamma_level(double rho_t, const Mat& X, const Vec& C);

// Phi = z^T D_mu^{nu/2} P D_mu^{nu/2} z.
double phi_level(const Vec& z, const Mat& P, double mu, double nu);

} // namespace bcl
