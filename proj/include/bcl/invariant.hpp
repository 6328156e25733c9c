#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bcl/linalg.hpp"

namespace bcl {

// The stability inequalities admit two readings that differ in how the
// disturbance weight enters: the direct form
//   A0 X + X A0' + (eps + alpha + 2 kappa) X + alpha W <= 0
// and the Schur-complement form built from
//   H = [[P A0 + A0' P + (eps + alpha + 2 kappa) P, P], [P, -alpha W]] <= 0.
// Both are implemented; certificates record which one gated feasibility.
enum class LmiForm { eq5, h_matrix };

const char* to_string(LmiForm form);
LmiForm lmi_form_from_string(const std::string& s);

struct LmiCheck {
    bool feasible = false;
    double slack_a = 0.0; // worst max eigenvalue of the damping inequality
    double slack_b = 0.0; // worst max eigenvalue of the coupling inequality
};

LmiCheck check_lmi_prop1(const Mat& a0, const std::vector<Mat>& ag_samples, const Mat& X,
                         const Mat& W, double alpha, double eps_lmi, double kappa,
                         double tol, LmiForm form = LmiForm::eq5);

struct Lmi2Check {
    bool feasible = false;
    double slack_a = 0.0;
    double slack_b = 0.0;
    // Largest admissible ||omega|| at the two mu endpoints, from the weighted
    // admissibility ellipsoid.
    double omega_radius_lo = 0.0;
    double omega_radius_hi = 0.0;
};

Lmi2Check check_lmi_prop2(const Mat& a0, const std::vector<Mat>& ag_samples, double x1,
                          const Mat& x2n, const Mat& W, double alpha, double eps_lmi,
                          double kappa, std::pair<double, double> mu_range, double nu,
                          double tol, LmiForm form = LmiForm::eq5);

struct InvariantCertificate {
    std::size_t n = 0;
    Vec gains;                // backstepping gains k_i
    double kappa = 0.5;
    double rho0 = 1.0;
    double rho_inf = 0.1;
    Mat X, P, W;
    double alpha = 0.0;
    double eps_lmi = 0.0;
    double v_h = 1.0;         // scale of the scalar solution X = v_h * I
    bool feasible = false;
    bool w_condition_ok = false; // 1 <= gamma_inf
    double gamma_inf = 0.0;
    double slack_eq5 = 0.0;
    double slack_h = 0.0;
    double witness_slack = 0.0;  // direct-form slack at X = I, alpha = 0.5, eps = 0.1
    LmiForm form = LmiForm::eq5;
    std::vector<std::pair<double, double>> g_bounds;

    double x11() const { return X(0, 0); }
    double gamma_at(double rho_t) const;
    // Disturbance level the certificate actually supports: min(1, gamma_inf).
    double admissible_level() const;

    void save(const std::string& path) const;
    static InvariantCertificate load(const std::string& path);
};

// Scalar-solution search X = v_h I over a fixed (v_h, alpha, eps) grid with
// bisection refinement on v_h, maximizing gamma_inf = rho_inf^2 / v_h subject
// to feasibility of both inequality forms over the coupling-bound corners.
InvariantCertificate search_trivial_solution(
    const Vec& gains, double kappa, const Mat& W,
    const std::vector<std::pair<double, double>>& g_bounds, double rho0 = 1.0,
    double rho_inf = 0.1, LmiForm form = LmiForm::eq5);

struct InvarianceReport {
    bool pass = false;
    bool vacuous = false; // zero trials requested
    double max_ratio_v = 0.0;
    double max_ratio_z1 = 0.0;
    double omega_level = 0.0; // sampled omega' W omega
    int trials = 0;
    std::uint64_t worst_seed = 0;
};

// Integrates zdot = (A0 + A_g) z + omega from boundary starts V(0) = Gamma(0)
// with piecewise-constant disturbances on the admissible ellipsoid and stage
// couplings resampled within their bounds every segment. omega_scale > 1
// pushes beyond the certified level on purpose.
InvarianceReport monte_carlo_invariance(const InvariantCertificate& cert, int n_trials,
                                        double horizon, std::uint64_t rng_seed,
                                        double omega_scale = 1.0);

// Worker cap for trial fan-out: BCL_THREADS, else hardware concurrency.
unsigned worker_count();

} // namespace bcl
