#pragma once

#include <string>
#include <vector>

#include "bcl/filters.hpp"
#include "bcl/invariant.hpp"
#include "bcl/linalg.hpp"
#include "bcl/perf.hpp"
#include "bcl/plant.hpp"

namespace bcl {

enum class Region { Safe, Transition, Outside, DeadZone };

const char* to_string(Region r);
Region region_from_string(const std::string& s);

enum class ControllerType { bcfb, cfb, bpc };

const char* to_string(ControllerType t);
ControllerType controller_from_string(const std::string& s);

struct Reference {
    double y = 0.0;
    double dy = 0.0;
};

struct ControllerConfig {
    ControllerType type = ControllerType::bcfb;
    Vec gains;                 // k_1..k_n
    std::vector<double> tau;   // n-1 filter constants
    double nu = 0.0;           // scaled-error exponent, > -1
    bool force_safe = false;   // pin f_p = 1 (plain performance-control baseline)
};

// Auxiliary states of the filtered-backstepping schemes; eta absorbs filter
// errors and the saturation excess so the compensated error z stays clean.
struct BcfbState {
    Vec eta;                            // n entries, eta(0) = 0
    std::vector<CommandFilter> filters; // n-1
};

// Performance-control state: eta[0] is unused (the performance state rho takes
// over the first compensation channel).
struct BpcState {
    double rho = 1.0;
    Vec eta;
    std::vector<CommandFilter> filters;
    double nu = 0.0;
};

struct ControlOutput {
    double u_raw = 0.0;
    double u_applied = 0.0;
    double delta_u = 0.0;
    Vec x_d; // stabilizing functions x_{2,d}..x_{n,d}
    Vec x_e; // filter errors x_{i,c} - x_{i,d}
    Vec s;
    Vec z;
    Vec g_vals;
    double f_p = 1.0;
    double f_t = 1.0;
    double lyap = 0.0;  // V (backstepping schemes) or Phi
    double gamma = 0.0; // Gamma(t), or the static level 1
    double rho = 0.0;   // envelope value / live performance state
    double e = 0.0;     // raw tracking error x1 - y_ref
    double mu = 0.0;
    Region region = Region::Safe;
    bool etf_clamped = false;
};

// --- filtered backstepping (gated and baseline) ---

BcfbState init_bcfb_state(const PlantModel& model, const ControllerConfig& cfg,
                          const Vec& x0, const Reference& ref0);

// s_1 = x_1 - y_d, s_i = x_i - x_{i,c}; z = s - eta.
void bcfb_errors(const Vec& x, double y_d, const BcfbState& st, Vec& s, Vec& z);

ControlOutput bcfb_control(const PlantModel& model, const Vec& x, const Reference& ref,
                           const BcfbState& st, const ControllerConfig& cfg,
                           const InvariantCertificate& cert, const PerformanceSpec& spec,
                           double t);

// Same structure with the always-on compensator and s_1 in the first stage.
ControlOutput cfb_control(const PlantModel& model, const Vec& x, const Reference& ref,
                          const BcfbState& st, const ControllerConfig& cfg,
                          const InvariantCertificate& cert, const PerformanceSpec& spec,
                          double t);

// etadot_1 is gated by f_p; interior stages pass filter errors down the chain;
// the last stage absorbs the saturation excess.
Vec bcfb_aux_derivative(const BcfbState& st, double f_p, const Vec& g_vals, const Vec& x_e,
                        double delta_u, const Vec& k);

Vec cfb_aux_derivative(const BcfbState& st, const Vec& g_vals, const Vec& x_e,
                       double delta_u, const Vec& k);

// --- balanced performance control ---

BpcState init_bpc_state(const PlantModel& model, const ControllerConfig& cfg,
                        const PerformanceSpec& spec, const EtfState& etf, const Vec& x0,
                        const Reference& ref0);

// z_1 = s_1 = T^{-1}(e/rho); higher stages as in the backstepping scheme.
void bpc_errors(const Vec& x, double y_r, const BpcState& st, const EtfState& etf, Vec& s,
                Vec& z);

ControlOutput bpc_control(const PlantModel& model, const Vec& x, const Reference& ref,
                          const BpcState& st, const ControllerConfig& cfg, const Mat& P,
                          const PerformanceSpec& spec, const EtfState& etf);

struct BpcAuxDerivative {
    double rho_dot = 0.0;
    Vec eta_dot;
    bool floored = false;
};

// rho converges toward rho_inf when safe and absorbs the first-channel
// compensation otherwise; the (rho/e) factor is only evaluated when the
// dead-zone transition is strictly positive.
BpcAuxDerivative bpc_aux_derivative(const BpcState& st, double f_p, double f_t, double e,
                                    const Vec& g_vals, const Vec& x_e, double delta_u,
                                    const PerformanceSpec& spec, const Vec& k);

} // namespace bcl
