#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bcl/linalg.hpp"

namespace bcl {

// Strict-feedback chain: xdot_i = f_i(x_1..x_i) + g_i(x_1..x_i) * x_{i+1},
// with the saturated input entering at stage n. The stage callables receive
// the full state vector and read the leading entries they need.
struct PlantModel {
    std::size_t n = 0;
    std::vector<std::function<double(const Vec&)>> f;
    std::vector<std::function<double(const Vec&)>> g;
    // Documented |g_i| envelope (g_m, g_M); logged when violated, not enforced.
    std::vector<std::pair<double, double>> g_bounds;
    double u_min = -1.0;
    double u_max = 1.0;

    void validate() const;
};

struct PlantState {
    Vec x;
    double t = 0.0;
};

double saturate(double u, double u_min, double u_max);

// Raw (pre-saturation) input; stage n applies the clamp internally.
Vec plant_derivative(const PlantModel& model, const PlantState& state, double u,
                     const Vec& omega);

struct DisturbanceSchedule {
    std::function<Vec(double, const Vec&)> base;
    std::vector<double> pulse_times;
    double pulse_amp = 0.0;
    double pulse_decay = 0.1; // per second

    // Total pulse contribution added to every channel at time t.
    double pulse_value(double t) const;
};

Vec evaluate_disturbance(const DisturbanceSchedule& sched, double t, const Vec& x);

// The worked three-state example system: f1 = sin(x1)/(1+x1^2),
// f2 = tanh(x2) exp(-(x1 x2)^4), f3 = x1 x2, unit stage gains, |u| <= 5.
PlantModel make_paper_plant();

// Pure integrator chain of order n (f = 0, g = 1); handy for reduced cases.
PlantModel make_integrator_chain(std::size_t n, double u_min = -5.0, double u_max = 5.0);

// Base disturbances of the example system:
// w1 = 0.1 sin(x1) cos(t), w2 = 0.15 sin(x1 x2), w3 = 0.1 cos(x3) sin(t).
DisturbanceSchedule make_paper_disturbance(double pulse_amp,
                                           std::vector<double> pulse_times,
                                           double pulse_decay = 0.1);

DisturbanceSchedule make_zero_disturbance(std::size_t n);

} // namespace bcl
