#include "bcl/plant.hpp"

#include <algorithm>
#include <cmath>

#include "bcl/errors.hpp"

namespace bcl {

void PlantModel::validate() const
{
    if (n == 0 || f.size() != n || g.size() != n) {
        throw DimensionError("plant stage count mismatch");
    }
    if (!(u_min < 0.0) || !(u_max > 0.0)) {
        throw DomainError("saturation bounds must satisfy u_min < 0 < u_max");
    }
    for (const auto& [gm, gM] : g_bounds) {
        if (!(gM > gm) || !(gm > 0.0)) {
            throw DomainError("gain envelope must satisfy g_M > g_m > 0");
        }
    }
}

double saturate(double u, double u_min, double u_max)
{
    if (!(u_min < u_max)) {
        throw DomainError("saturation bounds must satisfy u_min < u_max");
    }
    return std::clamp(u, u_min, u_max);
}

Vec plant_derivative(const PlantModel& model, const PlantState& state, double u,
                     const Vec& omega)
{
    if (state.x.size() != model.n || omega.size() != model.n) {
        throw DimensionError("plant state/disturbance dimension mismatch");
    }
    Vec dx(model.n, 0.0);
    for (std::size_t i = 0; i < model.n; ++i) {
        const double fi = model.f[i](state.x);
        const double gi = model.g[i](state.x);
        if (!std::isfinite(fi) || !std::isfinite(gi)) {
            throw NonFiniteError("plant stage evaluation is non-finite");
        }
        const double next = (i + 1 < model.n)
            ? state.x[i + 1]
            : saturate(u, model.u_min, model.u_max);
        dx[i] = fi + gi * next + omega[i];
    }
    return dx;
}

double DisturbanceSchedule::pulse_value(double t) const
{
    double p = 0.0;
    for (double tj : pulse_times) {
        if (t >= tj) {
            p += pulse_amp * std::exp(-pulse_decay * (t - tj));
        }
    }
    return p;
}

Vec evaluate_disturbance(const DisturbanceSchedule& sched, double t, const Vec& x)
{
    Vec w = sched.base ? sched.base(t, x) : Vec(x.size(), 0.0);
    const double p = sched.pulse_value(t);
    for (double& wi : w) {
        wi += p;
    }
    return w;
}

PlantModel make_paper_plant()
{
    PlantModel m;
    m.n = 3;
    m.f = {
        [](const Vec& x) { return std::sin(x[0]) / (1.0 + x[0] * x[0]); },
        [](const Vec& x) {
            const double p = x[0] * x[1];
            return std::tanh(x[1]) * std::exp(-(p * p * p * p));
        },
        [](const Vec& x) { return x[0] * x[1]; },
    };
    m.g = {
        [](const Vec&) { return 1.0; },
        [](const Vec&) { return 1.0; },
        [](const Vec&) { return 1.0; },
    };
    // Documentation band around the unit gains.
    m.g_bounds = {{0.5, 1.5}, {0.5, 1.5}, {0.5, 1.5}};
    m.u_min = -5.0;
    m.u_max = 5.0;
    return m;
}

PlantModel make_integrator_chain(std::size_t n, double u_min, double u_max)
{
    PlantModel m;
    m.n = n;
    for (std::size_t i = 0; i < n; ++i) {
        m.f.emplace_back([](const Vec&) { return 0.0; });
        m.g.emplace_back([](const Vec&) { return 1.0; });
        m.g_bounds.emplace_back(0.5, 1.5);
    }
    m.u_min = u_min;
    m.u_max = u_max;
    return m;
}

DisturbanceSchedule make_paper_disturbance(double pulse_amp, std::vector<double> pulse_times,
                                           double pulse_decay)
{
    DisturbanceSchedule d;
    d.base = [](double t, const Vec& x) {
        return Vec{0.1 * std::sin(x[0]) * std::cos(t),
                   0.15 * std::sin(x[0] * x[1]),
                   0.1 * std::cos(x[2]) * std::sin(t)};
    };
    d.pulse_times = std::move(pulse_times);
    d.pulse_amp = pulse_amp;
    d.pulse_decay = pulse_decay;
    return d;
}

DisturbanceSchedule make_zero_disturbance(std::size_t n)
{
    DisturbanceSchedule d;
    d.base = [n](double, const Vec&) { return Vec(n, 0.0); };
    return d;
}

} // namespace bcl
