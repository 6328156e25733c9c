#pragma once

#include "bcl/errors.hpp"

namespace bcl {

// First-order command filter tau * xdot_c + x_c = x_d. Its own ODE supplies
// the derivative estimate the stabilizing functions need, so no signal is
// ever differentiated numerically.
struct CommandFilter {
    double tau = 0.01;
    double x_c = 0.0;
};

inline CommandFilter init_filter(double tau, double x_d0)
{
    if (!(tau > 0.0)) {
        throw DomainError("filter time constant must be positive");
    }
    return CommandFilter{tau, x_d0}; // filtering error starts at exactly zero
}

inline double filter_derivative(const CommandFilter& f, double x_d)
{
    return (x_d - f.x_c) / f.tau;
}

inline double filtered_derivative_estimate(const CommandFilter& f, double x_d)
{
    return filter_derivative(f, x_d);
}

} // namespace bcl
