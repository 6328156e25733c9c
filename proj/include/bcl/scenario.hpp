#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bcl/sim.hpp"

namespace bcl {

// Mirror of the on-disk scenario file: sections plant / controller /
// performance / disturbance / sim / output plus a reference selector.
// Unknown keys are rejected when loading.
struct Scenario {
    // plant
    std::string plant_preset = "paper-sec5"; // paper-sec5 | integrator-chain
    std::size_t order = 3;                   // integrator-chain only
    std::optional<double> u_min;
    std::optional<double> u_max;
    std::optional<Vec> x0;

    std::string reference = "sin"; // sin | zero

    ControllerConfig controller;
    PerformanceSpec perf;

    // disturbance
    std::string dist_preset = "paper-sec5"; // paper-sec5 | none
    std::vector<double> pulse_times;
    double pulse_amp = 0.0;
    double pulse_decay = 0.1;

    SimConfig sim;

    std::string out_csv;
    std::string out_events;
};

Scenario load_scenario(const std::string& path);
std::string scenario_to_yaml(const Scenario& s);
void save_scenario(const Scenario& s, const std::string& path);

// Resolve presets into a runnable description (certificate not attached).
ScenarioRuntime make_runtime(const Scenario& s, const std::string& name);

// Seeded variant of a pulse schedule: per-pulse time jitter, a common
// amplitude factor in [0.5, 1.5] and a coin-flip sign.
DisturbanceSchedule make_disturbance_variant(const DisturbanceSchedule& base,
                                             std::uint64_t seed);

// Text of a python/matplotlib script rendering the trace panels; traces of
// the performance-control scheme get an extra rho-derivative panel.
std::string emit_plot_script(const SimulationTrace& trace, const std::string& csv_path);

} // namespace bcl
