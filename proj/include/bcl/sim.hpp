#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "bcl/controllers.hpp"
#include "bcl/invariant.hpp"
#include "bcl/perf.hpp"
#include "bcl/plant.hpp"

namespace bcl {

enum class IntegratorKind { RK4, Euler };

struct SimConfig {
    double h = 1e-3;
    double T = 10.0;
    IntegratorKind integrator = IntegratorKind::RK4;
    int record_every = 1;
    std::uint64_t seed = 1;
};

using DerivFn = std::function<Vec(double, const Vec&)>;

Vec rk4_step(const DerivFn& fn, double t, const Vec& state, double h);
Vec euler_step(const DerivFn& fn, double t, const Vec& state, double h);

struct TraceRow {
    double t = 0.0;
    Vec x, s, z, eta;
    double rho = 0.0, gamma = 0.0, lyap = 0.0;
    double f_p = 1.0, f_t = 1.0;
    double u_raw = 0.0, u_applied = 0.0, delta_u = 0.0;
    Region region = Region::Safe;
    Vec x_e;
};

struct SimulationTrace {
    std::size_t n = 0;
    std::vector<TraceRow> rows;
};

enum class EventKind {
    SaturationOn,
    SaturationOff,
    EnterSafe,
    ExitSafe,
    ExitOmega,
    EnterOmega,
    EnterDeadZone,
    ExitDeadZone,
    EtfClamp,
    RhoFloor,
};

const char* to_string(EventKind k);

struct Event {
    double t = 0.0;
    EventKind kind = EventKind::SaturationOn;
    std::string detail;
};

struct EventLog {
    std::vector<Event> events;
};

struct SimSummary {
    std::size_t steps = 0;
    long violations = 0;    // band/envelope violations (with 1e-3 slack on |z1|/rho)
    long v_violations = 0;  // steps with V > Gamma (1 + 1e-3); backstepping schemes
    double max_band_ratio = 0.0;
    double max_abs_s1 = 0.0;
    double max_s1_minus_z1 = 0.0;
    double rmse_s1 = 0.0;
    double saturation_duty = 0.0;
    long omega_exits = 0;
    double min_rho = 0.0;
    bool precondition_ok = true;
    std::string precondition_note;
};

struct ScenarioRuntime {
    std::string name;
    PlantModel plant;
    Vec x0;
    DisturbanceSchedule dist;
    std::function<Reference(double)> reference;
    ControllerConfig controller;
    PerformanceSpec perf;
    EtfState etf;
    InvariantCertificate cert;
    bool cert_loaded = false;
    bool force = false;
    SimConfig sim;
};

struct RunResult {
    SimulationTrace trace;
    EventLog events;
    SimSummary summary;
};

// Integrates plant + filters + auxiliary system (+ performance state) as one
// coupled ODE; the switching functions are re-evaluated at every integrator
// stage. Events are detected per step and never decimated.
RunResult run_simulation(const ScenarioRuntime& rt);

struct ComparisonSide {
    std::string label;
    double rmse_x1 = 0.0, rmse_s1 = 0.0, rmse_z1 = 0.0, rmse_u = 0.0;
    double max_abs_s1 = 0.0;
    double max_s1_minus_z1 = 0.0;
    double saturation_duty = 0.0;
    long violations = 0;
};

struct ComparisonReport {
    std::size_t rows = 0;
    ComparisonSide a, b;
};

ComparisonReport compare_runs(const SimulationTrace& a, const SimulationTrace& b);

std::string comparison_table(const ComparisonReport& r);
std::string comparison_csv(const ComparisonReport& r);

// Trace serialization: one header row, 9 significant digits, comma-separated.
void write_trace_csv(const SimulationTrace& trace, std::ostream& os);
SimulationTrace parse_trace_csv(std::istream& is);

void write_events_csv(const EventLog& log, std::ostream& os);

// Whole-file atomic write (temp file + rename).
void write_file_atomic(const std::string& path, const std::string& content);

// Region sequence implied by an initial label and the event list; used to
// cross-check trace labels against the event log.
std::vector<Region> reconstruct_regions(Region initial, const EventLog& log,
                                        const std::vector<double>& times);

} // namespace bcl
