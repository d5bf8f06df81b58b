#pragma once

#include "mixdyn/timeseries.hpp"

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mixdyn {

struct Bus {
    int id = 0;
    std::complex<double> load_kva;  ///< P + jQ in kW / kVAR
};

struct Line {
    int index = 0;
    int from = 0;
    int to = 0;
    std::complex<double> z_ohm;  ///< r + jx
};

/// Radial feeder. Bus ids run 1..N with bus 1 as the slack source.
struct Network {
    std::vector<Bus> buses;  ///< buses[i].id == i + 1
    std::vector<Line> lines;
    double base_kv = 11.0;
    double base_mva = 1.0;

    [[nodiscard]] double z_base() const noexcept { return base_kv * base_kv / base_mva; }
    [[nodiscard]] double total_load_kw() const;
    [[nodiscard]] const Bus& bus(int id) const;
};

/// Reads the network fixture: one row per line, and the load of `node_index`
/// carried on the same row. Complex cells look like `1.53+1.778i` and `100+60`.
/// Leaving the four line cells blank keeps the row's load without a line.
Network load_network(const std::filesystem::path& path);

/// Parses "a+bi", "a-bi", "a+b" (imaginary part without suffix) or a plain real number.
std::complex<double> parse_complex(const std::string& text);

/// Tree rooted at bus 1 with line directions normalized away from the source.
struct RadialTree {
    std::vector<int> parent;       ///< indexed by bus id; 0 for the root
    std::vector<int> parent_line;  ///< index into Network::lines, -1 for the root
    std::vector<int> order;        ///< bus ids in breadth-first order from the root
};

/// Throws InputError naming unreachable buses, or when the graph has a loop.
RadialTree radial_tree(const Network& net);

struct BusVoltages {
    std::vector<std::complex<double>> v;  ///< per unit, indexed by bus id - 1
    int iterations = 0;
    double balance_residual = 0.0;  ///< |S_slack - loads - losses| in per unit

    [[nodiscard]] double magnitude(int bus) const;
    [[nodiscard]] double angle(int bus) const;
};

/// Constant-power backward/forward sweep until the largest voltage update is below 1e-10 pu.
BusVoltages radial_load_flow(const Network& net);

/// Sum of |z| (per unit) along the tree path between two buses.
double electrical_distance(const Network& net, int a, int b);

enum class ScenarioKind { SG, IBR50, IBR100 };

ScenarioKind parse_scenario_kind(const std::string& name);
std::string to_string(ScenarioKind kind);

struct FaultEvent {
    int bus = 10;
    double start = 3.3;
    double cycles = 4.0;  ///< cleared after this many fundamental cycles
};

struct LoadStep {
    int bus = 14;
    double on = 7.0;
    double off = 8.0;
    std::complex<double> extra_kva{300.0, 150.0};
};

struct Scenario {
    ScenarioKind kind = ScenarioKind::SG;
    double duration = 10.0;
    double sample_rate = 20000.0;
    FaultEvent fault;
    LoadStep load_step;
    std::uint64_t seed = 1;

    [[nodiscard]] std::size_t sample_count() const;
    void validate() const;
};

/// Every constant of the waveform surrogate.
struct SurrogateParams {
    double fundamental_hz = 60.0;

    // Electromechanical swing mode s(t): damped oscillator kicked at each event.
    double sg_swing_hz = 1.5;
    double sg_swing_zeta = 0.1;
    double ibr100_swing_hz = 4.0;
    double ibr100_swing_zeta = 0.03;
    double kick_start = 0.5;
    double kick_fault = 1.0;
    double kick_clear = -0.6;
    double kick_load = 0.4;
    double amplitude_gain = 0.02;  ///< a(t) = amplitude_gain * s(t)
    double phase_gain = 0.05;      ///< delta(t) = phase_gain * s(t), radians

    // Fault: amplitude dip attenuated with electrical distance from the faulted bus.
    double fault_depth = 0.6;
    double fault_distance_scale = 0.1;  ///< per-unit impedance
    double fault_recovery_tau = 0.05;   ///< seconds
    double fault_phase_jump = 0.2;      ///< radians per unit depth
    double ibr50_dip_factor = 0.5;
    double ibr100_dip_factor = 0.0;

    // Load step transitions.
    double load_tau = 0.02;

    // Fast inverter component.
    double tone1_hz = 1800.0;
    double tone2_hz = 2400.0;
    double tone1_phase = 0.3;
    double tone2_phase = 1.1;
    double ibr50_tone_amplitude = 0.05;
    double ibr100_tone_amplitude = 0.10;
    double tone_modulation = 15.0;  ///< tones scale with (1 + tone_modulation * a(t))

    // Clipped fault-current impulses.
    double impulse_amplitude = 0.8;
    double impulse_clip = 0.3;
    double impulse_hz = 1000.0;
    double impulse_tau = 0.002;

    double snr_db = 60.0;
};

/// Voltage waveform (per unit) at `bus`, sampled at sc.sample_rate over [0, sc.duration).
TimeSeries simulate_scenario(const Network& net, const Scenario& sc, int bus, const SurrogateParams& p = {});

}  // namespace mixdyn
