#include "mixdyn/gridsim.hpp"

#include "mixdyn/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <queue>
#include <random>
#include <sstream>

namespace mixdyn {

namespace {

std::string strip(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c != ' ' && c != '\t' && c != '\r') out.push_back(c);
    }
    return out;
}

double to_number(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty()) throw InputError("cannot parse " + what + " '" + s + "'");
    return v;
}

int to_int(const std::string& s, const std::string& what) {
    const double v = to_number(s, what);
    if (v != std::floor(v)) throw InputError(what + " must be an integer, got '" + s + "'");
    return static_cast<int>(v);
}

struct SwingMode {
    double zeta_wn;
    double wd;
};

double swing_response(const SwingMode& mode, const std::vector<std::pair<double, double>>& kicks, double t) {
    double s = 0.0;
    for (const auto& [te, amp] : kicks) {
        const double tau = t - te;
        if (tau >= 0.0) s += amp * std::exp(-mode.zeta_wn * tau) * std::sin(mode.wd * tau);
    }
    return s;
}

}  // namespace

double Network::total_load_kw() const {
    double p = 0.0;
    for (const auto& b : buses) p += b.load_kva.real();
    return p;
}

const Bus& Network::bus(int id) const {
    if (id < 1 || id > static_cast<int>(buses.size())) throw InputError("unknown bus " + std::to_string(id));
    return buses[static_cast<std::size_t>(id - 1)];
}

std::complex<double> parse_complex(const std::string& text) {
    std::string s = strip(text);
    if (s.empty()) throw InputError("empty complex value");
    bool imag_suffix = false;
    if (s.back() == 'i' || s.back() == 'j') {
        imag_suffix = true;
        s.pop_back();
    }
    // split at the last sign that is not part of an exponent and not leading
    std::size_t split = std::string::npos;
    for (std::size_t i = s.size(); i-- > 1;) {
        if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E') {
            split = i;
            break;
        }
    }
    if (split == std::string::npos) {
        const double v = to_number(s, "complex value '" + text + "'");
        return imag_suffix ? std::complex<double>(0.0, v) : std::complex<double>(v, 0.0);
    }
    const double re = to_number(s.substr(0, split), "real part of '" + text + "'");
    const double im = to_number(s.substr(split), "imaginary part of '" + text + "'");
    return {re, im};
}

Network load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open network file " + path.string());
    Network net;
    std::vector<std::pair<int, std::complex<double>>> loads;
    std::string line;
    bool header_seen = false;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (strip(line).empty()) continue;
        if (!header_seen) {
            header_seen = true;
            if (line.find("line_index") != std::string::npos) continue;
        }
        ++row;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(strip(cell));
        if (f.size() != 6) throw InputError(path.string() + ": row " + std::to_string(row) + " needs 6 fields");
        // a row with blank line cells carries only a load
        if (!(f[0].empty() && f[1].empty() && f[2].empty() && f[3].empty())) {
            net.lines.push_back({to_int(f[0], "line index"), to_int(f[1], "from bus"), to_int(f[2], "to bus"),
                                 parse_complex(f[3])});
        }
        loads.emplace_back(to_int(f[4], "node index"), parse_complex(f[5]));
    }
    int max_bus = 1;
    for (const auto& l : net.lines) max_bus = std::max({max_bus, l.from, l.to});
    for (const auto& [id, s] : loads) max_bus = std::max(max_bus, id);
    net.buses.resize(static_cast<std::size_t>(max_bus));
    for (int id = 1; id <= max_bus; ++id) net.buses[static_cast<std::size_t>(id - 1)].id = id;
    for (const auto& l : net.lines) {
        if (l.from < 1 || l.to < 1) throw InputError("bus ids must be positive");
        if (l.from == l.to) throw InputError("line " + std::to_string(l.index) + " connects a bus to itself");
    }
    for (const auto& [id, s] : loads) {
        if (id < 1) throw InputError("bus ids must be positive");
        net.buses[static_cast<std::size_t>(id - 1)].load_kva += s;
    }
    radial_tree(net);
    return net;
}

RadialTree radial_tree(const Network& net) {
    const int n = static_cast<int>(net.buses.size());
    if (n < 1) throw InputError("network has no buses");
    std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(n) + 1);
    for (std::size_t li = 0; li < net.lines.size(); ++li) {
        const auto& l = net.lines[li];
        if (l.from > n || l.to > n) throw InputError("line " + std::to_string(l.index) + " references an unknown bus");
        adj[static_cast<std::size_t>(l.from)].emplace_back(l.to, static_cast<int>(li));
        adj[static_cast<std::size_t>(l.to)].emplace_back(l.from, static_cast<int>(li));
    }
    RadialTree tree;
    tree.parent.assign(static_cast<std::size_t>(n) + 1, -1);
    tree.parent_line.assign(static_cast<std::size_t>(n) + 1, -1);
    tree.parent[1] = 0;
    std::queue<int> q;
    q.push(1);
    while (!q.empty()) {
        const int b = q.front();
        q.pop();
        tree.order.push_back(b);
        for (const auto& [nb, li] : adj[static_cast<std::size_t>(b)]) {
            if (li == tree.parent_line[static_cast<std::size_t>(b)]) continue;
            if (tree.parent[static_cast<std::size_t>(nb)] != -1) {
                throw InputError("network is not radial: line " + std::to_string(net.lines[static_cast<std::size_t>(li)].index) +
                                 " closes a loop");
            }
            tree.parent[static_cast<std::size_t>(nb)] = b;
            tree.parent_line[static_cast<std::size_t>(nb)] = li;
            q.push(nb);
        }
    }
    std::string missing;
    for (int b = 1; b <= n; ++b) {
        if (tree.parent[static_cast<std::size_t>(b)] == -1) missing += (missing.empty() ? "" : ", ") + std::to_string(b);
    }
    if (!missing.empty()) throw InputError("network is disconnected; unreachable buses: " + missing);
    return tree;
}

double BusVoltages::magnitude(int bus) const {
    if (bus < 1 || bus > static_cast<int>(v.size())) throw InputError("unknown bus " + std::to_string(bus));
    return std::abs(v[static_cast<std::size_t>(bus - 1)]);
}

double BusVoltages::angle(int bus) const {
    if (bus < 1 || bus > static_cast<int>(v.size())) throw InputError("unknown bus " + std::to_string(bus));
    return std::arg(v[static_cast<std::size_t>(bus - 1)]);
}

BusVoltages radial_load_flow(const Network& net) {
    constexpr int kMaxIter = 100;
    constexpr double kTol = 1e-10;
    const auto tree = radial_tree(net);
    const std::size_t n = net.buses.size();
    const double zb = net.z_base();

    std::vector<std::complex<double>> s_load(n + 1), z_line(n + 1);
    for (std::size_t b = 1; b <= n; ++b) {
        s_load[b] = net.buses[b - 1].load_kva / (1000.0 * net.base_mva);
        const int li = tree.parent_line[b];
        if (li >= 0) z_line[b] = net.lines[static_cast<std::size_t>(li)].z_ohm / zb;
    }

    std::vector<std::complex<double>> v(n + 1, {1.0, 0.0}), i_branch(n + 1);
    auto backward = [&] {
        for (std::size_t b = 1; b <= n; ++b) i_branch[b] = std::conj(s_load[b] / v[b]);
        for (auto it = tree.order.rbegin(); it != tree.order.rend(); ++it) {
            const int p = tree.parent[static_cast<std::size_t>(*it)];
            if (p > 0) i_branch[static_cast<std::size_t>(p)] += i_branch[static_cast<std::size_t>(*it)];
        }
    };

    BusVoltages out;
    bool converged = false;
    for (int it = 1; it <= kMaxIter; ++it) {
        backward();
        double change = 0.0;
        for (int b : tree.order) {
            const int p = tree.parent[static_cast<std::size_t>(b)];
            if (p <= 0) continue;
            const auto nv = v[static_cast<std::size_t>(p)] - z_line[static_cast<std::size_t>(b)] * i_branch[static_cast<std::size_t>(b)];
            change = std::max(change, std::abs(nv - v[static_cast<std::size_t>(b)]));
            v[static_cast<std::size_t>(b)] = nv;
        }
        out.iterations = it;
        if (change < kTol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NumericError("load flow did not converge in 100 iterations");

    backward();
    // i_branch at the root now holds the total injection (root load included)
    const std::complex<double> s_slack = v[1] * std::conj(i_branch[1]);
    std::complex<double> loads, losses;
    for (std::size_t b = 1; b <= n; ++b) {
        loads += s_load[b];
        if (tree.parent[b] > 0) losses += z_line[b] * std::norm(i_branch[b]);
    }
    out.balance_residual = std::abs(s_slack - loads - losses);
    out.v.assign(v.begin() + 1, v.end());
    return out;
}

double electrical_distance(const Network& net, int a, int b) {
    const auto tree = radial_tree(net);
    const int n = static_cast<int>(net.buses.size());
    if (a < 1 || a > n) throw InputError("unknown bus " + std::to_string(a));
    if (b < 1 || b > n) throw InputError("unknown bus " + std::to_string(b));
    std::vector<double> up(static_cast<std::size_t>(n) + 1, -1.0);
    double d = 0.0;
    for (int x = a; x > 0; x = tree.parent[static_cast<std::size_t>(x)]) {
        up[static_cast<std::size_t>(x)] = d;
        const int li = tree.parent_line[static_cast<std::size_t>(x)];
        if (li >= 0) d += std::abs(net.lines[static_cast<std::size_t>(li)].z_ohm) / net.z_base();
    }
    d = 0.0;
    for (int x = b; x > 0; x = tree.parent[static_cast<std::size_t>(x)]) {
        if (up[static_cast<std::size_t>(x)] >= 0.0) return d + up[static_cast<std::size_t>(x)];
        const int li = tree.parent_line[static_cast<std::size_t>(x)];
        d += std::abs(net.lines[static_cast<std::size_t>(li)].z_ohm) / net.z_base();
    }
    throw InputError("buses are not connected");
}

ScenarioKind parse_scenario_kind(const std::string& name) {
    if (name == "SG") return ScenarioKind::SG;
    if (name == "IBR50") return ScenarioKind::IBR50;
    if (name == "IBR100") return ScenarioKind::IBR100;
    throw InputError("unknown scenario '" + name + "' (expected SG, IBR50 or IBR100)");
}

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::SG: return "SG";
        case ScenarioKind::IBR50: return "IBR50";
        case ScenarioKind::IBR100: return "IBR100";
    }
    return "?";
}

std::size_t Scenario::sample_count() const {
    return static_cast<std::size_t>(std::llround(duration * sample_rate));
}

void Scenario::validate() const {
    if (!(duration > 0.0)) throw InputError("scenario duration must be positive");
    if (!(sample_rate > 0.0)) throw InputError("sample rate must be positive");
    const double clear = fault.start + fault.cycles / 60.0;
    if (fault.start < 0.0 || clear > duration) throw InputError("fault event outside [0, duration]");
    if (load_step.on < 0.0 || load_step.off > duration || load_step.off < load_step.on) {
        throw InputError("load step outside [0, duration]");
    }
}

TimeSeries simulate_scenario(const Network& net, const Scenario& sc, int bus, const SurrogateParams& p) {
    sc.validate();
    static_cast<void>(net.bus(bus));
    static_cast<void>(net.bus(sc.fault.bus));
    static_cast<void>(net.bus(sc.load_step.bus));

    const auto base = radial_load_flow(net);
    Network stepped = net;
    stepped.buses[static_cast<std::size_t>(sc.load_step.bus - 1)].load_kva += sc.load_step.extra_kva;
    const auto heavy = radial_load_flow(stepped);

    const double vb = base.magnitude(bus);
    const double phib = base.angle(bus);
    const double load_gain = heavy.magnitude(bus) / vb - 1.0;
    const double load_shift = heavy.angle(bus) - phib;

    const bool ibr = sc.kind != ScenarioKind::SG;
    const double swing_hz = sc.kind == ScenarioKind::IBR100 ? p.ibr100_swing_hz : p.sg_swing_hz;
    const double zeta = sc.kind == ScenarioKind::IBR100 ? p.ibr100_swing_zeta : p.sg_swing_zeta;
    const double wn = 2.0 * std::numbers::pi * swing_hz;
    const SwingMode mode{zeta * wn, wn * std::sqrt(1.0 - zeta * zeta)};

    const double t_fault = sc.fault.start;
    const double t_clear = t_fault + sc.fault.cycles / p.fundamental_hz;
    const std::vector<std::pair<double, double>> kicks{{0.0, p.kick_start},
                                                       {t_fault, p.kick_fault},
                                                       {t_clear, p.kick_clear},
                                                       {sc.load_step.on, p.kick_load},
                                                       {sc.load_step.off, -p.kick_load}};

    const double proximity = std::exp(-electrical_distance(net, bus, sc.fault.bus) / p.fault_distance_scale);
    const double dip_factor =
        sc.kind == ScenarioKind::SG ? 1.0 : (sc.kind == ScenarioKind::IBR50 ? p.ibr50_dip_factor : p.ibr100_dip_factor);
    const double depth = p.fault_depth * dip_factor * proximity;
    const double tone_amp =
        sc.kind == ScenarioKind::IBR50 ? p.ibr50_tone_amplitude : (sc.kind == ScenarioKind::IBR100 ? p.ibr100_tone_amplitude : 0.0);

    const std::size_t n = sc.sample_count();
    const double dt = 1.0 / sc.sample_rate;
    const double w0 = 2.0 * std::numbers::pi * p.fundamental_hz;
    const double w1 = 2.0 * std::numbers::pi * p.tone1_hz;
    const double w2 = 2.0 * std::numbers::pi * p.tone2_hz;
    const double wi = 2.0 * std::numbers::pi * p.impulse_hz;

    TimeSeries out{0.0, dt, std::vector<double>(n), "bus" + std::to_string(bus)};
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double s = swing_response(mode, kicks, t);
        const double a = p.amplitude_gain * s;
        const double delta = p.phase_gain * s;

        double dip = 0.0;
        if (t >= t_fault && t < t_clear) {
            dip = depth;
        } else if (t >= t_clear) {
            dip = depth * std::exp(-(t - t_clear) / p.fault_recovery_tau);
        }

        double w_load = 0.0;
        if (t >= sc.load_step.on && t < sc.load_step.off) {
            w_load = 1.0 - std::exp(-(t - sc.load_step.on) / p.load_tau);
        } else if (t >= sc.load_step.off) {
            const double w_off = 1.0 - std::exp(-(sc.load_step.off - sc.load_step.on) / p.load_tau);
            w_load = w_off * std::exp(-(t - sc.load_step.off) / p.load_tau);
        }

        const double amp = vb * (1.0 + a) * (1.0 - dip) * (1.0 + load_gain * w_load);
        const double phase = w0 * t + phib + delta - p.fault_phase_jump * dip + load_shift * w_load;
        double v = amp * std::sin(phase);

        if (ibr) {
            v += tone_amp * vb * (1.0 + p.tone_modulation * a) *
                 (std::sin(w1 * t + p.tone1_phase) + std::sin(w2 * t + p.tone2_phase));
            for (double te : {t_fault, t_clear}) {
                const double tau = t - te;
                if (tau < 0.0) continue;
                const double raw = p.impulse_amplitude * proximity * std::exp(-tau / p.impulse_tau) * std::sin(wi * tau);
                v += std::clamp(raw, -p.impulse_clip, p.impulse_clip);
            }
        }
        out.values[i] = v;
    }

    const double sigma = std::pow(10.0, -p.snr_db / 20.0) * rms(out.values);
    std::mt19937_64 rng(sc.seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& v : out.values) v += noise(rng);
    return out;
}

}  // namespace mixdyn
