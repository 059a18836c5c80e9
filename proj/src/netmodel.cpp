#include "noma/netmodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "noma/binio.hpp"

namespace noma {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

int ScenarioConfig::auto_k_cap() const {
    int per_bs = (n_users + n_stations() - 1) / n_stations();
    return static_cast<int>(std::ceil(per_bs * 1.5));
}

void ScenarioConfig::validate() const {
    if (n_small < 0) throw ConfigError("n_small must be >= 0");
    if (n_users < 1) throw ConfigError("n_users must be >= 1");
    if (n_subchannels < 1) throw ConfigError("n_subchannels must be >= 1");
    if (macro_radius_m <= 0 || small_radius_m <= 0) throw ConfigError("radii must be positive");
    if (bandwidth_hz <= 0) throw ConfigError("bandwidth_hz must be positive");
    if (qos_rate_bps < 0) throw ConfigError("qos_rate_bps must be >= 0");
    if (k_cap < 0) throw ConfigError("k_cap must be >= 0 (0 = auto)");
    if (alpha_macro <= 0 || alpha_small <= 0) throw ConfigError("path-loss exponents must be positive");
}

ScenarioConfig ScenarioConfig::desk_scale() { return ScenarioConfig{}; }

ScenarioConfig ScenarioConfig::paper_scale() {
    ScenarioConfig c;
    c.n_users = 60;
    c.n_subchannels = 12;
    return c;
}

void ScenarioConfig::apply_line(const std::string& key, const std::string& value) {
    auto as_int = [&](const std::string& v) {
        size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw ConfigError("bad integer for " + key + ": " + v);
        return r;
    };
    auto as_f64 = [&](const std::string& v) {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw ConfigError("bad number for " + key + ": " + v);
        return r;
    };
    if (key == "n_small") n_small = as_int(value);
    else if (key == "n_users") n_users = as_int(value);
    else if (key == "n_subchannels") n_subchannels = as_int(value);
    else if (key == "macro_radius_m") macro_radius_m = as_f64(value);
    else if (key == "small_radius_m") small_radius_m = as_f64(value);
    else if (key == "macro_power_dbm") macro_power_dbm = as_f64(value);
    else if (key == "small_power_dbm") small_power_dbm = as_f64(value);
    else if (key == "macro_circuit_dbm") macro_circuit_dbm = as_f64(value);
    else if (key == "small_circuit_dbm") small_circuit_dbm = as_f64(value);
    else if (key == "noise_dbm") noise_dbm = as_f64(value);
    else if (key == "bandwidth_hz") bandwidth_hz = as_f64(value);
    else if (key == "qos_rate_bps") qos_rate_bps = as_f64(value);
    else if (key == "i_cap_dbm") i_cap_dbm = as_f64(value);
    else if (key == "k_cap") k_cap = as_int(value);
    else if (key == "alpha_macro") alpha_macro = as_f64(value);
    else if (key == "alpha_small") alpha_small = as_f64(value);
    else if (key == "edge_snr_db") edge_snr_db = as_f64(value);
    else if (key == "seed") seed = static_cast<uint64_t>(std::stoull(value));
    else throw ConfigError("unknown config key: " + key);
}

static std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

ScenarioConfig ScenarioConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    ScenarioConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        cfg.apply_line(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Scenario generation.
//
// Channel model: g = C_b * d^(-alpha_b) * F with F unit-mean exponential per
// (b, m, n). C_b is calibrated so that a full-power link at the cell-edge
// distance (macro_radius_m for the macro, small_radius_m for small cells)
// reaches edge_snr_db over the noise floor.
// ---------------------------------------------------------------------------

Scenario generate_scenario(const ScenarioConfig& config, uint64_t seed) {
    config.validate();

    Scenario sc;
    sc.seed = seed;
    sc.n_users = config.n_users;
    sc.n_subchannels = config.n_subchannels;
    sc.bandwidth_hz = config.bandwidth_hz;
    sc.noise_power = dbm_to_watts(config.noise_dbm);
    sc.qos_rate = config.qos_rate_bps;

    const int B = config.n_stations();
    const int M = config.n_users;
    const int N = config.n_subchannels;
    const int k_cap = config.k_cap > 0 ? config.k_cap : config.auto_k_cap();
    const double i_cap = dbm_to_watts(config.i_cap_dbm);
    const double edge_snr = std::pow(10.0, config.edge_snr_db / 10.0);

    Rng rng(seed);

    BaseStation macro;
    macro.id = 0;
    macro.kind = BsKind::macro;
    macro.x = macro.y = 0.0;
    macro.p_max = dbm_to_watts(config.macro_power_dbm);
    macro.p_circuit = dbm_to_watts(config.macro_circuit_dbm);
    macro.k_cap = k_cap;
    macro.i_cap = i_cap;
    sc.stations.push_back(macro);

    for (int i = 0; i < config.n_small; ++i) {
        double r = config.macro_radius_m * std::sqrt(rng.uniform());
        double theta = 2.0 * M_PI * rng.uniform();
        BaseStation small;
        small.id = 1 + i;
        small.kind = BsKind::small;
        small.x = r * std::cos(theta);
        small.y = r * std::sin(theta);
        small.p_max = dbm_to_watts(config.small_power_dbm);
        small.p_circuit = dbm_to_watts(config.small_circuit_dbm);
        small.k_cap = k_cap;
        small.i_cap = i_cap;
        sc.stations.push_back(small);
    }

    sc.user_x.resize(M);
    sc.user_y.resize(M);
    for (int m = 0; m < M; ++m) {
        double r = config.macro_radius_m * std::sqrt(rng.uniform());
        double theta = 2.0 * M_PI * rng.uniform();
        sc.user_x[m] = r * std::cos(theta);
        sc.user_y[m] = r * std::sin(theta);
    }

    sc.gains.resize(static_cast<size_t>(B) * M * N);
    for (int b = 0; b < B; ++b) {
        const BaseStation& bs = sc.stations[b];
        double alpha = bs.kind == BsKind::macro ? config.alpha_macro : config.alpha_small;
        double edge = bs.kind == BsKind::macro ? config.macro_radius_m : config.small_radius_m;
        double c_b = edge_snr * sc.noise_power * std::pow(edge, alpha) / bs.p_max;
        for (int m = 0; m < M; ++m) {
            double dx = sc.user_x[m] - bs.x;
            double dy = sc.user_y[m] - bs.y;
            double d = std::max(1.0, std::sqrt(dx * dx + dy * dy));
            double path = c_b * std::pow(d, -alpha);
            for (int n = 0; n < N; ++n)
                sc.gain_ref(b, m, n) = path * rng.exponential();
        }
    }
    return sc;
}

// ---------------------------------------------------------------------------
// Scenario serialization (versioned binary; gains flattened row-major b, m, n).
// ---------------------------------------------------------------------------

static constexpr uint32_t kScenarioVersion = 1;

void Scenario::save(const std::string& path) const {
    BinWriter w;
    w.u32(static_cast<uint32_t>(stations.size()));
    w.u32(static_cast<uint32_t>(n_users));
    w.u32(static_cast<uint32_t>(n_subchannels));
    w.f64(bandwidth_hz);
    w.f64(noise_power);
    w.f64(qos_rate);
    w.u64(seed);
    for (const auto& bs : stations) {
        w.i32(bs.id);
        w.u8(static_cast<uint8_t>(bs.kind));
        w.f64(bs.x);
        w.f64(bs.y);
        w.f64(bs.p_max);
        w.f64(bs.p_circuit);
        w.i32(bs.k_cap);
        w.f64(bs.i_cap);
    }
    w.f64_array(user_x.data(), user_x.size());
    w.f64_array(user_y.data(), user_y.size());
    w.f64_array(gains.data(), gains.size());
    w.write_file(path, BinKind::scenario, kScenarioVersion);
}

Scenario Scenario::load(const std::string& path) {
    BinReader r(path, BinKind::scenario, kScenarioVersion);
    Scenario sc;
    uint32_t b = r.u32();
    sc.n_users = static_cast<int>(r.u32());
    sc.n_subchannels = static_cast<int>(r.u32());
    sc.bandwidth_hz = r.f64();
    sc.noise_power = r.f64();
    sc.qos_rate = r.f64();
    sc.seed = r.u64();
    sc.stations.resize(b);
    for (auto& bs : sc.stations) {
        bs.id = r.i32();
        bs.kind = static_cast<BsKind>(r.u8());
        bs.x = r.f64();
        bs.y = r.f64();
        bs.p_max = r.f64();
        bs.p_circuit = r.f64();
        bs.k_cap = r.i32();
        bs.i_cap = r.f64();
    }
    sc.user_x.resize(sc.n_users);
    sc.user_y.resize(sc.n_users);
    r.f64_array(sc.user_x.data(), sc.user_x.size());
    r.f64_array(sc.user_y.data(), sc.user_y.size());
    sc.gains.resize(static_cast<size_t>(b) * sc.n_users * sc.n_subchannels);
    r.f64_array(sc.gains.data(), sc.gains.size());
    return sc;
}

bool Scenario::operator==(const Scenario& o) const {
    if (stations.size() != o.stations.size() || n_users != o.n_users ||
        n_subchannels != o.n_subchannels || bandwidth_hz != o.bandwidth_hz ||
        noise_power != o.noise_power || qos_rate != o.qos_rate || seed != o.seed ||
        user_x != o.user_x || user_y != o.user_y || gains != o.gains)
        return false;
    for (size_t i = 0; i < stations.size(); ++i) {
        const auto& a = stations[i];
        const auto& b = o.stations[i];
        if (a.id != b.id || a.kind != b.kind || a.x != b.x || a.y != b.y ||
            a.p_max != b.p_max || a.p_circuit != b.p_circuit || a.k_cap != b.k_cap ||
            a.i_cap != b.i_cap)
            return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Decision-variable helpers
// ---------------------------------------------------------------------------

int Association::station_of(int m) const {
    for (int b = 0; b < n_stations; ++b)
        if (get(b, m)) return b;
    return -1;
}

int Association::load(int b) const {
    int count = 0;
    for (int m = 0; m < n_users; ++m) count += get(b, m) ? 1 : 0;
    return count;
}

int SubchannelAlloc::channel_of(int b, int m) const {
    for (int n = 0; n < n_subchannels; ++n)
        if (get(b, m, n)) return n;
    return -1;
}

std::vector<int> SubchannelAlloc::occupants(int b, int n) const {
    std::vector<int> out;
    for (int m = 0; m < n_users; ++m)
        if (get(b, m, n)) out.push_back(m);
    return out;
}

double PowerAlloc::station_total(int b) const {
    double total = 0.0;
    const size_t base = static_cast<size_t>(b) * n_users * n_subchannels;
    for (size_t i = 0; i < static_cast<size_t>(n_users) * n_subchannels; ++i)
        total += p[base + i];
    return total;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

double cross_tier_interference(const Scenario& sc, const SubchannelAlloc& s,
                               const PowerAlloc& p, int b, int m, int n) {
    double acc = 0.0;
    for (int j = 0; j < sc.n_stations(); ++j) {
        if (j == b) continue;
        for (int r = 0; r < sc.n_users; ++r)
            if (s.get(j, r, n)) acc += p.get(j, r, n) * sc.gain(j, m, n);
    }
    return acc;
}

double sinr(const Scenario& sc, const Association& /*x*/, const SubchannelAlloc& s,
            const PowerAlloc& p, int b, int m, int n) {
    if (!s.get(b, m, n) || p.get(b, m, n) <= 0.0) return 0.0;

    double own_gain = sc.gain(b, m, n);
    // Intra-subchannel interference from co-occupants with a stronger channel
    // (ties broken toward the higher user index being the stronger rank).
    double intra = 0.0;
    for (int r = 0; r < sc.n_users; ++r) {
        if (r == m || !s.get(b, r, n)) continue;
        double gr = sc.gain(b, r, n);
        if (gr > own_gain || (gr == own_gain && r > m)) intra += p.get(b, r, n);
    }
    double denom = own_gain * intra + cross_tier_interference(sc, s, p, b, m, n) + sc.noise_power;
    return p.get(b, m, n) * own_gain / denom;
}

double capacity(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                const PowerAlloc& p, int b, int m, int n) {
    int load = x.load(b);
    if (load < 1)
        throw UndefinedLoadError("capacity queried at station " + std::to_string(b) +
                                 " with no associated user");
    return sc.bandwidth_hz / load * std::log2(1.0 + sinr(sc, x, s, p, b, m, n));
}

double sum_rate(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                const PowerAlloc& p) {
    double total = 0.0;
    for (int b = 0; b < sc.n_stations(); ++b) {
        int load = x.load(b);
        if (load < 1) continue;  // station carries no users, contributes no rate
        for (int m = 0; m < sc.n_users; ++m) {
            if (!x.get(b, m)) continue;
            for (int n = 0; n < sc.n_subchannels; ++n)
                total += capacity(sc, x, s, p, b, m, n);
        }
    }
    return total;
}

double total_power(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                   const PowerAlloc& p) {
    double total = 0.0;
    for (int b = 0; b < sc.n_stations(); ++b) {
        total += sc.stations[b].p_circuit;
        for (int m = 0; m < sc.n_users; ++m) {
            if (!x.get(b, m)) continue;
            for (int n = 0; n < sc.n_subchannels; ++n)
                if (s.get(b, m, n)) total += p.get(b, m, n);
        }
    }
    return total;
}

double energy_efficiency(const Scenario& sc, const Association& x,
                         const SubchannelAlloc& s, const PowerAlloc& p) {
    return sum_rate(sc, x, s, p) / total_power(sc, x, s, p);
}

// ---------------------------------------------------------------------------
// Constraint checker
// ---------------------------------------------------------------------------

static void fold_min(ConstraintCheck& c, double slack, double tol) {
    c.slack = std::min(c.slack, slack);
    if (slack < -tol) c.pass = false;
}

ConstraintReport check_constraints(const Scenario& sc, const Association& x,
                                   const SubchannelAlloc& s, const PowerAlloc& p) {
    const int B = sc.n_stations();
    const int M = sc.n_users;
    const int N = sc.n_subchannels;
    ConstraintReport rep;

    // Exactly one serving station per user; slack is -|deviation| so equality
    // keeps slack at 0.
    rep.single_association.slack = 0.0;
    for (int m = 0; m < M; ++m) {
        int count = 0;
        for (int b = 0; b < B; ++b) count += x.get(b, m) ? 1 : 0;
        fold_min(rep.single_association, -std::abs(count - 1), 0.0);
    }

    rep.subchannel_occupancy.slack = 2.0;
    for (int b = 0; b < B; ++b)
        for (int n = 0; n < N; ++n) {
            int occ = 0;
            for (int m = 0; m < M; ++m) occ += s.get(b, m, n) ? 1 : 0;
            fold_min(rep.subchannel_occupancy, 2.0 - occ, 0.0);
        }

    rep.station_load.slack = sc.stations.empty() ? 0.0 : static_cast<double>(sc.stations[0].k_cap);
    for (int b = 0; b < B; ++b)
        fold_min(rep.station_load, sc.stations[b].k_cap - x.load(b), 0.0);

    // Power sums get a relative tolerance so that an exactly saturated budget
    // reports as satisfied despite rounding.
    rep.station_power.slack = sc.stations.empty() ? 0.0 : sc.stations[0].p_max;
    for (int b = 0; b < B; ++b) {
        double used = 0.0;
        for (int m = 0; m < M; ++m) {
            if (!x.get(b, m)) continue;
            for (int n = 0; n < N; ++n)
                if (s.get(b, m, n)) used += p.get(b, m, n);
        }
        fold_min(rep.station_power, sc.stations[b].p_max - used, 1e-9 * sc.stations[b].p_max);
    }

    // Per-user rate across the serving station's subchannels.
    rep.user_qos.slack = sc.qos_rate > 0 ? sc.qos_rate : 1.0;
    int satisfied = 0;
    for (int m = 0; m < M; ++m) {
        int b = x.station_of(m);
        if (b < 0) { fold_min(rep.user_qos, -sc.qos_rate, 0.0); continue; }
        double rate = 0.0;
        for (int n = 0; n < N; ++n)
            if (s.get(b, m, n)) rate += capacity(sc, x, s, p, b, m, n);
        double slack = rate - sc.qos_rate;
        if (slack >= 0) ++satisfied;
        fold_min(rep.user_qos, slack, 1e-9 * std::max(sc.qos_rate, 1.0));
    }
    rep.qos_satisfied_fraction = M > 0 ? static_cast<double>(satisfied) / M : 1.0;

    // Worst received cross-tier power over each station's users on their
    // occupied subchannels.
    rep.interference_cap.slack = sc.stations.empty() ? 0.0 : sc.stations[0].i_cap;
    for (int b = 0; b < B; ++b) {
        double cap = sc.stations[b].i_cap;
        for (int m = 0; m < M; ++m) {
            if (!x.get(b, m)) continue;
            for (int n = 0; n < N; ++n)
                if (s.get(b, m, n))
                    fold_min(rep.interference_cap,
                             cap - cross_tier_interference(sc, s, p, b, m, n),
                             1e-9 * cap);
        }
    }
    return rep;
}

}  // namespace noma
