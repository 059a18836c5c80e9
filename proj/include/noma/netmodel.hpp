#pragma once

#include <string>
#include <vector>

#include "noma/common.hpp"

namespace noma {

// ---------------------------------------------------------------------------
// Network scenario: one macro cell overlaid with small cells, downlink NOMA
// with up to two users per subchannel, SIC decoding ordered by channel gain.
// ---------------------------------------------------------------------------

enum class BsKind : uint8_t { macro = 0, small = 1 };

struct BaseStation {
    int id = 0;
    BsKind kind = BsKind::macro;
    double x = 0.0, y = 0.0;   // meters
    double p_max = 0.0;        // max transmit power, watts
    double p_circuit = 0.0;    // circuit power, watts
    int k_cap = 1;             // max associated users
    double i_cap = 0.0;        // cap on cross-tier power received by its users, watts
};

struct ScenarioConfig {
    int n_small = 3;
    int n_users = 24;
    int n_subchannels = 6;
    double macro_radius_m = 100.0;
    double small_radius_m = 30.0;
    double macro_power_dbm = 9.5;
    double small_power_dbm = 4.7;
    double macro_circuit_dbm = 10.0;
    double small_circuit_dbm = 5.0;
    double noise_dbm = -134.0;
    double bandwidth_hz = 1.2e9;
    double qos_rate_bps = 1e7;
    double i_cap_dbm = -124.0;       // default: 10 dB above the noise floor
    int k_cap = 0;                   // 0 = auto: ceil(ceil(M/B) * 1.5)
    double alpha_macro = 3.5;
    double alpha_small = 3.0;
    double edge_snr_db = 10.0;       // full-power SNR at the cell edge used to calibrate path loss
    uint64_t seed = 1;

    int n_stations() const { return 1 + n_small; }
    int auto_k_cap() const;
    void validate() const;  // throws ConfigError

    static ScenarioConfig desk_scale();   // B=4, M=24, N=6
    static ScenarioConfig paper_scale();  // B=4, M=60, N=12

    // Plain-text "key = value" file; '#' starts a comment. Unknown keys are errors.
    static ScenarioConfig from_file(const std::string& path);
    void apply_line(const std::string& key, const std::string& value);
};

inline double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }
inline double watts_to_dbm(double w) { return 10.0 * std::log10(w * 1e3); }

struct Scenario {
    std::vector<BaseStation> stations;
    int n_users = 0;
    int n_subchannels = 0;
    double bandwidth_hz = 0.0;
    double noise_power = 0.0;   // watts
    double qos_rate = 0.0;      // bits/s
    std::vector<double> user_x, user_y;
    Vec gains;                  // [B][M][N] row-major, linear power gains
    uint64_t seed = 0;

    int n_stations() const { return static_cast<int>(stations.size()); }
    double gain(int b, int m, int n) const {
        return gains[(static_cast<size_t>(b) * n_users + m) * n_subchannels + n];
    }
    double& gain_ref(int b, int m, int n) {
        return gains[(static_cast<size_t>(b) * n_users + m) * n_subchannels + n];
    }

    void save(const std::string& path) const;
    static Scenario load(const std::string& path);
    bool operator==(const Scenario& o) const;
};

Scenario generate_scenario(const ScenarioConfig& config, uint64_t seed);

// ---------------------------------------------------------------------------
// Decision variables.
// ---------------------------------------------------------------------------

struct Association {
    int n_stations = 0, n_users = 0;
    std::vector<uint8_t> x;  // [B][M]

    Association() = default;
    Association(int b, int m) : n_stations(b), n_users(m), x(static_cast<size_t>(b) * m, 0) {}

    bool get(int b, int m) const { return x[static_cast<size_t>(b) * n_users + m] != 0; }
    void set(int b, int m, bool v) { x[static_cast<size_t>(b) * n_users + m] = v ? 1 : 0; }
    // Serving station of user m, -1 if none.
    int station_of(int m) const;
    // Number of users associated with station b.
    int load(int b) const;
};

struct SubchannelAlloc {
    int n_stations = 0, n_users = 0, n_subchannels = 0;
    std::vector<uint8_t> s;  // [B][M][N]

    SubchannelAlloc() = default;
    SubchannelAlloc(int b, int m, int n)
        : n_stations(b), n_users(m), n_subchannels(n),
          s(static_cast<size_t>(b) * m * n, 0) {}

    bool get(int b, int m, int n) const {
        return s[(static_cast<size_t>(b) * n_users + m) * n_subchannels + n] != 0;
    }
    void set(int b, int m, int n, bool v) {
        s[(static_cast<size_t>(b) * n_users + m) * n_subchannels + n] = v ? 1 : 0;
    }
    // Subchannel occupied by user m at station b, -1 if none.
    int channel_of(int b, int m) const;
    // Users occupying (b, n), ascending user index.
    std::vector<int> occupants(int b, int n) const;
};

struct PowerAlloc {
    int n_stations = 0, n_users = 0, n_subchannels = 0;
    Vec p;  // [B][M][N], watts

    PowerAlloc() = default;
    PowerAlloc(int b, int m, int n)
        : n_stations(b), n_users(m), n_subchannels(n),
          p(static_cast<size_t>(b) * m * n, 0.0) {}

    double get(int b, int m, int n) const {
        return p[(static_cast<size_t>(b) * n_users + m) * n_subchannels + n];
    }
    void set(int b, int m, int n, double v) {
        p[(static_cast<size_t>(b) * n_users + m) * n_subchannels + n] = v;
    }
    // Total transmit power of station b.
    double station_total(int b) const;
};

// ---------------------------------------------------------------------------
// Metrics.
// ---------------------------------------------------------------------------

// SIC decoding order on one subchannel: occupants sorted by ascending gain
// (ties by user index). A user is interfered by every co-occupant ranked
// above it, i.e. with the stronger channel; the strongest sees no
// intra-subchannel interference.
double sinr(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
            const PowerAlloc& p, int b, int m, int n);

// (W / load_b) * log2(1 + sinr). Throws UndefinedLoadError when station b has
// no associated user.
double capacity(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                const PowerAlloc& p, int b, int m, int n);

double sum_rate(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                const PowerAlloc& p);

double total_power(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                   const PowerAlloc& p);

double energy_efficiency(const Scenario& sc, const Association& x,
                         const SubchannelAlloc& s, const PowerAlloc& p);

// Cross-tier power received by user m on subchannel n from every station
// other than its serving station b.
double cross_tier_interference(const Scenario& sc, const SubchannelAlloc& s,
                               const PowerAlloc& p, int b, int m, int n);

// ---------------------------------------------------------------------------
// Feasibility. Slack >= 0 means satisfied; for the aggregate constraints the
// slack is the worst case over the indexed entities.
// ---------------------------------------------------------------------------

struct ConstraintCheck {
    bool pass = true;
    double slack = 0.0;
};

struct ConstraintReport {
    ConstraintCheck single_association;       // every user served by exactly one station
    ConstraintCheck subchannel_occupancy;     // at most two users per (b, n)
    ConstraintCheck station_load;             // load_b <= k_cap
    ConstraintCheck station_power;            // transmit power <= p_max
    ConstraintCheck user_qos;                 // per-user rate >= qos_rate
    ConstraintCheck interference_cap;         // received cross-tier power <= i_cap
    double qos_satisfied_fraction = 1.0;

    bool core_pass() const {
        return single_association.pass && subchannel_occupancy.pass &&
               station_power.pass && interference_cap.pass;
    }
    bool all_pass() const {
        return core_pass() && station_load.pass && user_qos.pass;
    }
};

ConstraintReport check_constraints(const Scenario& sc, const Association& x,
                                   const SubchannelAlloc& s, const PowerAlloc& p);

}  // namespace noma
