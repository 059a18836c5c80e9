#pragma once

#include <string>
#include <vector>

#include "noma/netmodel.hpp"

namespace noma {

// ---------------------------------------------------------------------------
// User association by dual decomposition. The subchannel and power decisions
// stay fixed while the association and the multipliers iterate; matching and
// power optimization re-run afterwards (single outer pass).
//
// Candidate scoring: for a (station, user) pair the score is evaluated on the
// user's occupied subchannel with its actual power when the pair is active in
// `s`; otherwise on the user's best-gain subchannel with the reference power
// p_max / (2 N), holding everyone else's allocation fixed. The score is
//     ln(W log2(1+sinr)) / U  -  power_price_b * p_cand  -  load_price_b
//     + qos_price_m * capacity_cand  -  interference_price_b * (B-1) * g * p_cand
// with U the current total consumed power. A zero-rate candidate scores
// -infinity and is never picked.
// ---------------------------------------------------------------------------

struct DualMultipliers {
    Vec load_price;          // per station, prices the association cap
    Vec power_price;         // per station, prices the transmit budget
    Vec qos_price;           // per user, prices the minimum-rate requirement
    Vec interference_price;  // per station, prices the received cross-tier cap

    static DualMultipliers zeros(int n_stations, int n_users) {
        return {Vec(n_stations, 0.0), Vec(n_stations, 0.0), Vec(n_users, 0.0),
                Vec(n_stations, 0.0)};
    }
    bool all_nonnegative() const;
    double l2_norm() const;
};

// Per-family step sizes for one projected-subgradient update. The raw
// constraint slacks span many orders of magnitude (users, watts, bits/s), so
// the solver feeds scaled steps; a uniform scalar works for hand-sized tests.
struct DualStep {
    double load = 0.0, power = 0.0, qos = 0.0, interference = 0.0;
    DualStep() = default;
    DualStep(double uniform)  // NOLINT: implicit by design
        : load(uniform), power(uniform), qos(uniform), interference(uniform) {}
};

struct AssocSolverConfig {
    int max_iters = 150;
    double step0 = 0.1;
    double step_decay = 0.5;    // step_t = step0 / t^step_decay
    double tolerance = 1e-6;    // on the score shift induced by a multiplier update

    void validate() const {
        if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
        if (step0 < 0) throw ConfigError("step0 must be >= 0");
        if (tolerance <= 0) throw ConfigError("tolerance must be positive");
    }
};

struct ScoreMatrix {
    int n_stations = 0, n_users = 0;
    Vec v;  // [B][M]

    ScoreMatrix() = default;
    ScoreMatrix(int b, int m) : n_stations(b), n_users(m), v(static_cast<size_t>(b) * m, 0.0) {}
    double at(int b, int m) const { return v[static_cast<size_t>(b) * n_users + m]; }
    double& at(int b, int m) { return v[static_cast<size_t>(b) * n_users + m]; }
};

double association_score(const Scenario& sc, const SubchannelAlloc& s, const PowerAlloc& p,
                         const DualMultipliers& duals, int b, int m);

ScoreMatrix association_scores(const Scenario& sc, const SubchannelAlloc& s,
                               const PowerAlloc& p, const DualMultipliers& duals);

// Per user: the best-scoring station, ties toward the lowest index. A user
// whose entire column is -infinity has nowhere to go.
Association associate(const ScoreMatrix& scores);

// Projected subgradient: each multiplier moves opposite its raw constraint
// slack and is clipped at zero.
DualMultipliers update_multipliers(const DualMultipliers& duals, const Scenario& sc,
                                   const Association& x, const SubchannelAlloc& s,
                                   const PowerAlloc& p, const DualStep& step);

struct AssocTraceRow {
    int iter;
    double dual_norm;
    int macro_load;
    double ee;
};

struct AssocResult {
    Association x;
    DualMultipliers duals;
    std::vector<AssocTraceRow> trace;
};

AssocResult solve_user_association(const Scenario& sc, const SubchannelAlloc& s,
                                   const PowerAlloc& p, const AssocSolverConfig& cfg);

// Baseline: every user joins the station with the best clean-channel SINR at
// reference power (per-station; empty means p_max), ties toward the lowest
// station index.
Association max_sinr_association(const Scenario& sc, const Vec& p_ref = {});

void write_assoc_trace_csv(const std::string& path, const std::vector<AssocTraceRow>& trace);

}  // namespace noma
