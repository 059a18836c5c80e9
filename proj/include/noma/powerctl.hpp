#pragma once

#include <vector>

#include "noma/netmodel.hpp"

namespace noma {

// ---------------------------------------------------------------------------
// Gradient-iteration power oracle plus the equal / random baselines.
//
// The objective being climbed is
//   f(P) = sum over active links of (ln(log2(1 + sinr)) - ln(load_b)) / U(P)
//          + sum_b penalty_b * (p_max_b - used_b)
// where U is circuit plus transmit power and an active link is the (user,
// subchannel) pair the user occupies at its serving station. Each iteration
// sweeps the active links in (station, user) order with a damped Newton step
// |df/dp| / |d2f/dp2| taken in the ascent direction of df/dp, clamps to
// [p_floor, p_max], then rescales any station exceeding its budget.
// ---------------------------------------------------------------------------

struct GradientConfig {
    int t_max = 300;           // max sweeps
    double step0 = 0.5;        // initial damping of the Newton step
    double step_decay = 0.5;   // delta(t) = step0 / t^step_decay
    double eps = 1e-9;         // stop when the objective gain drops below this
    double p_floor = 0.0;      // min power on active links, watts; 0 = 1e-6 * p_max
    Vec penalty;               // per-station budget penalty weight; empty = zeros

    void validate() const {
        if (t_max < 1) throw ConfigError("t_max must be >= 1");
        if (step0 <= 0) throw ConfigError("step0 must be positive");
        if (eps <= 0) throw ConfigError("eps must be positive");
        if (p_floor < 0) throw ConfigError("p_floor must be >= 0");
    }
};

// Active links, (station, user) lexicographic. Each user occupies exactly one
// subchannel of its serving station.
struct ActiveLink {
    int b, m, n;
};
std::vector<ActiveLink> active_links(const Scenario& sc, const Association& x,
                                     const SubchannelAlloc& s);

// The objective above. Returns -infinity when an active link has zero SINR.
double power_objective(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                       const PowerAlloc& p, const Vec& penalty);

// Analytic d f / d p for the active link of user m at station b, including
// the coupling through every SINR this power appears in.
double power_derivative(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                        const PowerAlloc& p, const Vec& penalty, int b, int m);

// One sweep with step delta(t); see solve_power for the enclosing loop.
PowerAlloc power_step(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                      const PowerAlloc& p, const GradientConfig& cfg, int t);

struct PowerResult {
    PowerAlloc p;
    Vec trace;  // objective after each accepted sweep, starting value first
};

// Iterates from the equal-power start until the objective gain falls below
// eps or t_max sweeps. A sweep that fails to improve the objective is retried
// with a halved step and ultimately rejected, so the recorded trace is
// non-decreasing.
PowerResult solve_power(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                        const GradientConfig& cfg);

// p_max split evenly over the station's active links.
PowerAlloc equal_power(const Scenario& sc, const Association& x, const SubchannelAlloc& s);

// i.i.d. uniform weights per active link, normalized to p_max per station.
PowerAlloc random_power(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                        uint64_t seed);

// Scales down co-channel transmitters until every station's users receive no
// more cross-tier power than the station's cap. No-op when already feasible.
PowerAlloc cap_cross_interference(const Scenario& sc, const Association& x,
                                  const SubchannelAlloc& s, const PowerAlloc& p);

}  // namespace noma
