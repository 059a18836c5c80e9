#pragma once

#include <vector>

#include "noma/netmodel.hpp"

namespace noma {

// ---------------------------------------------------------------------------
// Two-sided matching between users and subchannels, capacity two per
// subchannel. Produces the subchannel allocations used as training labels.
// ---------------------------------------------------------------------------

// Working state of one matching run: occupant lists per (station, subchannel)
// plus the per-station set of users still waiting for a subchannel.
struct MatchState {
    int n_stations = 0, n_subchannels = 0;
    std::vector<std::vector<int>> v;          // [B*N] occupant lists, size <= 2
    std::vector<std::vector<int>> unassigned; // per station, ascending user index

    std::vector<int>& occupants(int b, int n) {
        return v[static_cast<size_t>(b) * n_subchannels + n];
    }
};

// Interim power rule used when evaluating utilities before any power
// optimization has run: each station splits p_max evenly over its
// subchannels; a pair splits its channel budget 2:1 in favor of the
// weaker-gain user; a lone occupant takes the whole channel budget.
PowerAlloc matching_rule_power(const Scenario& sc, const Association& x,
                               const SubchannelAlloc& s);

// Synthetic full-load "everyone transmits p_max/N on every subchannel"
// power tensor, used as the cross-station interference background when no
// real allocation exists yet.
PowerAlloc uniform_background_power(const Scenario& sc);

// Energy-efficiency contribution of subchannel n at station b if `occupants`
// were placed on it: their summed capacity over their summed transmit power
// (no circuit share). Occupant powers follow the interim rule above;
// `p` supplies only the co-channel interference from other stations.
double subchannel_utility(const Scenario& sc, const Association& x, const PowerAlloc& p,
                          int b, int n, const std::vector<int>& occupants);

// Deferred-acceptance matching with eviction: every associated user proposes
// to its best-gain subchannel not yet rejected; a full subchannel keeps the
// occupant pair with the highest utility. A final local-improvement sweep
// moves single users between subchannels while that raises the station's
// rate-per-watt, so the result is one-swap stable.
// Throws InfeasibleError when a station has more users than 2 * N.
SubchannelAlloc two_side_matching(const Scenario& sc, const Association& x,
                                  const PowerAlloc& p_init);

// Greedy projection of a continuous score tensor [B][M][N] onto a feasible
// binary allocation: repeatedly take the globally largest remaining score
// whose user is unassigned and whose subchannel has space (ties by ascending
// b, m, n); any user left over lands on its station's least-loaded
// subchannel. Idempotent on feasible binary inputs.
SubchannelAlloc project_to_feasible(const Scenario& sc, const Association& x,
                                    const Vec& s_hat);

// Objective of the local-improvement sweep: station b's summed subchannel
// rate divided by (circuit power + summed transmit power) under the interim
// power rule, with `p_bg` as the other stations' interference background.
double station_rate_per_watt(const Scenario& sc, const Association& x,
                             const SubchannelAlloc& s, const PowerAlloc& p_bg, int b);

}  // namespace noma
