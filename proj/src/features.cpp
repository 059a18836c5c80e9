#include "noma/features.hpp"

#include <algorithm>
#include <cmath>

namespace noma {

SlotLayout slot_layout(const Scenario& sc) {
    int cap = 1;
    for (const auto& bs : sc.stations) cap = std::max(cap, bs.k_cap);
    return {cap, sc.n_subchannels};
}

std::vector<int> station_slot_users(const Association& x, int b) {
    std::vector<int> users;
    for (int m = 0; m < x.n_users; ++m)
        if (x.get(b, m)) users.push_back(m);
    return users;
}

Vec station_features(const Scenario& sc, const Association& x, int b) {
    SlotLayout layout = slot_layout(sc);
    auto users = station_slot_users(x, b);
    if (static_cast<int>(users.size()) > layout.slots)
        throw InfeasibleError("station " + std::to_string(b) + " serves " +
                              std::to_string(users.size()) + " users but the learner has " +
                              std::to_string(layout.slots) + " slots");
    const int N = layout.n_subchannels;
    Vec out(layout.feature_dim(), 0.0);
    for (int u = 0; u < layout.slots; ++u) {
        double* slot = out.data() + static_cast<size_t>(u) * (N + 1);
        if (u < static_cast<int>(users.size())) {
            for (int n = 0; n < N; ++n)
                slot[n] = 10.0 * std::log10(sc.gain(b, users[u], n));
            slot[N] = 1.0;
        } else {
            for (int n = 0; n < N; ++n) slot[n] = kPadGainDb;
            slot[N] = 0.0;
        }
    }
    return out;
}

Vec station_subchannel_labels(const Scenario& sc, const Association& x,
                              const SubchannelAlloc& s, int b) {
    SlotLayout layout = slot_layout(sc);
    auto users = station_slot_users(x, b);
    if (static_cast<int>(users.size()) > layout.slots)
        throw InfeasibleError("station load exceeds learner slots");
    Vec out(layout.subchannel_label_dim(), 0.0);
    for (size_t u = 0; u < users.size(); ++u)
        for (int n = 0; n < layout.n_subchannels; ++n)
            out[u * layout.n_subchannels + n] = s.get(b, users[u], n) ? 1.0 : 0.0;
    return out;
}

Vec station_power_labels(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                         const PowerAlloc& p, int b) {
    SlotLayout layout = slot_layout(sc);
    auto users = station_slot_users(x, b);
    if (static_cast<int>(users.size()) > layout.slots)
        throw InfeasibleError("station load exceeds learner slots");
    Vec out(layout.power_label_dim(), 0.0);
    for (size_t u = 0; u < users.size(); ++u) {
        int n = s.channel_of(b, users[u]);
        if (n >= 0) out[u] = p.get(b, users[u], n) / sc.stations[b].p_max;
    }
    return out;
}

Vec assemble_subchannel_scores(const Scenario& sc, const Association& x,
                               const std::vector<Vec>& per_station_scores) {
    const int B = sc.n_stations();
    const int M = sc.n_users;
    const int N = sc.n_subchannels;
    if (static_cast<int>(per_station_scores.size()) != B)
        throw ConfigError("one score block per station expected");
    Vec tensor(static_cast<size_t>(B) * M * N, 0.0);
    for (int b = 0; b < B; ++b) {
        auto users = station_slot_users(x, b);
        const Vec& block = per_station_scores[b];
        for (size_t u = 0; u < users.size(); ++u)
            for (int n = 0; n < N; ++n)
                tensor[(static_cast<size_t>(b) * M + users[u]) * N + n] =
                    block[u * N + n];
    }
    return tensor;
}

PowerAlloc assemble_power(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                          const std::vector<Vec>& per_station_fractions) {
    const int B = sc.n_stations();
    if (static_cast<int>(per_station_fractions.size()) != B)
        throw ConfigError("one power block per station expected");
    PowerAlloc p(B, sc.n_users, sc.n_subchannels);
    for (int b = 0; b < B; ++b) {
        auto users = station_slot_users(x, b);
        const Vec& block = per_station_fractions[b];
        double used = 0.0;
        for (size_t u = 0; u < users.size(); ++u) {
            int n = s.channel_of(b, users[u]);
            if (n < 0) continue;
            double frac = std::clamp(block[u], 0.0, 1.0);
            double watts = frac * sc.stations[b].p_max;
            p.set(b, users[u], n, watts);
            used += watts;
        }
        if (used > sc.stations[b].p_max) {
            double scale = sc.stations[b].p_max / used;
            for (size_t u = 0; u < users.size(); ++u) {
                int n = s.channel_of(b, users[u]);
                if (n >= 0) p.set(b, users[u], n, p.get(b, users[u], n) * scale);
            }
        }
    }
    return p;
}

}  // namespace noma
