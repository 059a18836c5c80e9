#include "noma/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace noma {

PowerAlloc uniform_background_power(const Scenario& sc) {
    PowerAlloc p(sc.n_stations(), sc.n_users, sc.n_subchannels);
    for (int b = 0; b < sc.n_stations(); ++b) {
        double per_channel = sc.stations[b].p_max / sc.n_subchannels;
        for (int n = 0; n < sc.n_subchannels; ++n)
            p.set(b, 0, n, per_channel);
    }
    return p;
}

// Interim powers for `occupants` of (b, n): whole channel budget if alone,
// 2:1 toward the weaker gain if paired.
static void rule_powers(const Scenario& sc, int b, int n, const std::vector<int>& occupants,
                        std::vector<double>& out) {
    double budget = sc.stations[b].p_max / sc.n_subchannels;
    out.assign(occupants.size(), 0.0);
    if (occupants.size() == 1) {
        out[0] = budget;
    } else if (occupants.size() == 2) {
        double g0 = sc.gain(b, occupants[0], n);
        double g1 = sc.gain(b, occupants[1], n);
        bool first_weaker = g0 < g1 || (g0 == g1 && occupants[0] < occupants[1]);
        out[first_weaker ? 0 : 1] = budget * 2.0 / 3.0;
        out[first_weaker ? 1 : 0] = budget / 3.0;
    }
}

PowerAlloc matching_rule_power(const Scenario& sc, const Association& x,
                               const SubchannelAlloc& s) {
    PowerAlloc p(sc.n_stations(), sc.n_users, sc.n_subchannels);
    std::vector<double> pw;
    for (int b = 0; b < sc.n_stations(); ++b)
        for (int n = 0; n < sc.n_subchannels; ++n) {
            auto occ = s.occupants(b, n);
            if (occ.empty()) continue;
            rule_powers(sc, b, n, occ, pw);
            for (size_t i = 0; i < occ.size(); ++i) p.set(b, occ[i], n, pw[i]);
        }
    (void)x;
    return p;
}

// Co-channel interference arriving at user m on (.., n) from stations != b,
// reading total per-channel power out of the background tensor.
static double background_interference(const Scenario& sc, const PowerAlloc& bg,
                                      int b, int m, int n) {
    double acc = 0.0;
    for (int j = 0; j < sc.n_stations(); ++j) {
        if (j == b) continue;
        double total = 0.0;
        for (int r = 0; r < sc.n_users; ++r) total += bg.get(j, r, n);
        acc += total * sc.gain(j, m, n);
    }
    return acc;
}

static double channel_rate(const Scenario& sc, const Association& x, const PowerAlloc& bg,
                           int b, int n, const std::vector<int>& occupants,
                           const std::vector<double>& powers) {
    int load = x.load(b);
    if (load < 1)
        throw UndefinedLoadError("subchannel utility at a station with no associated user");
    double rate = 0.0;
    for (size_t i = 0; i < occupants.size(); ++i) {
        int m = occupants[i];
        double g = sc.gain(b, m, n);
        double intra = 0.0;
        for (size_t j = 0; j < occupants.size(); ++j) {
            if (j == i) continue;
            double gj = sc.gain(b, occupants[j], n);
            if (gj > g || (gj == g && occupants[j] > m)) intra += powers[j];
        }
        double gamma = powers[i] * g / (g * intra + background_interference(sc, bg, b, m, n) +
                                        sc.noise_power);
        rate += sc.bandwidth_hz / load * std::log2(1.0 + gamma);
    }
    return rate;
}

double subchannel_utility(const Scenario& sc, const Association& x, const PowerAlloc& p,
                          int b, int n, const std::vector<int>& occupants) {
    if (occupants.empty()) return 0.0;
    std::vector<double> pw;
    rule_powers(sc, b, n, occupants, pw);
    double used = std::accumulate(pw.begin(), pw.end(), 0.0);
    if (used <= 0.0) return 0.0;
    return channel_rate(sc, x, p, b, n, occupants, pw) / used;
}

double station_rate_per_watt(const Scenario& sc, const Association& x,
                             const SubchannelAlloc& s, const PowerAlloc& p_bg, int b) {
    std::vector<double> pw;
    double rate = 0.0, used = 0.0;
    for (int n = 0; n < sc.n_subchannels; ++n) {
        auto occ = s.occupants(b, n);
        if (occ.empty()) continue;
        rule_powers(sc, b, n, occ, pw);
        rate += channel_rate(sc, x, p_bg, b, n, occ, pw);
        used += std::accumulate(pw.begin(), pw.end(), 0.0);
    }
    return rate / (sc.stations[b].p_circuit + used);
}

// One-swap local improvement: keep moving single users between subchannels
// while the station's rate-per-watt strictly improves.
static void stabilize_station(const Scenario& sc, const Association& x, const PowerAlloc& bg,
                              int b, SubchannelAlloc& s) {
    const int N = sc.n_subchannels;
    int guard = 200 * sc.n_users * N + 64;
    bool improved = true;
    while (improved && guard-- > 0) {
        improved = false;
        double base = station_rate_per_watt(sc, x, s, bg, b);
        double best = base;
        int best_m = -1, best_from = -1, best_to = -1;
        for (int m = 0; m < sc.n_users; ++m) {
            if (!x.get(b, m)) continue;
            int from = s.channel_of(b, m);
            if (from < 0) continue;
            for (int to = 0; to < N; ++to) {
                if (to == from) continue;
                if (static_cast<int>(s.occupants(b, to).size()) >= 2) continue;
                s.set(b, m, from, false);
                s.set(b, m, to, true);
                double cand = station_rate_per_watt(sc, x, s, bg, b);
                s.set(b, m, to, false);
                s.set(b, m, from, true);
                if (cand > best) {
                    best = cand;
                    best_m = m;
                    best_from = from;
                    best_to = to;
                }
            }
        }
        if (best_m >= 0) {
            s.set(b, best_m, best_from, false);
            s.set(b, best_m, best_to, true);
            improved = true;
        }
    }
}

SubchannelAlloc two_side_matching(const Scenario& sc, const Association& x,
                                  const PowerAlloc& p_init) {
    const int B = sc.n_stations();
    const int M = sc.n_users;
    const int N = sc.n_subchannels;

    if (N > 64) throw ConfigError("matching supports at most 64 subchannels");
    for (int b = 0; b < B; ++b) {
        int users = x.load(b);
        if (users > 2 * N)
            throw InfeasibleError("station " + std::to_string(b) + " has " +
                                  std::to_string(users) + " users but only " +
                                  std::to_string(2 * N) + " subchannel slots");
    }

    SubchannelAlloc s(B, M, N);
    MatchState state;
    state.n_stations = B;
    state.n_subchannels = N;
    state.v.assign(static_cast<size_t>(B) * N, {});
    state.unassigned.assign(B, {});

    for (int b = 0; b < B; ++b) {
        std::vector<uint8_t> waiting(M, 0);
        int n_waiting = 0;
        for (int m = 0; m < M; ++m)
            if (x.get(b, m)) { waiting[m] = 1; ++n_waiting; }

        std::vector<uint64_t> rejected(M, 0);  // bitmask over subchannels
        int guard = M * N * M + 64;

        while (n_waiting > 0) {
            for (int m = 0; m < M; ++m) {
                if (!waiting[m]) continue;
                if (guard-- <= 0)
                    throw InfeasibleError("matching failed to settle at station " +
                                          std::to_string(b));

                // Best-gain subchannel among those this user has not been
                // rejected from; once everything is rejected, the memory is
                // cleared and the user may only target subchannels with space.
                bool exhausted = true;
                for (int n = 0; n < N; ++n)
                    if (!(rejected[m] >> n & 1)) { exhausted = false; break; }
                if (exhausted) rejected[m] = 0;

                int pick = -1;
                double pick_gain = -1.0;
                for (int n = 0; n < N; ++n) {
                    if (rejected[m] >> n & 1) continue;
                    if (exhausted && static_cast<int>(state.occupants(b, n).size()) >= 2) continue;
                    double g = sc.gain(b, m, n);
                    if (g > pick_gain) { pick_gain = g; pick = n; }
                }
                if (pick < 0) continue;  // everything full this pass; memory now clear

                auto& occ = state.occupants(b, pick);
                if (static_cast<int>(occ.size()) < 2) {
                    occ.push_back(m);
                    waiting[m] = 0;
                    --n_waiting;
                    continue;
                }

                int m1 = occ[0], m2 = occ[1];
                double keep = subchannel_utility(sc, x, p_init, b, pick, {m1, m2});
                double with_m1 = subchannel_utility(sc, x, p_init, b, pick, {m, m1});
                double with_m2 = subchannel_utility(sc, x, p_init, b, pick, {m, m2});
                double challenger = std::max(with_m1, with_m2);
                if (challenger > keep) {
                    int evicted = with_m1 >= with_m2 ? m2 : m1;
                    int kept = evicted == m2 ? m1 : m2;
                    occ = {kept, m};
                    waiting[m] = 0;
                    waiting[evicted] = 1;
                    rejected[evicted] |= 1ull << pick;
                } else {
                    rejected[m] |= 1ull << pick;
                }
            }
        }
        state.unassigned[b].clear();
    }

    for (int b = 0; b < B; ++b)
        for (int n = 0; n < N; ++n)
            for (int m : state.occupants(b, n)) s.set(b, m, n, true);

    for (int b = 0; b < B; ++b)
        if (x.load(b) > 0) stabilize_station(sc, x, p_init, b, s);

    return s;
}

SubchannelAlloc project_to_feasible(const Scenario& sc, const Association& x,
                                    const Vec& s_hat) {
    const int B = sc.n_stations();
    const int M = sc.n_users;
    const int N = sc.n_subchannels;
    if (s_hat.size() != static_cast<size_t>(B) * M * N)
        throw ConfigError("score tensor has wrong size");

    for (int b = 0; b < B; ++b)
        if (x.load(b) > 2 * N)
            throw InfeasibleError("station " + std::to_string(b) + " exceeds subchannel capacity");

    struct Entry { double score; int b, m, n; };
    std::vector<Entry> entries;
    entries.reserve(s_hat.size());
    for (int b = 0; b < B; ++b)
        for (int m = 0; m < M; ++m) {
            if (!x.get(b, m)) continue;
            for (int n = 0; n < N; ++n) {
                double v = s_hat[(static_cast<size_t>(b) * M + m) * N + n];
                if (!std::isfinite(v)) throw ConfigError("score tensor has non-finite entries");
                entries.push_back({v, b, m, n});
            }
        }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.b != b.b) return a.b < b.b;
        if (a.m != b.m) return a.m < b.m;
        return a.n < b.n;
    });

    SubchannelAlloc s(B, M, N);
    std::vector<uint8_t> assigned(M, 0);
    std::vector<int> occupancy(static_cast<size_t>(B) * N, 0);
    for (const auto& e : entries) {
        if (assigned[e.m]) continue;
        int& occ = occupancy[static_cast<size_t>(e.b) * N + e.n];
        if (occ >= 2) continue;
        s.set(e.b, e.m, e.n, true);
        assigned[e.m] = 1;
        ++occ;
    }

    // Anyone still unplaced goes to the emptiest subchannel of its station.
    for (int m = 0; m < M; ++m) {
        if (assigned[m]) continue;
        int b = x.station_of(m);
        if (b < 0) continue;
        int best_n = -1, best_occ = 3;
        for (int n = 0; n < N; ++n) {
            int occ = occupancy[static_cast<size_t>(b) * N + n];
            if (occ < best_occ) { best_occ = occ; best_n = n; }
        }
        if (best_n < 0 || best_occ >= 2)
            throw InfeasibleError("no subchannel slot left for user " + std::to_string(m));
        s.set(b, m, best_n, true);
        ++occupancy[static_cast<size_t>(b) * N + best_n];
        assigned[m] = 1;
    }
    return s;
}

}  // namespace noma
