#include "noma/powerctl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace noma {

std::vector<ActiveLink> active_links(const Scenario& sc, const Association& x,
                                     const SubchannelAlloc& s) {
    std::vector<ActiveLink> links;
    for (int b = 0; b < sc.n_stations(); ++b)
        for (int m = 0; m < sc.n_users; ++m) {
            if (!x.get(b, m)) continue;
            for (int n = 0; n < sc.n_subchannels; ++n)
                if (s.get(b, m, n)) links.push_back({b, m, n});
        }
    return links;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-link SINR state shared by the objective and its derivative.
struct LinkCtx {
    std::vector<ActiveLink> links;
    std::vector<double> q;      // link powers
    std::vector<double> g_own;  // gain of the link itself
    std::vector<double> denom;  // interference + noise under the link's gain
    std::vector<double> gamma;
    std::vector<int> load;      // association load per station
    double circuit_total = 0.0;
};

LinkCtx build_ctx(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                  const PowerAlloc& p) {
    LinkCtx ctx;
    ctx.links = active_links(sc, x, s);
    const size_t L = ctx.links.size();
    ctx.q.resize(L);
    ctx.g_own.resize(L);
    ctx.denom.resize(L);
    ctx.gamma.resize(L);
    ctx.load.resize(sc.n_stations());
    for (int b = 0; b < sc.n_stations(); ++b) {
        ctx.load[b] = x.load(b);
        ctx.circuit_total += sc.stations[b].p_circuit;
    }
    for (size_t k = 0; k < L; ++k) {
        auto [b, m, n] = ctx.links[k];
        ctx.q[k] = p.get(b, m, n);
        ctx.g_own[k] = sc.gain(b, m, n);
    }
    for (size_t k = 0; k < L; ++k) {
        auto [b, m, n] = ctx.links[k];
        double intra = 0.0, cross = 0.0;
        for (size_t l = 0; l < L; ++l) {
            if (l == k) continue;
            auto [jb, jm, jn] = ctx.links[l];
            if (jn != n) continue;
            if (jb == b) {
                double gj = sc.gain(b, jm, n);
                if (gj > ctx.g_own[k] || (gj == ctx.g_own[k] && jm > m)) intra += ctx.q[l];
            } else {
                cross += ctx.q[l] * sc.gain(jb, m, n);
            }
        }
        ctx.denom[k] = ctx.g_own[k] * intra + cross + sc.noise_power;
        ctx.gamma[k] = ctx.q[k] * ctx.g_own[k] / ctx.denom[k];
    }
    return ctx;
}

double objective_from_ctx(const Scenario& sc, const LinkCtx& ctx, const Vec& penalty) {
    double numer = 0.0;
    double used_total = 0.0;
    for (size_t k = 0; k < ctx.links.size(); ++k) {
        if (ctx.gamma[k] <= 0.0) return kNegInf;
        numer += std::log(std::log2(1.0 + ctx.gamma[k])) - std::log(static_cast<double>(ctx.load[ctx.links[k].b]));
        used_total += ctx.q[k];
    }
    double f = numer / (ctx.circuit_total + used_total);
    if (!penalty.empty()) {
        Vec used(sc.n_stations(), 0.0);
        for (size_t k = 0; k < ctx.links.size(); ++k) used[ctx.links[k].b] += ctx.q[k];
        for (int b = 0; b < sc.n_stations(); ++b)
            f += penalty[b] * (sc.stations[b].p_max - used[b]);
    }
    return f;
}

double derivative_from_ctx(const Scenario& sc, const LinkCtx& ctx, const Vec& penalty,
                           size_t k) {
    const size_t L = ctx.links.size();
    auto [b, m, n] = ctx.links[k];

    double numer = 0.0, used_total = 0.0;
    for (size_t l = 0; l < L; ++l) {
        if (ctx.gamma[l] <= 0.0)
            throw InfeasibleError("power derivative undefined: active link with zero sinr");
        numer += std::log(std::log2(1.0 + ctx.gamma[l])) - std::log(static_cast<double>(ctx.load[ctx.links[l].b]));
        used_total += ctx.q[l];
    }
    double u_total = ctx.circuit_total + used_total;

    // d numer / d q_k: the own link plus every SINR this power interferes.
    double dnumer = 0.0;
    for (size_t l = 0; l < L; ++l) {
        auto [lb, lm, ln] = ctx.links[l];
        double dgamma;
        if (l == k) {
            dgamma = ctx.g_own[k] / ctx.denom[k];
        } else if (ln != n) {
            continue;
        } else if (lb == b) {
            // Same subchannel, same station: q_k hits l only when k is the
            // stronger rank.
            double gk_at_b = ctx.g_own[k];
            double gl_at_b = ctx.g_own[l];
            bool k_stronger = gk_at_b > gl_at_b || (gk_at_b == gl_at_b && m > lm);
            if (!k_stronger) continue;
            dgamma = -ctx.gamma[l] * ctx.g_own[l] / ctx.denom[l];
        } else {
            dgamma = -ctx.gamma[l] * sc.gain(b, lm, n) / ctx.denom[l];
        }
        double w = 1.0 / ((1.0 + ctx.gamma[l]) * std::log1p(ctx.gamma[l]));
        dnumer += w * dgamma;
    }

    double df = (dnumer * u_total - numer) / (u_total * u_total);
    if (!penalty.empty()) df -= penalty[b];
    return df;
}

int link_index(const LinkCtx& ctx, int b, int m) {
    for (size_t k = 0; k < ctx.links.size(); ++k)
        if (ctx.links[k].b == b && ctx.links[k].m == m) return static_cast<int>(k);
    return -1;
}

double station_floor(const Scenario& sc, const GradientConfig& cfg, int b) {
    return cfg.p_floor > 0.0 ? cfg.p_floor : 1e-6 * sc.stations[b].p_max;
}

// Rescale a station's links so the budget holds while every link keeps at
// least its floor: only the headroom above the floor is compressed.
void enforce_budget(const Scenario& sc, const std::vector<ActiveLink>& links,
                    const GradientConfig& cfg, PowerAlloc& p) {
    for (int b = 0; b < sc.n_stations(); ++b) {
        double floor = station_floor(sc, cfg, b);
        double excess = 0.0;
        int count = 0;
        for (const auto& l : links) {
            if (l.b != b) continue;
            ++count;
            excess += p.get(l.b, l.m, l.n) - floor;
        }
        if (count == 0) continue;
        double target = sc.stations[b].p_max - count * floor;
        if (target <= 0.0)
            throw ConfigError("power floor leaves no budget at station " + std::to_string(b));
        if (excess > target) {
            double scale = target / excess;
            for (const auto& l : links) {
                if (l.b != b) continue;
                double q = p.get(l.b, l.m, l.n);
                p.set(l.b, l.m, l.n, floor + (q - floor) * scale);
            }
        }
    }
}

double sweep_delta(const GradientConfig& cfg, int t) {
    return cfg.step0 / std::pow(static_cast<double>(std::max(1, t)), cfg.step_decay);
}

PowerAlloc sweep(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                 const PowerAlloc& start, const GradientConfig& cfg, double delta) {
    PowerAlloc p = start;
    auto links = active_links(sc, x, s);
    for (const auto& link : links) {
        LinkCtx ctx = build_ctx(sc, x, s, p);
        int k = link_index(ctx, link.b, link.m);
        if (k < 0) continue;

        double d1 = derivative_from_ctx(sc, ctx, cfg.penalty, static_cast<size_t>(k));

        // Second derivative by central difference of the analytic first.
        double q = ctx.q[k];
        double h = std::max(1e-6 * q, 1e-15);
        PowerAlloc ph = p;
        ph.set(link.b, link.m, link.n, q + h);
        LinkCtx chi = build_ctx(sc, x, s, ph);
        double d_hi = derivative_from_ctx(sc, chi, cfg.penalty, static_cast<size_t>(k));
        ph.set(link.b, link.m, link.n, std::max(q - h, 1e-18));
        LinkCtx clo = build_ctx(sc, x, s, ph);
        double d_lo = derivative_from_ctx(sc, clo, cfg.penalty, static_cast<size_t>(k));
        double d2 = (d_hi - d_lo) / (2.0 * h);

        double magnitude = std::abs(d2) > 1e-300 ? std::abs(d1) / std::abs(d2) : std::abs(d1);
        double direction = d1 > 0 ? 1.0 : (d1 < 0 ? -1.0 : 0.0);
        double floor = station_floor(sc, cfg, link.b);
        double q_new = q + delta * direction * magnitude;
        q_new = std::clamp(q_new, floor, sc.stations[link.b].p_max);
        p.set(link.b, link.m, link.n, q_new);
    }
    enforce_budget(sc, links, cfg, p);
    return p;
}

}  // namespace

double power_objective(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                       const PowerAlloc& p, const Vec& penalty) {
    if (!penalty.empty() && static_cast<int>(penalty.size()) != sc.n_stations())
        throw ConfigError("penalty vector size must match station count");
    LinkCtx ctx = build_ctx(sc, x, s, p);
    return objective_from_ctx(sc, ctx, penalty);
}

double power_derivative(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                        const PowerAlloc& p, const Vec& penalty, int b, int m) {
    LinkCtx ctx = build_ctx(sc, x, s, p);
    int k = link_index(ctx, b, m);
    if (k < 0) throw InfeasibleError("user has no active link at this station");
    return derivative_from_ctx(sc, ctx, penalty, static_cast<size_t>(k));
}

PowerAlloc power_step(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                      const PowerAlloc& p, const GradientConfig& cfg, int t) {
    // A zero step is admitted here (it leaves p untouched); the solver's
    // config validation is stricter.
    if (cfg.step0 < 0 || cfg.p_floor < 0) throw ConfigError("negative step or floor");
    return sweep(sc, x, s, p, cfg, sweep_delta(cfg, t));
}

PowerResult solve_power(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                        const GradientConfig& cfg) {
    cfg.validate();
    PowerResult result;
    result.p = equal_power(sc, x, s);

    // Lift the start onto the floor so every active link has positive power.
    auto links = active_links(sc, x, s);
    for (const auto& l : links) {
        double floor = station_floor(sc, cfg, l.b);
        if (result.p.get(l.b, l.m, l.n) < floor) result.p.set(l.b, l.m, l.n, floor);
    }
    enforce_budget(sc, links, cfg, result.p);

    double f = power_objective(sc, x, s, result.p, cfg.penalty);
    result.trace.push_back(f);
    if (links.empty()) return result;

    for (int t = 1; t <= cfg.t_max; ++t) {
        double delta = sweep_delta(cfg, t);
        PowerAlloc cand;
        double f_cand = kNegInf;
        bool accepted = false;
        for (int tries = 0; tries < 24; ++tries) {
            cand = sweep(sc, x, s, result.p, cfg, delta);
            f_cand = power_objective(sc, x, s, cand, cfg.penalty);
            if (f_cand >= f) { accepted = true; break; }
            delta *= 0.5;
        }
        if (!accepted) break;
        bool stalled = cand.p == result.p.p;
        result.p = std::move(cand);
        if (stalled) break;
        result.trace.push_back(f_cand);
        if (std::abs(f_cand - f) < cfg.eps) { f = f_cand; break; }
        f = f_cand;
    }
    return result;
}

PowerAlloc equal_power(const Scenario& sc, const Association& x, const SubchannelAlloc& s) {
    PowerAlloc p(sc.n_stations(), sc.n_users, sc.n_subchannels);
    auto links = active_links(sc, x, s);
    for (int b = 0; b < sc.n_stations(); ++b) {
        int count = 0;
        for (const auto& l : links) count += l.b == b ? 1 : 0;
        if (count == 0) continue;
        double share = sc.stations[b].p_max / count;
        for (const auto& l : links)
            if (l.b == b) p.set(l.b, l.m, l.n, share);
    }
    return p;
}

PowerAlloc random_power(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                        uint64_t seed) {
    PowerAlloc p(sc.n_stations(), sc.n_users, sc.n_subchannels);
    auto links = active_links(sc, x, s);
    Rng rng(seed);
    for (int b = 0; b < sc.n_stations(); ++b) {
        std::vector<std::pair<ActiveLink, double>> weights;
        for (const auto& l : links)
            if (l.b == b) weights.push_back({l, rng.uniform() + 1e-12});
        if (weights.empty()) continue;
        double total = 0.0;
        for (const auto& [l, w] : weights) total += w;
        for (const auto& [l, w] : weights)
            p.set(l.b, l.m, l.n, sc.stations[b].p_max * w / total);
    }
    return p;
}

PowerAlloc cap_cross_interference(const Scenario& sc, const Association& x,
                                  const SubchannelAlloc& s, const PowerAlloc& p) {
    PowerAlloc out = p;
    int guard = 4 * sc.n_stations() * sc.n_subchannels + 16;
    while (guard-- > 0) {
        double worst_ratio = 1.0;
        int wb = -1, wm = -1, wn = -1;
        for (int b = 0; b < sc.n_stations(); ++b) {
            double cap = sc.stations[b].i_cap;
            for (int m = 0; m < sc.n_users; ++m) {
                if (!x.get(b, m)) continue;
                for (int n = 0; n < sc.n_subchannels; ++n) {
                    if (!s.get(b, m, n)) continue;
                    double received = cross_tier_interference(sc, s, out, b, m, n);
                    double ratio = received / cap;
                    if (ratio > worst_ratio * (1.0 + 1e-12)) {
                        worst_ratio = ratio;
                        wb = b; wm = m; wn = n;
                    }
                }
            }
        }
        if (wb < 0) break;
        double scale = 1.0 / worst_ratio;
        for (int j = 0; j < sc.n_stations(); ++j) {
            if (j == wb) continue;
            for (int r = 0; r < sc.n_users; ++r)
                if (s.get(j, r, wn)) out.set(j, r, wn, out.get(j, r, wn) * scale);
        }
    }
    return out;
}

}  // namespace noma
