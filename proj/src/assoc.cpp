#include "noma/assoc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace noma {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Fixed-allocation context: everything the scores need that does not depend
// on the multipliers, so the solver prices candidates in O(B*M) per sweep.
struct CandidateContext {
    int B = 0, M = 0;
    double u_total = 0.0;          // circuit + transmit power of the fixed allocation
    Vec base;                      // [B][M] ln(W log2(1+sinr)) / U  (may be -inf)
    Vec p_cand;                    // [B][M] candidate link power
    Vec rate_cand;                 // [B][M] candidate capacity
    Vec gp_cand;                   // [B][M] (B-1) * gain * candidate power
    double mean_p = 0.0, mean_rate = 0.0, mean_gp = 0.0;

    double at(const Vec& v, int b, int m) const { return v[static_cast<size_t>(b) * M + m]; }
};

int occupancy_load(const Scenario& sc, const SubchannelAlloc& s, int b) {
    int load = 0;
    for (int m = 0; m < sc.n_users; ++m)
        if (s.channel_of(b, m) >= 0) ++load;
    return load;
}

CandidateContext build_context(const Scenario& sc, const SubchannelAlloc& s,
                               const PowerAlloc& p) {
    CandidateContext ctx;
    ctx.B = sc.n_stations();
    ctx.M = sc.n_users;
    const int N = sc.n_subchannels;

    ctx.u_total = 0.0;
    for (int b = 0; b < ctx.B; ++b) ctx.u_total += sc.stations[b].p_circuit;
    for (int b = 0; b < ctx.B; ++b)
        for (int m = 0; m < ctx.M; ++m)
            for (int n = 0; n < N; ++n)
                if (s.get(b, m, n)) ctx.u_total += p.get(b, m, n);

    std::vector<int> load(ctx.B);
    for (int b = 0; b < ctx.B; ++b) load[b] = occupancy_load(sc, s, b);

    size_t sz = static_cast<size_t>(ctx.B) * ctx.M;
    ctx.base.resize(sz);
    ctx.p_cand.resize(sz);
    ctx.rate_cand.resize(sz);
    ctx.gp_cand.resize(sz);

    int finite = 0;
    for (int b = 0; b < ctx.B; ++b) {
        for (int m = 0; m < ctx.M; ++m) {
            int n_star = s.channel_of(b, m);
            bool active = n_star >= 0;
            if (!active) {
                double best = -1.0;
                for (int n = 0; n < N; ++n)
                    if (sc.gain(b, m, n) > best) { best = sc.gain(b, m, n); n_star = n; }
            }
            double g = sc.gain(b, m, n_star);
            double q = active ? p.get(b, m, n_star) : sc.stations[b].p_max / (2.0 * N);

            double intra = 0.0;
            for (int r = 0; r < ctx.M; ++r) {
                if (r == m || !s.get(b, r, n_star)) continue;
                double gr = sc.gain(b, r, n_star);
                if (gr > g || (gr == g && r > m)) intra += p.get(b, r, n_star);
            }
            double denom = g * intra + cross_tier_interference(sc, s, p, b, m, n_star) +
                           sc.noise_power;
            double gamma = q * g / denom;
            double log_term = std::log2(1.0 + gamma);

            int cand_load = load[b] + (active ? 0 : 1);
            size_t i = static_cast<size_t>(b) * ctx.M + m;
            ctx.p_cand[i] = q;
            ctx.rate_cand[i] = sc.bandwidth_hz / cand_load * log_term;
            ctx.gp_cand[i] = (ctx.B - 1) * g * q;
            if (log_term > 0.0) {
                ctx.base[i] = std::log(sc.bandwidth_hz * log_term) / ctx.u_total;
                ctx.mean_p += q;
                ctx.mean_rate += ctx.rate_cand[i];
                ctx.mean_gp += ctx.gp_cand[i];
                ++finite;
            } else {
                ctx.base[i] = kNegInf;
            }
        }
    }
    if (finite > 0) {
        ctx.mean_p /= finite;
        ctx.mean_rate /= finite;
        ctx.mean_gp /= finite;
    }
    return ctx;
}

double score_from_context(const CandidateContext& ctx, const DualMultipliers& duals,
                          int b, int m) {
    size_t i = static_cast<size_t>(b) * ctx.M + m;
    if (ctx.base[i] == kNegInf) return kNegInf;
    return ctx.base[i] - duals.power_price[b] * ctx.p_cand[i] - duals.load_price[b] +
           duals.qos_price[m] * ctx.rate_cand[i] -
           duals.interference_price[b] * ctx.gp_cand[i];
}

}  // namespace

bool DualMultipliers::all_nonnegative() const {
    auto ok = [](const Vec& v) {
        for (double x : v)
            if (x < 0.0) return false;
        return true;
    };
    return ok(load_price) && ok(power_price) && ok(qos_price) && ok(interference_price);
}

double DualMultipliers::l2_norm() const {
    double acc = 0.0;
    for (const Vec* v : {&load_price, &power_price, &qos_price, &interference_price})
        for (double x : *v) acc += x * x;
    return std::sqrt(acc);
}

double association_score(const Scenario& sc, const SubchannelAlloc& s, const PowerAlloc& p,
                         const DualMultipliers& duals, int b, int m) {
    CandidateContext ctx = build_context(sc, s, p);
    return score_from_context(ctx, duals, b, m);
}

ScoreMatrix association_scores(const Scenario& sc, const SubchannelAlloc& s,
                               const PowerAlloc& p, const DualMultipliers& duals) {
    CandidateContext ctx = build_context(sc, s, p);
    ScoreMatrix out(ctx.B, ctx.M);
    for (int b = 0; b < ctx.B; ++b)
        for (int m = 0; m < ctx.M; ++m) out.at(b, m) = score_from_context(ctx, duals, b, m);
    return out;
}

Association associate(const ScoreMatrix& scores) {
    Association x(scores.n_stations, scores.n_users);
    for (int m = 0; m < scores.n_users; ++m) {
        int best_b = -1;
        double best = kNegInf;
        for (int b = 0; b < scores.n_stations; ++b) {
            double v = scores.at(b, m);
            if (v == kNegInf) continue;
            if (best_b < 0 || v > best) { best = v; best_b = b; }
        }
        if (best_b < 0)
            throw InfeasibleError("user " + std::to_string(m) + " has no admissible station");
        x.set(best_b, m, true);
    }
    return x;
}

DualMultipliers update_multipliers(const DualMultipliers& duals, const Scenario& sc,
                                   const Association& x, const SubchannelAlloc& s,
                                   const PowerAlloc& p, const DualStep& step) {
    const int B = sc.n_stations();
    const int M = sc.n_users;
    DualMultipliers out = duals;

    for (int b = 0; b < B; ++b) {
        double load_slack = sc.stations[b].k_cap - x.load(b);
        out.load_price[b] = std::max(0.0, out.load_price[b] - step.load * load_slack);

        double used = 0.0;
        for (int m = 0; m < M; ++m) {
            if (!x.get(b, m)) continue;
            for (int n = 0; n < sc.n_subchannels; ++n)
                if (s.get(b, m, n)) used += p.get(b, m, n);
        }
        double power_slack = sc.stations[b].p_max - used;
        out.power_price[b] = std::max(0.0, out.power_price[b] - step.power * power_slack);

        double intf_slack = sc.stations[b].i_cap;
        for (int m = 0; m < M; ++m) {
            if (!x.get(b, m)) continue;
            for (int n = 0; n < sc.n_subchannels; ++n)
                if (s.get(b, m, n))
                    intf_slack = std::min(intf_slack,
                                          sc.stations[b].i_cap -
                                              cross_tier_interference(sc, s, p, b, m, n));
        }
        out.interference_price[b] =
            std::max(0.0, out.interference_price[b] - step.interference * intf_slack);
    }

    for (int m = 0; m < M; ++m) {
        int b = x.station_of(m);
        double rate = 0.0;
        if (b >= 0 && x.load(b) >= 1) {
            for (int n = 0; n < sc.n_subchannels; ++n)
                if (s.get(b, m, n)) rate += capacity(sc, x, s, p, b, m, n);
        }
        double qos_slack = rate - sc.qos_rate;
        out.qos_price[m] = std::max(0.0, out.qos_price[m] - step.qos * qos_slack);
    }
    return out;
}

AssocResult solve_user_association(const Scenario& sc, const SubchannelAlloc& s,
                                   const PowerAlloc& p, const AssocSolverConfig& cfg) {
    cfg.validate();
    const int B = sc.n_stations();
    const int M = sc.n_users;

    CandidateContext ctx = build_context(sc, s, p);

    // Normalize each multiplier family so a unit of relative violation shifts
    // scores by about the base step. Raw slacks are in users, watts, bits/s
    // and watts again; without this the families move on absurdly different
    // time scales.
    double mean_cap = 0.0;
    for (int b = 0; b < B; ++b) mean_cap += sc.stations[b].k_cap;
    mean_cap /= B;
    double mean_pmax = 0.0;
    for (int b = 0; b < B; ++b) mean_pmax += sc.stations[b].p_max;
    mean_pmax /= B;
    double mean_icap = 0.0;
    for (int b = 0; b < B; ++b) mean_icap += sc.stations[b].i_cap;
    mean_icap /= B;

    double u = ctx.u_total;
    DualStep scale;
    scale.load = 1.0 / (mean_cap * u);
    scale.power = ctx.mean_p > 0 ? 1.0 / (mean_pmax * ctx.mean_p * u) : 0.0;
    scale.qos = (sc.qos_rate > 0 && ctx.mean_rate > 0)
                    ? 1.0 / (sc.qos_rate * ctx.mean_rate * u)
                    : 0.0;
    scale.interference = (mean_icap > 0 && ctx.mean_gp > 0)
                             ? 1.0 / (mean_icap * ctx.mean_gp * u)
                             : 0.0;

    AssocResult result;
    result.duals = DualMultipliers::zeros(B, M);

    for (int t = 1; t <= cfg.max_iters; ++t) {
        ScoreMatrix scores(B, M);
        for (int b = 0; b < B; ++b)
            for (int m = 0; m < M; ++m)
                scores.at(b, m) = score_from_context(ctx, result.duals, b, m);
        result.x = associate(scores);

        double base_step = cfg.step0 / std::pow(static_cast<double>(t), cfg.step_decay);
        DualStep step;
        step.load = base_step * scale.load;
        step.power = base_step * scale.power;
        step.qos = base_step * scale.qos;
        step.interference = base_step * scale.interference;
        DualMultipliers next = update_multipliers(result.duals, sc, result.x, s, p, step);

        // Largest score shift any single multiplier change can cause.
        double movement = 0.0;
        for (int b = 0; b < B; ++b) {
            movement = std::max(movement, std::abs(next.load_price[b] - result.duals.load_price[b]));
            movement = std::max(movement, std::abs(next.power_price[b] - result.duals.power_price[b]) * ctx.mean_p);
            movement = std::max(movement,
                                std::abs(next.interference_price[b] - result.duals.interference_price[b]) * ctx.mean_gp);
        }
        for (int m = 0; m < M; ++m)
            movement = std::max(movement, std::abs(next.qos_price[m] - result.duals.qos_price[m]) * ctx.mean_rate);

        result.duals = next;
        result.trace.push_back({t, result.duals.l2_norm(), result.x.load(0),
                                energy_efficiency(sc, result.x, s, p)});
        if (movement < cfg.tolerance) break;
    }
    return result;
}

Association max_sinr_association(const Scenario& sc, const Vec& p_ref) {
    const int B = sc.n_stations();
    Association x(B, sc.n_users);
    for (int m = 0; m < sc.n_users; ++m) {
        int best_b = 0;
        double best = -1.0;
        for (int b = 0; b < B; ++b) {
            double power = p_ref.empty() ? sc.stations[b].p_max : p_ref[b];
            double top = 0.0;
            for (int n = 0; n < sc.n_subchannels; ++n)
                top = std::max(top, sc.gain(b, m, n));
            double ref_sinr = power * top / sc.noise_power;
            if (ref_sinr > best) { best = ref_sinr; best_b = b; }
        }
        x.set(best_b, m, true);
    }
    return x;
}

void write_assoc_trace_csv(const std::string& path, const std::vector<AssocTraceRow>& trace) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open for writing: " + path);
    std::fprintf(f, "iteration,dual_norm,macro_load_users,ee_bits_per_joule\n");
    for (const auto& row : trace)
        std::fprintf(f, "%d,%.12g,%d,%.12g\n", row.iter, row.dual_norm, row.macro_load, row.ee);
    std::fclose(f);
}

}  // namespace noma
