#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "noma/netmodel.hpp"

using namespace noma;

namespace {

// Tiny hand-built instance builder: gains supplied explicitly so every
// expected value below can be recomputed with scalar arithmetic.
Scenario tiny_scenario(int B, int M, int N, double noise, double bandwidth) {
    Scenario sc;
    sc.n_users = M;
    sc.n_subchannels = N;
    sc.bandwidth_hz = bandwidth;
    sc.noise_power = noise;
    sc.qos_rate = 0.0;
    sc.user_x.assign(M, 0.0);
    sc.user_y.assign(M, 0.0);
    for (int b = 0; b < B; ++b) {
        BaseStation bs;
        bs.id = b;
        bs.kind = b == 0 ? BsKind::macro : BsKind::small;
        bs.p_max = 1.0;
        bs.p_circuit = 1.0;
        bs.k_cap = M;
        bs.i_cap = 1.0;
        sc.stations.push_back(bs);
    }
    sc.gains.assign(static_cast<size_t>(B) * M * N, 1.0);
    return sc;
}

// Independent re-evaluation of the metric chain with plain scalar loops,
// used as the oracle for the derived checks.
struct NaiveMetrics {
    double sum_rate = 0.0, total_power = 0.0;
};

NaiveMetrics naive_metrics(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                           const PowerAlloc& p) {
    NaiveMetrics out;
    const int B = sc.n_stations(), M = sc.n_users, N = sc.n_subchannels;
    for (int b = 0; b < B; ++b) {
        out.total_power += sc.stations[b].p_circuit;
        int load = 0;
        for (int m = 0; m < M; ++m) load += x.get(b, m) ? 1 : 0;
        for (int m = 0; m < M; ++m) {
            if (!x.get(b, m)) continue;
            for (int n = 0; n < N; ++n) {
                if (s.get(b, m, n)) out.total_power += p.get(b, m, n);
                if (load < 1) continue;
                // SINR re-derivation straight from the formula.
                double g = sc.gain(b, m, n);
                double intra = 0.0;
                for (int r = 0; r < M; ++r) {
                    if (r == m || !s.get(b, r, n)) continue;
                    double gr = sc.gain(b, r, n);
                    if (gr > g || (gr == g && r > m)) intra += p.get(b, r, n);
                }
                double cross = 0.0;
                for (int j = 0; j < B; ++j) {
                    if (j == b) continue;
                    for (int r = 0; r < M; ++r)
                        if (s.get(j, r, n)) cross += p.get(j, r, n) * sc.gain(j, m, n);
                }
                double gamma = s.get(b, m, n)
                                   ? p.get(b, m, n) * g / (g * intra + cross + sc.noise_power)
                                   : 0.0;
                out.sum_rate += sc.bandwidth_hz / load * std::log2(1.0 + gamma);
            }
        }
    }
    return out;
}

// Random feasible instance for the property checks.
struct RandomInstance {
    Scenario sc;
    Association x;
    SubchannelAlloc s;
    PowerAlloc p;
};

RandomInstance random_instance(uint64_t seed, int B, int M, int N) {
    Rng rng(seed);
    RandomInstance inst{tiny_scenario(B, M, N, 1e-3, 1.0e6), Association(B, M),
                        SubchannelAlloc(B, M, N), PowerAlloc(B, M, N)};
    for (auto& g : inst.sc.gains) g = rng.uniform(0.01, 2.0);
    std::vector<std::vector<int>> occupancy(B, std::vector<int>(N, 0));
    for (int m = 0; m < M; ++m) {
        int b = static_cast<int>(rng.uniform_int(B));
        inst.x.set(b, m, true);
        for (int tries = 0; tries < 64; ++tries) {
            int n = static_cast<int>(rng.uniform_int(N));
            if (occupancy[b][n] < 2) {
                inst.s.set(b, m, n, true);
                inst.p.set(b, m, n, rng.uniform(0.01, 0.2));
                ++occupancy[b][n];
                break;
            }
        }
    }
    return inst;
}

}  // namespace

TEST_CASE("scenario generation shapes, positivity and determinism") {
    ScenarioConfig cfg;  // desk defaults: 1 macro + 3 small, 24 users
    cfg.n_users = 60;
    Scenario sc = generate_scenario(cfg, 7);
    CHECK(sc.n_stations() == 4);
    CHECK(sc.stations[0].kind == BsKind::macro);
    for (int b = 1; b < 4; ++b) CHECK(sc.stations[b].kind == BsKind::small);
    CHECK(sc.gains.size() == 4u * 60u * 6u);
    for (double g : sc.gains) {
        CHECK(g > 0.0);
        CHECK(std::isfinite(g));
    }

    Scenario again = generate_scenario(cfg, 7);
    CHECK(sc == again);
    Scenario other = generate_scenario(cfg, 8);
    CHECK_FALSE(sc == other);
}

TEST_CASE("minimal single-link scenario") {
    ScenarioConfig cfg;
    cfg.n_small = 0;
    cfg.n_users = 1;
    cfg.n_subchannels = 1;
    Scenario sc = generate_scenario(cfg, 0);
    CHECK(sc.n_stations() == 1);
    CHECK(sc.gains.size() == 1u);
    CHECK(sc.gains[0] > 0.0);
}

TEST_CASE("invalid configs are rejected") {
    ScenarioConfig cfg;
    cfg.n_users = 0;
    CHECK_THROWS_AS(generate_scenario(cfg, 1), ConfigError);
    cfg = ScenarioConfig{};
    cfg.bandwidth_hz = -1;
    CHECK_THROWS_AS(generate_scenario(cfg, 1), ConfigError);
    cfg = ScenarioConfig{};
    cfg.macro_radius_m = 0;
    CHECK_THROWS_AS(generate_scenario(cfg, 1), ConfigError);
}

TEST_CASE("config file round trip and unknown keys") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "noma_netmodel_test";
    fs::create_directories(dir);
    {
        std::FILE* f = std::fopen((dir / "ok.cfg").string().c_str(), "w");
        std::fprintf(f, "# comment\nn_users = 12\nn_subchannels = 4\nseed = 99\n");
        std::fclose(f);
    }
    ScenarioConfig cfg = ScenarioConfig::from_file((dir / "ok.cfg").string());
    CHECK(cfg.n_users == 12);
    CHECK(cfg.n_subchannels == 4);
    CHECK(cfg.seed == 99);
    {
        std::FILE* f = std::fopen((dir / "bad.cfg").string().c_str(), "w");
        std::fprintf(f, "mystery_key = 3\n");
        std::fclose(f);
    }
    CHECK_THROWS_AS(ScenarioConfig::from_file((dir / "bad.cfg").string()), ConfigError);
}

TEST_CASE("sinr basics: zero power, clean single link") {
    Scenario sc = tiny_scenario(1, 1, 1, 0.5, 1.0);
    Association x(1, 1);
    x.set(0, 0, true);
    SubchannelAlloc s(1, 1, 1);
    s.set(0, 0, 0, true);
    PowerAlloc p(1, 1, 1);

    CHECK(sinr(sc, x, s, p, 0, 0, 0) == 0.0);  // zero numerator

    // p * g / noise = 1.5 * 1 / 0.5 = 3
    p.set(0, 0, 0, 1.5);
    CHECK(sinr(sc, x, s, p, 0, 0, 0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("sinr with a shared subchannel follows the gain-ranked decode order") {
    // Two users on one subchannel: user 0 has the stronger gain.
    Scenario sc = tiny_scenario(1, 2, 1, 2e-3, 1.0);
    sc.gain_ref(0, 0, 0) = 0.9;   // g1 (stronger)
    sc.gain_ref(0, 1, 0) = 0.2;   // g2 (weaker)
    Association x(1, 2);
    x.set(0, 0, true);
    x.set(0, 1, true);
    SubchannelAlloc s(1, 2, 1);
    s.set(0, 0, 0, true);
    s.set(0, 1, 0, true);
    PowerAlloc p(1, 2, 1);
    double p1 = 0.3, p2 = 0.7;
    p.set(0, 0, 0, p1);
    p.set(0, 1, 0, p2);

    // Hand expansion: the weaker-gain user decodes under the stronger user's
    // interference; the stronger user is clean after cancellation.
    double expected_weak = p2 * 0.2 / (0.2 * p1 + 2e-3);
    double expected_strong = p1 * 0.9 / 2e-3;
    CHECK(sinr(sc, x, s, p, 0, 1, 0) == doctest::Approx(expected_weak).epsilon(1e-12));
    CHECK(sinr(sc, x, s, p, 0, 0, 0) == doctest::Approx(expected_strong).epsilon(1e-12));
}

TEST_CASE("capacity examples") {
    Scenario sc = tiny_scenario(1, 4, 1, 1.0, 1.2e9);
    Association x(1, 4);
    SubchannelAlloc s(1, 4, 1);
    PowerAlloc p(1, 4, 1);

    // One associated user, SINR 1 -> W * log2(2) = W.
    x.set(0, 0, true);
    s.set(0, 0, 0, true);
    p.set(0, 0, 0, 1.0);  // g=1, noise=1 -> sinr 1
    CHECK(capacity(sc, x, s, p, 0, 0, 0) == doctest::Approx(1.2e9).epsilon(1e-12));

    // SINR 0 -> 0 bits/s.
    p.set(0, 0, 0, 0.0);
    CHECK(capacity(sc, x, s, p, 0, 0, 0) == 0.0);

    // Four associated users, SINR 3 -> (W/4) * log2(4) = W/2.
    for (int m = 1; m < 4; ++m) x.set(0, m, true);
    p.set(0, 0, 0, 3.0);
    CHECK(capacity(sc, x, s, p, 0, 0, 0) == doctest::Approx(6.0e8).epsilon(1e-12));

    // No associated users -> undefined load.
    Association empty(1, 4);
    CHECK_THROWS_AS(capacity(sc, empty, s, p, 0, 0, 0), UndefinedLoadError);
}

TEST_CASE("aggregate metrics: trivial values") {
    Scenario sc = tiny_scenario(2, 2, 1, 1.0, 1.0e9);
    sc.stations[0].p_circuit = 1.0;
    sc.stations[1].p_circuit = 1.0;
    Association x(2, 2);
    x.set(0, 0, true);
    x.set(1, 1, true);
    SubchannelAlloc s(2, 2, 1);
    s.set(0, 0, 0, true);
    PowerAlloc p(2, 2, 1);

    // All transmit powers zero: rate 0, power = circuit sum, EE 0.
    CHECK(sum_rate(sc, x, s, p) == 0.0);
    CHECK(total_power(sc, x, s, p) == doctest::Approx(2.0));
    CHECK(energy_efficiency(sc, x, s, p) == 0.0);

    // One link at 0.5 W on top of 2 W circuit.
    p.set(0, 0, 0, 0.5);
    CHECK(total_power(sc, x, s, p) == doctest::Approx(2.5));

    // Single-link instance: sum rate equals that link's capacity.
    CHECK(sum_rate(sc, x, s, p) == doctest::Approx(capacity(sc, x, s, p, 0, 0, 0)));
}

TEST_CASE("ee simple ratio") {
    // rate 1e9 at total power 2 W -> 5e8 bits/joule, built from a clean link.
    Scenario sc = tiny_scenario(1, 1, 1, 1.0, 1.0e9);
    sc.stations[0].p_circuit = 1.0;
    Association x(1, 1);
    x.set(0, 0, true);
    SubchannelAlloc s(1, 1, 1);
    s.set(0, 0, 0, true);
    PowerAlloc p(1, 1, 1);
    p.set(0, 0, 0, 1.0);  // sinr 1 -> rate = W = 1e9; power = 1 + 1 = 2
    CHECK(energy_efficiency(sc, x, s, p) == doctest::Approx(5.0e8).epsilon(1e-12));
}

TEST_CASE("aggregates match an independent re-summation on random instances") {
    for (uint64_t seed = 1; seed <= 24; ++seed) {
        RandomInstance inst = random_instance(seed, 2, 4, 2);
        NaiveMetrics oracle = naive_metrics(inst.sc, inst.x, inst.s, inst.p);
        CHECK(sum_rate(inst.sc, inst.x, inst.s, inst.p) ==
              doctest::Approx(oracle.sum_rate).epsilon(1e-12));
        CHECK(total_power(inst.sc, inst.x, inst.s, inst.p) ==
              doctest::Approx(oracle.total_power).epsilon(1e-12));
        CHECK(energy_efficiency(inst.sc, inst.x, inst.s, inst.p) ==
              doctest::Approx(oracle.sum_rate / oracle.total_power).epsilon(1e-12));
    }
    // Larger shapes still under the naive oracle's comfort zone.
    for (uint64_t seed = 30; seed <= 36; ++seed) {
        RandomInstance inst = random_instance(seed, 4, 8, 2);
        NaiveMetrics oracle = naive_metrics(inst.sc, inst.x, inst.s, inst.p);
        CHECK(sum_rate(inst.sc, inst.x, inst.s, inst.p) ==
              doctest::Approx(oracle.sum_rate).epsilon(1e-12));
        CHECK(total_power(inst.sc, inst.x, inst.s, inst.p) ==
              doctest::Approx(oracle.total_power).epsilon(1e-12));
    }
}

TEST_CASE("sinr monotonicity in own and interfering power") {
    RandomInstance inst = random_instance(77, 2, 6, 2);
    // Find a user pair sharing a subchannel.
    for (int b = 0; b < 2; ++b)
        for (int n = 0; n < 2; ++n) {
            auto occ = inst.s.occupants(b, n);
            if (occ.size() != 2) continue;
            int weak = occ[0], strong = occ[1];
            if (inst.sc.gain(b, weak, n) > inst.sc.gain(b, strong, n)) std::swap(weak, strong);

            double before = sinr(inst.sc, inst.x, inst.s, inst.p, b, weak, n);
            PowerAlloc more = inst.p;
            more.set(b, weak, n, more.get(b, weak, n) * 1.5);
            CHECK(sinr(inst.sc, inst.x, inst.s, more, b, weak, n) >= before);

            PowerAlloc louder = inst.p;
            louder.set(b, strong, n, louder.get(b, strong, n) * 2.0);
            CHECK(sinr(inst.sc, inst.x, inst.s, louder, b, weak, n) <= before);
        }
}

TEST_CASE("scaling gains and noise together leaves sinr unchanged") {
    RandomInstance inst = random_instance(123, 2, 4, 2);
    Scenario scaled = inst.sc;
    for (auto& g : scaled.gains) g *= 2.0;
    scaled.noise_power *= 2.0;
    for (int b = 0; b < 2; ++b)
        for (int m = 0; m < 4; ++m)
            for (int n = 0; n < 2; ++n)
                CHECK(sinr(inst.sc, inst.x, inst.s, inst.p, b, m, n) ==
                      doctest::Approx(sinr(scaled, inst.x, inst.s, inst.p, b, m, n))
                          .epsilon(1e-15));
}

TEST_CASE("constraint report flags the seeded violations") {
    Scenario sc = tiny_scenario(2, 3, 1, 1.0, 1.0e9);
    sc.qos_rate = 0.0;

    // A user connected to two stations: slack -1.
    Association x(2, 3);
    x.set(0, 0, true);
    x.set(1, 0, true);
    x.set(0, 1, true);
    x.set(0, 2, true);
    SubchannelAlloc s(2, 3, 1);
    PowerAlloc p(2, 3, 1);
    ConstraintReport rep = check_constraints(sc, x, s, p);
    CHECK_FALSE(rep.single_association.pass);
    CHECK(rep.single_association.slack == doctest::Approx(-1.0));

    // Three users on one subchannel.
    Association x2(2, 3);
    for (int m = 0; m < 3; ++m) x2.set(0, m, true);
    SubchannelAlloc s2(2, 3, 1);
    for (int m = 0; m < 3; ++m) s2.set(0, m, 0, true);
    rep = check_constraints(sc, x2, s2, p);
    CHECK_FALSE(rep.subchannel_occupancy.pass);
    CHECK(rep.subchannel_occupancy.slack == doctest::Approx(-1.0));

    // Power over budget.
    PowerAlloc p3(2, 3, 1);
    p3.set(0, 0, 0, sc.stations[0].p_max * 2.0);
    SubchannelAlloc s3(2, 3, 1);
    s3.set(0, 0, 0, true);
    Association x3(2, 3);
    for (int m = 0; m < 3; ++m) x3.set(0, m, true);
    rep = check_constraints(sc, x3, s3, p3);
    CHECK_FALSE(rep.station_power.pass);
}

TEST_CASE("scenario binary round trip is exact and corruption is caught") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "noma_netmodel_test";
    fs::create_directories(dir);
    std::string path = (dir / "scenario.bin").string();

    ScenarioConfig cfg;
    Scenario sc = generate_scenario(cfg, 42);
    sc.save(path);
    Scenario back = Scenario::load(path);
    CHECK(sc == back);

    // Flip one payload byte: checksum failure.
    {
        std::FILE* f = std::fopen(path.c_str(), "r+b");
        std::fseek(f, 60, SEEK_SET);
        int c = std::fgetc(f);
        std::fseek(f, 60, SEEK_SET);
        std::fputc(c ^ 0xFF, f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(Scenario::load(path), FileChecksumError);

    // Truncate: distinct error.
    sc.save(path);
    fs::resize_file(path, fs::file_size(path) / 2);
    CHECK_THROWS_AS(Scenario::load(path), FileTruncatedError);
}
