#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "longcl/error.hpp"
#include "longcl/memman.hpp"
#include "oracles.hpp"

using namespace longcl;

namespace {

std::set<std::size_t> as_set(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

PrototypeStore store_of(const std::vector<Embedding>& protos) {
    PrototypeStore s;
    for (const auto& p : protos) s.append(p, 10);
    return s;
}

}  // namespace

TEST_CASE("select_topk_units: worked examples") {
    CHECK(select_topk_units({{1, 9, 5}}, 1.0 / 3.0) == std::vector<std::size_t>{1});
    CHECK(as_set(select_topk_units({{7, 7, 7}}, 2.0 / 3.0)) == std::set<std::size_t>{0, 1});
    CHECK_THROWS_AS(select_topk_units({}, 0.1), ConfigError);
    CHECK_THROWS_AS(select_topk_units({{1, 2}}, 0.0), ConfigError);
    CHECK_THROWS_AS(select_topk_units({{1, 2}}, 1.5), ConfigError);
}

TEST_CASE("select_topk_units count is ceil(k * N)") {
    CHECK(select_topk_units({std::vector<double>(30, 1.0)}, 0.1).size() == 3);
    CHECK(select_topk_units({std::vector<double>(8, 1.0)}, 0.1).size() == 1);
    CHECK(select_topk_units({std::vector<double>(11, 1.0)}, 0.1).size() == 2);
    CHECK(select_topk_units({std::vector<double>(5, 1.0)}, 1.0).size() == 5);
}

TEST_CASE("select_topk_units equals the full-sort oracle prefix") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> coarse(0, 20);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> d(1000);
        // Coarse values force many ties.
        for (double& v : d) v = trial % 2 ? std::abs(oracle::random_vec(rng, 1)[0]) : coarse(rng);
        const auto got = select_topk_units({d}, 0.10);
        CHECK(got.size() == 100);
        CHECK(got == oracle::sorted_prefix(d, 100, true));
    }
}

TEST_CASE("update_mask ORs the selected indices") {
    const TaskMask prev({1, 0, 0}, 1);
    const std::vector<std::size_t> sel{2};
    const auto next = update_mask(prev, sel);
    CHECK(next.to_bitstring() == "101");
    CHECK(next.task_counter() == 2);

    const auto unchanged = update_mask(prev, std::vector<std::size_t>{});
    CHECK(unchanged.to_bitstring() == "100");

    CHECK(update_mask(update_mask(prev, sel), sel).bits().size() == 3);
    CHECK(update_mask(update_mask(prev, sel), sel).to_bitstring() == next.to_bitstring());

    CHECK_THROWS_AS(update_mask(prev, std::vector<std::size_t>{3}), ShapeError);
}

TEST_CASE("compute_alpha: worked examples") {
    SUBCASE("t = 2 is maximally novel") {
        CHECK(compute_alpha(store_of({{0, 0}, {5, 5}}), 2, 0.3) == 1.0);
        CHECK(compute_alpha(store_of({{0, 0}, {0, 0}}), 2, 0.3) == 1.0);
    }
    SUBCASE("four planar prototypes") {
        const auto s = store_of({{0, 0}, {1, 0}, {0, 1}, {0.5, 0.5}});
        // 3 * sqrt(0.5) / (2 + sqrt(2)), evaluated independently.
        CHECK(compute_alpha(s, 4, 0.3) == doctest::Approx(0.6213203435596427).epsilon(1e-12));
    }
    SUBCASE("a prototype inside the history clamps to the floor") {
        std::vector<Embedding> protos;
        for (int i = 0; i <= 10; ++i) protos.push_back({static_cast<double>(i), 0.0});
        protos.push_back({5.0, 0.0});
        const auto s = store_of(protos);
        CHECK(raw_alpha(s.first(12)) == doctest::Approx(30.0 / 220.0).epsilon(1e-12));
        CHECK(compute_alpha(s, 12, 0.3) == 0.3);
    }
    SUBCASE("coincident history returns 1") {
        CHECK(compute_alpha(store_of({{1, 1}, {1, 1}, {1, 1}, {4, 4}}), 4, 0.3) == 1.0);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(compute_alpha(store_of({{0, 0}, {1, 1}}), 1, 0.3), PreconditionError);
        CHECK_THROWS_AS(compute_alpha(store_of({{0, 0}, {1, 1}}), 3, 0.3), PreconditionError);
    }
}

TEST_CASE("compute_alpha matches the oracle, stays in [lambda, 1], and ignores rigid motions") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> count(2, 8);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    for (int trial = 0; trial < 200; ++trial) {
        const int t = count(rng);
        std::vector<Embedding> protos;
        for (int i = 0; i < t; ++i) protos.push_back(oracle::random_vec(rng, 2, 3.0));
        const double a = compute_alpha(store_of(protos), t, 0.3);
        CHECK(std::abs(a - oracle::alpha(protos, 0.3)) < 1e-9);
        CHECK(a >= 0.3);
        CHECK(a <= 1.0);

        const double th = angle(rng);
        const auto shift = oracle::random_vec(rng, 2, 10.0);
        std::vector<Embedding> moved;
        for (const auto& p : protos)
            moved.push_back({std::cos(th) * p[0] - std::sin(th) * p[1] + shift[0],
                             std::sin(th) * p[0] + std::cos(th) * p[1] + shift[1]});
        CHECK(compute_alpha(store_of(moved), t, 0.3) == doctest::Approx(a).epsilon(1e-9));
    }
}

TEST_CASE("compose_beta: worked examples and partition property") {
    const auto half = compose_beta(0.5, TaskMask({1, 0, 1, 1}, 1));
    for (double b : half.beta) CHECK(b == 0.5);

    CHECK(compose_beta(1.0, TaskMask({1, 0}, 1)).beta == std::vector<double>{1.0, 0.0});
    const auto p = compose_beta(0.7, TaskMask({1, 0, 1}, 1));
    CHECK(p.beta[0] == 0.7);
    CHECK(p.beta[1] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(p.beta[2] == 0.7);

    CHECK_THROWS_AS(compose_beta(1.2, TaskMask(2)), PreconditionError);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.3, 1.0);
    std::bernoulli_distribution coin(0.3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::uint8_t> bits(50);
        for (auto& b : bits) b = coin(rng) ? 1 : 0;
        const double alpha = u(rng);
        if (alpha == 0.5) continue;
        const auto plan = compose_beta(alpha, TaskMask(bits, 1));
        for (std::size_t i = 0; i < bits.size(); ++i) {
            CHECK((plan.beta[i] == alpha || plan.beta[i] == 1.0 - alpha));
            CHECK((plan.beta[i] == alpha) == (bits[i] == 1));
        }
    }
}

TEST_CASE("fuse_params: boundaries, substitution and convexity") {
    const auto part = make_partition(3, PartitionSpec::segment());
    const ParamVector prev({1, 2, 3});
    const ParamVector curr({-4, 5, 9});
    FusionPlan all_new{1.0, 0.3, {1.0}};
    FusionPlan all_old{1.0, 0.3, {0.0}};
    CHECK(fuse_params(prev, curr, all_new, part) == curr);
    CHECK(fuse_params(prev, curr, all_old, part) == prev);

    const auto one = fuse_params(ParamVector({0.0}), ParamVector({2.0}), FusionPlan{0.7, 0.3, {0.7}},
                                 make_partition(1, PartitionSpec::scalar()));
    CHECK(one.values()[0] == doctest::Approx(1.4).epsilon(1e-15));

    CHECK_THROWS_AS(fuse_params(prev, ParamVector({1, 2}), all_new, part), ShapeError);
    CHECK_THROWS_AS(fuse_params(prev, curr, FusionPlan{1.0, 0.3, {1.0, 1.0}}, part), ShapeError);

    std::mt19937_64 rng(23);
    std::bernoulli_distribution coin(0.4);
    std::uniform_real_distribution<double> u(0.3, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = oracle::random_vec(rng, 40);
        const auto b = oracle::random_vec(rng, 40);
        const auto rows = make_partition(40, PartitionSpec::row(4));
        std::vector<std::uint8_t> bits(rows.size());
        std::vector<int> mask(rows.size());
        for (std::size_t i = 0; i < bits.size(); ++i) mask[i] = bits[i] = coin(rng) ? 1 : 0;
        const double alpha = u(rng);
        const auto fused = fuse_params(ParamVector(a), ParamVector(b), compose_beta(alpha, TaskMask(bits, 1)), rows);
        std::vector<std::size_t> unit_of(40);
        for (std::size_t i = 0; i < 40; ++i) unit_of[i] = i / 4;
        const auto expect = oracle::fuse(a, b, unit_of, mask, alpha);
        for (std::size_t i = 0; i < 40; ++i) {
            CHECK(std::abs(fused.values()[i] - expect[i]) < 1e-12);
            CHECK(fused.values()[i] >= std::min(a[i], b[i]) - 1e-12);
            CHECK(fused.values()[i] <= std::max(a[i], b[i]) + 1e-12);
        }
    }
}

TEST_CASE("memman_step: first task and equal models") {
    std::mt19937_64 rng(29);
    const auto part = make_partition(20, PartitionSpec::scalar());
    const ParamVector init(oracle::random_vec(rng, 20));
    const ParamVector tuned(oracle::random_vec(rng, 20));
    const MemManConfig cfg;
    const auto store = store_of({{0, 0}, {1, 0}, {0, 3}});

    const auto first = memman_step(init, tuned, part, TaskMask(20), store, 1, cfg);
    CHECK(first.fused == tuned);
    CHECK_FALSE(first.plan.has_value());
    CHECK(first.mask.popcount() == 2);

    const auto same = memman_step(init, init, part, first.mask, store, 3, cfg);
    CHECK(same.fused == init);
}

TEST_CASE("memman_step reproduces a step-by-step transcript over three tasks") {
    std::mt19937_64 rng(31);
    const std::size_t n = 30;
    const auto part = make_partition(n, PartitionSpec::scalar());
    MemManConfig cfg;
    cfg.k_fraction = 0.1;
    cfg.lambda_floor = 0.3;

    const std::vector<Embedding> protos{{0, 0, 0}, {2, 0, 1}, {0.5, 0.4, 0.2}};
    const auto store = store_of(protos);

    oracle::Vec theta = oracle::random_vec(rng, n);
    std::vector<int> o_mask(n, 0);
    ParamVector lib_theta(theta);
    TaskMask lib_mask(n);

    for (std::size_t t = 1; t <= 3; ++t) {
        oracle::Vec phi = theta;
        const auto step = oracle::random_vec(rng, n);
        for (std::size_t i = 0; i < n; ++i) phi[i] += step[i];

        // Oracle transcript: drift, top-K, OR, alpha, beta, fusion.
        oracle::Vec drift(n);
        for (std::size_t i = 0; i < n; ++i) drift[i] = std::abs(theta[i] - phi[i]);
        for (std::size_t i : oracle::sorted_prefix(drift, 3, true)) o_mask[i] = 1;
        oracle::Vec next = phi;
        if (t >= 2) {
            const std::vector<oracle::Vec> seen(protos.begin(), protos.begin() + static_cast<std::ptrdiff_t>(t));
            const double alpha = oracle::alpha(seen, 0.3);
            std::vector<std::size_t> unit_of(n);
            for (std::size_t i = 0; i < n; ++i) unit_of[i] = i;
            next = oracle::fuse(theta, phi, unit_of, o_mask, alpha);
        }

        const auto got = memman_step(lib_theta, ParamVector(phi), part, lib_mask, store, t, cfg);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(got.mask.test(i) == (o_mask[i] == 1));
            CHECK(std::abs(got.fused.values()[i] - next[i]) < 1e-12);
        }
        theta = next;
        lib_theta = got.fused;
        lib_mask = got.mask;
    }
}

TEST_CASE("mask monotonicity and popcount bound over many updates") {
    std::mt19937_64 rng(37);
    const std::size_t n = 57;
    TaskMask mask(n);
    for (int t = 0; t < 40; ++t) {
        DriftScores d{oracle::random_vec(rng, n)};
        for (double& v : d.per_unit) v = std::abs(v);
        const auto next = update_mask(mask, select_topk_units(d, 0.1));
        for (std::size_t i = 0; i < n; ++i) CHECK(next.test(i) >= mask.test(i));
        CHECK(next.popcount() <= mask.popcount() + 6);
        mask = next;
    }
}

TEST_CASE("mask bit-strings round-trip") {
    const TaskMask m({1, 0, 0, 1, 1}, 4);
    CHECK(TaskMask::from_bitstring(m.to_bitstring(), 4) == m);
    CHECK_THROWS_AS(TaskMask::from_bitstring("10x", 1), IngestionError);
}
