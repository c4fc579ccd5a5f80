// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Brute-force references come from oracles.hpp.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "longcl/experiment.hpp"
#include "longcl/memcon.hpp"
#include "longcl/memman.hpp"
#include "longcl/metrics.hpp"
#include "longcl/model.hpp"
#include "longcl/trainer.hpp"
#include "oracles.hpp"

using namespace longcl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects failures without stopping at the first one.
class Checker {
public:
    void require(bool ok, const std::string& what) {
        if (ok) return;
        if (failures_.size() < 5) failures_.push_back(what);
        ++count_;
    }
    bool ok() const { return count_ == 0; }
    std::string report() const {
        std::string s;
        for (const auto& f : failures_) s += "\n      - " + f;
        if (count_ > failures_.size()) s += "\n      - ... " + std::to_string(count_ - failures_.size()) + " more";
        return s;
    }

private:
    std::vector<std::string> failures_;
    std::size_t count_ = 0;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("longcl_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double spread(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
}

ExperimentConfig rotated_experiment(const fs::path& out, std::vector<ArmSpec> arms, std::vector<std::uint64_t> seeds) {
    ExperimentConfig cfg;
    SyntheticSpec spec;  // 10-task rotated-gaussians defaults
    cfg.stream.synthetic = spec;
    cfg.stream.spec = {{"kind", "synthetic"}, {"family", "rotated-gaussians"}, {"tasks", spec.tasks}, {"seed", spec.seed}};
    cfg.arms = std::move(arms);
    cfg.seeds = std::move(seeds);
    cfg.output_dir = out;
    cfg.checkpoints = false;
    return cfg;
}

// AP/AF keyed by arm, one entry per cell in run order.
std::map<std::string, std::vector<CellResult>> by_arm(const std::vector<CellResult>& cells) {
    std::map<std::string, std::vector<CellResult>> out;
    for (const auto& c : cells) out[c.arm].push_back(c);
    return out;
}

std::vector<double> aps(const std::vector<CellResult>& cells) {
    std::vector<double> v;
    for (const auto& c : cells) v.push_back(c.ap);
    return v;
}

std::vector<double> afs(const std::vector<CellResult>& cells) {
    std::vector<double> v;
    for (const auto& c : cells) v.push_back(c.af);
    return v;
}

// ---------------------------------------------------------------- 1

Outcome oracle_equivalence() {
    Checker check;
    double worst = 0.0;
    auto track = [&](double a, double b, const std::string& what) {
        const double d = std::abs(a - b);
        worst = std::max(worst, d);
        check.require(d < 1e-9, what + " deviates by " + fmt(d));
    };
    std::mt19937_64 rng(20241);
    std::uniform_real_distribution<double> frac(0.01, 1.0);
    std::uniform_int_distribution<int> small(0, 3);
    constexpr int kInstances = 120;

    // select_topk_units on drift from random parameter pairs. Values on a
    // coarse grid give plenty of tied drifts.
    for (int n = 0; n < kInstances; ++n) {
        const std::size_t width = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
        const std::size_t units = std::uniform_int_distribution<std::size_t>(1, 1000 / width)(rng);
        std::vector<double> a(units * width), b(units * width);
        for (auto& v : a) v = small(rng);
        for (auto& v : b) v = small(rng);
        const auto part = make_partition(a.size(), PartitionSpec::row(width));
        const auto drift = compute_drift(ParamVector(a), ParamVector(b), part);
        std::vector<double> ref(units);
        for (std::size_t u = 0; u < units; ++u) {
            double s = 0.0;
            for (std::size_t k = u * width; k < (u + 1) * width; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
            ref[u] = std::sqrt(s);
            track(drift.per_unit[u], ref[u], "drift");
        }
        const double kf = frac(rng);
        check.require(select_topk_units(drift, kf) == oracle::sorted_prefix(ref, oracle::ceil_count(units, kf), true),
                      "select_topk_units instance " + std::to_string(n));
    }

    for (int n = 0; n < kInstances; ++n) {
        const std::size_t dim = std::uniform_int_distribution<std::size_t>(1, 16)(rng);
        const std::size_t count = std::uniform_int_distribution<std::size_t>(1, 200)(rng);
        const std::size_t nprotos = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
        const bool grid = n % 3 == 0;
        std::vector<Embedding> protos;
        for (std::size_t j = 0; j < nprotos; ++j) protos.push_back(oracle::random_vec(rng, dim, 3.0));
        std::vector<Embedding> pts;
        for (std::size_t i = 0; i < count; ++i) {
            auto p = oracle::random_vec(rng, dim, 1.5);
            const auto& centre = protos[i % nprotos];
            for (std::size_t k = 0; k < dim; ++k) p[k] = grid ? std::round(p[k] + centre[k]) : p[k] + centre[k];
            pts.push_back(std::move(p));
        }

        // select_hard
        const auto& current = protos.back();
        const double r_h = frac(rng);
        const auto hard = select_hard(pts, current, r_h);
        const auto hard_ref = oracle::hard(pts, current, r_h);
        check.require(hard.size() == hard_ref.size(), "select_hard size, instance " + std::to_string(n));
        for (std::size_t i = 0; i < std::min(hard.size(), hard_ref.size()); ++i) {
            check.require(hard[i].id == hard_ref[i], "select_hard order, instance " + std::to_string(n));
            track(hard[i].distance, oracle::dist(pts[hard[i].id], current), "select_hard distance");
        }

        // compute_delta
        const double delta = compute_delta(protos);
        track(delta, oracle::delta(protos), "compute_delta");

        // select_differential against the earlier prototypes
        const std::vector<Embedding> prev(protos.begin(), protos.end() - 1);
        const double r_g = frac(rng);
        const auto diff = select_differential(pts, prev, r_g, delta);
        const auto diff_ref = oracle::differential(pts, prev, r_g, oracle::delta(protos));
        check.require(diff.size() == diff_ref.size(), "select_differential size, instance " + std::to_string(n));
        for (std::size_t i = 0; i < std::min(diff.size(), diff_ref.size()); ++i) {
            check.require(diff[i].id == diff_ref[i], "select_differential order, instance " + std::to_string(n));
            double z = 0.0, lo = std::numeric_limits<double>::infinity();
            for (const auto& a : prev) {
                z += oracle::dist(pts[diff[i].id], a);
                lo = std::min(lo, oracle::dist(pts[diff[i].id], a));
            }
            track(diff[i].cumulative, z, "select_differential cumulative");
            track(diff[i].min_distance, lo, "select_differential min distance");
        }

        // compute_alpha on a prefix of the store
        PrototypeStore store;
        for (const auto& p : protos) store.append(p, count);
        const std::size_t t = std::uniform_int_distribution<std::size_t>(2, nprotos)(rng);
        const std::vector<Embedding> prefix(protos.begin(), protos.begin() + static_cast<std::ptrdiff_t>(t));
        track(compute_alpha(store, t, 0.3), oracle::alpha(prefix, 0.3), "compute_alpha");
    }

    // compose_beta and fuse_params
    std::uniform_real_distribution<double> alpha_dist(0.3, 1.0);
    std::bernoulli_distribution coin(0.3);
    for (int n = 0; n < kInstances; ++n) {
        const std::size_t width = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
        const std::size_t units = std::uniform_int_distribution<std::size_t>(1, 1000 / width)(rng);
        std::vector<std::uint8_t> bits(units);
        std::vector<int> mask(units);
        for (std::size_t u = 0; u < units; ++u) mask[u] = bits[u] = coin(rng) ? 1 : 0;
        const double alpha = alpha_dist(rng);
        const auto plan = compose_beta(alpha, TaskMask(bits, 1));
        check.require(plan.beta.size() == units, "compose_beta size");
        for (std::size_t u = 0; u < std::min(units, plan.beta.size()); ++u)
            track(plan.beta[u], mask[u] ? alpha : 1.0 - alpha, "compose_beta");

        const auto prev = oracle::random_vec(rng, units * width);
        const auto curr = oracle::random_vec(rng, units * width);
        std::vector<std::size_t> unit_of(units * width);
        for (std::size_t i = 0; i < unit_of.size(); ++i) unit_of[i] = i / width;
        const auto fused = fuse_params(ParamVector(prev), ParamVector(curr), plan,
                                       make_partition(prev.size(), PartitionSpec::row(width)));
        const auto ref = oracle::fuse(prev, curr, unit_of, mask, alpha);
        for (std::size_t i = 0; i < ref.size(); ++i) track(fused.values()[i], ref[i], "fuse_params");
    }

    return {check.ok(), std::to_string(kInstances) + " instances per operation, max abs deviation " + fmt(worst) +
                            check.report()};
}

// ---------------------------------------------------------------- 2

Outcome invariants() {
    Checker check;
    SyntheticSpec spec;
    spec.tasks = 30;
    const auto stream = gen_synthetic_stream(spec);
    RunConfig cfg;
    const auto encoder = Encoder::random_projection(spec.features, cfg.embedding_dim, cfg.encoder_seed);

    // Prototypes re-derived here, independent of the run.
    std::vector<Embedding> protos;
    std::vector<std::vector<Embedding>> embedded;
    for (const auto& task : stream.tasks) {
        std::vector<Embedding> e;
        for (const auto& r : task.train) e.push_back(encoder.embed(r.x));
        Embedding mean_vec(e.front().size(), 0.0);
        for (const auto& v : e)
            for (std::size_t k = 0; k < v.size(); ++k) mean_vec[k] += v[k];
        for (double& v : mean_vec) v /= static_cast<double>(e.size());
        protos.push_back(mean_vec);
        embedded.push_back(std::move(e));
    }

    TaskMask previous;
    std::size_t steps = 0, diff_members = 0;
    double alpha_lo = 1.0, alpha_hi = 0.0;
    auto observe = [&](const TaskTrace& tr) {
        ++steps;
        const std::string at = "t=" + std::to_string(tr.t);
        const std::size_t units = tr.mask.size();
        const std::size_t per_task = oracle::ceil_count(units, cfg.memman.k_fraction);
        check.require(tr.mask.popcount() <= std::min(units, tr.t * per_task), at + ": popcount bound");
        if (previous.size() == units)
            for (std::size_t u = 0; u < units; ++u)
                check.require(!previous.test(u) || tr.mask.test(u), at + ": mask bit cleared");
        check.require(tr.mask.popcount() >= previous.popcount(), at + ": popcount decreased");
        previous = tr.mask;

        if (tr.t >= 2) {
            check.require(tr.alpha.has_value(), at + ": alpha missing");
            if (tr.alpha) {
                alpha_lo = std::min(alpha_lo, *tr.alpha);
                alpha_hi = std::max(alpha_hi, *tr.alpha);
                check.require(*tr.alpha >= 0.3 && *tr.alpha <= 1.0, at + ": alpha " + fmt(*tr.alpha));
            }
            const auto prev = tr.theta_prev.values();
            const auto phi = tr.phi.values();
            const auto theta = tr.theta.values();
            for (std::size_t i = 0; i < theta.size(); ++i)
                check.require(theta[i] >= std::min(prev[i], phi[i]) - 1e-12 &&
                                  theta[i] <= std::max(prev[i], phi[i]) + 1e-12,
                              at + ": fusion leaves the segment at coordinate " + std::to_string(i));
        }

        check.require(tr.selection.has_value(), at + ": selection missing");
        if (tr.selection) {
            const std::vector<Embedding> upto(protos.begin(), protos.begin() + static_cast<std::ptrdiff_t>(tr.t));
            const double delta = oracle::delta(upto);
            check.require(std::abs(tr.selection->delta - delta) < 1e-9, at + ": delta differs from the oracle");
            for (const auto& d : tr.selection->diff) {
                ++diff_members;
                double lo = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j + 1 < tr.t; ++j)
                    lo = std::min(lo, oracle::dist(embedded[tr.t - 1][d.id], protos[j]));
                check.require(lo >= delta, at + ": differential sample " + std::to_string(d.id) + " below the floor");
            }
        }
    };
    run_stream(stream, Method::long_cl, cfg, 1, observe);
    check.require(steps == 30, "expected 30 task boundaries, saw " + std::to_string(steps));

    // Determinism through the full runner.
    const auto out = scratch("invariants");
    ExperimentConfig exp;
    exp.stream.synthetic = spec;
    exp.stream.spec = {{"kind", "synthetic"}, {"tasks", 30}};
    exp.arms = {{"long-cl", Method::long_cl, {}}};
    exp.checkpoints = false;
    exp.output_dir = out / "a";
    run_experiment(exp);
    exp.output_dir = out / "b";
    run_experiment(exp);
    const auto rel = fs::path("long-cl") / "identity" / "1" / "summary.json";
    const auto first = slurp(out / "a" / rel);
    check.require(!first.empty() && first == slurp(out / "b" / rel), "summary.json differs between identical runs");
    fs::remove_all(out);

    return {check.ok(), "30 tasks, alpha in [" + fmt(alpha_lo) + ", " + fmt(alpha_hi) + "], " +
                            std::to_string(diff_members) + " differential samples checked, final popcount " +
                            std::to_string(previous.popcount()) + "/" + std::to_string(previous.size()) +
                            check.report()};
}

// ---------------------------------------------------------------- 3 and 4

struct MainGrid {
    std::map<std::string, std::vector<CellResult>> arms;
};

MainGrid run_main_grid() {
    const auto out = scratch("main");
    const auto cfg = rotated_experiment(out,
                                        {{"vanilla", Method::vanilla, {}},
                                         {"uniform-replay", Method::uniform_replay, {}},
                                         {"memman-only", Method::memman_only, {}},
                                         {"memcon-only", Method::memcon_only, {}},
                                         {"long-cl", Method::long_cl, {}}},
                                        {1, 2, 3});
    MainGrid grid{by_arm(run_experiment(cfg))};
    std::cout << compare_runs({out}).to_text();
    fs::remove_all(out);
    return grid;
}

Outcome table2_direction(const MainGrid& g) {
    Checker check;
    const auto& lc = g.arms.at("long-cl");
    const auto& va = g.arms.at("vanilla");
    const auto& ur = g.arms.at("uniform-replay");
    check.require(lc.size() == 3 && va.size() == 3 && ur.size() == 3, "expected 3 seeds per arm");
    for (std::size_t i = 0; i < std::min(lc.size(), va.size()); ++i) {
        const std::string s = "seed " + std::to_string(lc[i].seed);
        check.require(lc[i].af < va[i].af, s + ": AF long-cl " + fmt(lc[i].af) + " >= vanilla " + fmt(va[i].af));
        check.require(lc[i].ap > va[i].ap, s + ": AP long-cl " + fmt(lc[i].ap) + " <= vanilla " + fmt(va[i].ap));
    }
    check.require(mean(afs(lc)) < mean(afs(ur)), "mean AF long-cl is not below uniform-replay");
    return {check.ok(), "mean AF long-cl " + fmt(mean(afs(lc))) + " vs vanilla " + fmt(mean(afs(va))) +
                            " vs uniform-replay " + fmt(mean(afs(ur))) + "; mean AP long-cl " +
                            fmt(mean(aps(lc))) + " vs vanilla " + fmt(mean(aps(va))) + check.report()};
}

Outcome table3_direction(const MainGrid& g) {
    Checker check;
    const double lc = mean(aps(g.arms.at("long-cl")));
    const double mm = mean(aps(g.arms.at("memman-only")));
    const double mc = mean(aps(g.arms.at("memcon-only")));
    const double va = mean(aps(g.arms.at("vanilla")));
    check.require(mm > va, "memman-only mean AP does not beat vanilla");
    check.require(mc > va, "memcon-only mean AP does not beat vanilla");
    check.require(lc > mm, "long-cl mean AP does not beat memman-only");
    check.require(lc > mc, "long-cl mean AP does not beat memcon-only");
    return {check.ok(), "mean AP long-cl " + fmt(lc) + ", memman-only " + fmt(mm) + ", memcon-only " + fmt(mc) +
                            ", vanilla " + fmt(va) + check.report()};
}

// ---------------------------------------------------------------- 5

Outcome alpha_study() {
    Checker check;
    const auto out = scratch("alpha");
    const std::vector<ArmSpec> arms{{"adaptive", Method::long_cl, {}},
                                    {"alpha-0.3", Method::long_cl, 0.3},
                                    {"alpha-0.5", Method::long_cl, 0.5},
                                    {"alpha-0.7", Method::long_cl, 0.7}};
    const auto first = run_experiment(rotated_experiment(out / "a", arms, {1, 2, 3}));
    run_experiment(rotated_experiment(out / "b", arms, {1, 2, 3}));
    check.require(first.size() == 12, "expected 12 cells, got " + std::to_string(first.size()));
    for (const auto& c : first) {
        const auto rel = fs::relative(c.dir, out / "a");
        for (const char* f : {"summary.json", "perf.csv"}) {
            const auto a = slurp(out / "a" / rel / f);
            check.require(!a.empty() && a == slurp(out / "b" / rel / f), rel.string() + "/" + f + " not reproducible");
        }
        check.require(std::isfinite(c.ap) && std::isfinite(c.af), rel.string() + ": non-finite metric");
    }
    const auto table = compare_runs({out / "a"});
    check.require(table.rows.size() == 4, "comparison table should have 4 rows");
    std::cout << table.to_text();
    std::ofstream(out / "alpha_study.csv") << table.to_csv();
    std::string detail = "4 arms x 3 seeds, reproducible;";
    for (const auto& r : table.rows) detail += " " + r.arm + " AP " + fmt(r.ap_mean) + "/AF " + fmt(r.af_mean) + ";";
    detail.pop_back();
    fs::remove_all(out);
    return {check.ok(), detail + check.report()};
}

// ---------------------------------------------------------------- 6

// Spread of the per-order mean AF over the same three training seeds used
// by the main grid. A single seed is reported too, for reference.
Outcome order_robustness() {
    Checker check;
    const auto out = scratch("orders");
    auto cfg = rotated_experiment(out, {{"vanilla", Method::vanilla, {}}, {"long-cl", Method::long_cl, {}}}, {1, 2, 3});
    cfg.orders.clear();
    for (std::uint64_t s : {11u, 12u, 13u}) {
        OrderSpec o;
        o.kind = OrderSpec::Kind::shuffle;
        o.seed = s;
        cfg.orders.push_back(o);
    }
    const auto cells = run_experiment(cfg);
    const auto table = compare_runs({out}, true);
    std::cout << table.to_text();
    fs::remove_all(out);

    std::map<std::string, std::vector<double>> means, seed_one;
    for (const auto& r : table.rows) {
        check.require(r.runs == 3, r.arm + "/" + r.order + ": expected 3 seeds");
        means[r.arm].push_back(r.af_mean);
    }
    for (const auto& c : cells)
        if (c.seed == 1) seed_one[c.arm].push_back(c.af);
    check.require(table.rows.size() == 6, "order report should have 6 rows");
    check.require(means["long-cl"].size() == 3 && means["vanilla"].size() == 3, "expected 3 orders per arm");
    if (!check.ok()) return {false, check.report()};

    const double s_lc = spread(means["long-cl"]);
    const double s_va = spread(means["vanilla"]);
    check.require(s_lc <= s_va, "long-cl AF spread " + fmt(s_lc) + " exceeds vanilla " + fmt(s_va));
    return {check.ok(), "AF spread of per-order means across 3 orders: long-cl " + fmt(s_lc) + ", vanilla " +
                            fmt(s_va) + " (seed 1 alone: long-cl " + fmt(spread(seed_one["long-cl"])) + ", vanilla " +
                            fmt(spread(seed_one["vanilla"])) + ")" + check.report()};
}

// ---------------------------------------------------------------- 7

PerfMatrix lower(const std::vector<std::vector<double>>& rows) {
    PerfMatrix m(rows.size());
    for (std::size_t j = 0; j < rows.size(); ++j)
        for (std::size_t k = 0; k < rows[j].size(); ++k) m.set(j, k, rows[j][k]);
    return m;
}

Outcome metric_correctness() {
    Checker check;
    struct Case {
        PerfMatrix m;
        double ap, af;
    };
    // Dyadic entries so the hand values are exact in binary.
    std::vector<Case> cases{
        {lower({{1.0}, {0.5, 0.75}}), 0.625, 0.5},
        {lower({{0.5}, {0.75, 1.0}}), 0.875, -0.25},
        {lower({{0.75, 0.125, 0.5}, {0.5, 1.0, 0.25}, {0.25, 0.75, 0.5}}), 0.5, 0.375},
        {lower({{1.0}, {0.5, 1.0}, {0.5, 0.5, 1.0}, {0.25, 0.5, 0.75, 1.0}}), 0.625, 0.5},
        {lower({{0.5}, {0.625, 0.5}, {0.75, 0.25, 1.0}}), 2.0 / 3.0, 0.0},
    };
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        const std::string name = "matrix " + std::to_string(i + 1);
        check.require(compute_ap(c.m) == c.ap, name + ": AP " + fmt(compute_ap(c.m), 17));
        check.require(compute_af(c.m) == c.af, name + ": AF " + fmt(compute_af(c.m), 17));
        check.require(matrix_from_csv(matrix_to_csv(c.m)) == c.m, name + ": CSV round-trip");
    }

    // Arbitrary doubles survive the file round-trip bit for bit.
    const auto dir = scratch("metrics");
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < 20; ++n) {
        const std::size_t M = 2 + n % 7;
        PerfMatrix m(M);
        for (std::size_t j = 0; j < M; ++j)
            for (std::size_t k = 0; k < M; ++k)
                if (k <= j || n % 2 == 0) m.set(j, k, u(rng));
        export_matrix(m, dir / "perf.csv");
        const auto back = read_matrix(dir / "perf.csv");
        check.require(back == m, "random matrix " + std::to_string(n) + ": file round-trip");
        check.require(matrix_to_csv(back) == slurp(dir / "perf.csv"), "random matrix " + std::to_string(n) + ": CSV text");
    }
    fs::remove_all(dir);
    return {check.ok(), "5 hand matrices exact (one with AF = -0.25), 25 CSV round-trips" + check.report()};
}

// ---------------------------------------------------------------- 8

Outcome gradient_check() {
    Checker check;
    SyntheticSpec spec;
    spec.tasks = 2;
    spec.train_per_task = 64;
    spec.test_per_task = 8;
    spec.features = 12;
    spec.classes = 5;
    const auto stream = gen_synthetic_stream(spec);
    std::vector<const Record*> batch;
    for (std::size_t i = 0; i < 32; ++i) batch.push_back(&stream.tasks[1].train[i]);

    std::mt19937_64 rng(8);
    double worst = 0.0;
    for (int model_idx = 0; model_idx < 5; ++model_idx) {
        auto model = ToyModel::create({spec.features, spec.classes, 3}, 500 + model_idx);
        model.set_adapter(model.adapter().with_values(oracle::random_vec(rng, model.adapter().size(), 0.4)));
        const auto grad = model.adapter_gradient(batch);
        const std::vector<double> base(model.adapter().values().begin(), model.adapter().values().end());
        std::uniform_int_distribution<std::size_t> pick(0, base.size() - 1);
        for (int c = 0; c < 10; ++c) {
            const std::size_t i = pick(rng);
            const double h = 1e-5;
            auto vp = base, vm = base;
            vp[i] += h;
            vm[i] -= h;
            auto plus = model, minus = model;
            plus.set_adapter(model.adapter().with_values(vp));
            minus.set_adapter(model.adapter().with_values(vm));
            const double fd = (plus.loss(batch) - minus.loss(batch)) / (2.0 * h);
            const double rel = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
            worst = std::max(worst, rel);
            check.require(rel < 1e-4, "model " + std::to_string(model_idx) + " coordinate " + std::to_string(i) +
                                          ": relative error " + fmt(rel));
        }
    }
    return {check.ok(), "5 models x 10 coordinates, max relative error " + fmt(worst) + check.report()};
}

// ----------------------------------------------------------------

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::function<Outcome()> body;
};

}  // namespace

int main() {
    std::optional<MainGrid> grid;
    auto main_grid = [&]() -> const MainGrid& {
        if (!grid) grid = run_main_grid();
        return *grid;
    };

    const std::vector<Criterion> criteria{
        {1, "oracle equivalence", 30.0, oracle_equivalence},
        {2, "invariants over a 30-task run", 120.0, invariants},
        {3, "long-cl beats vanilla on AF and AP in every seed", 300.0, [&] { return table2_direction(main_grid()); }},
        {4, "both components contribute to AP", 300.0, [&] { return table3_direction(main_grid()); }},
        {5, "adaptive vs fixed alpha study", 300.0, alpha_study},
        {6, "order robustness of AF", 300.0, order_robustness},
        {7, "AP/AF on hand matrices and CSV round-trip", 30.0, metric_correctness},
        {8, "adapter gradient check", 30.0, gradient_check},
    };

    int failed = 0;
    std::vector<std::string> lines;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.body();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (secs > c.budget_seconds) {
            o.pass = false;
            o.detail += "\n      - took " + fmt(secs) + " s, budget " + fmt(c.budget_seconds) + " s";
        }
        if (!o.pass) ++failed;
        std::ostringstream line;
        line << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << " (" << fmt(secs, 3) << " s): "
             << o.detail;
        lines.push_back(line.str());
        std::cout << lines.back() << std::endl;
    }

    std::cout << "\n==== acceptance summary ====\n";
    for (const auto& l : lines) std::cout << l.substr(0, l.find('\n')) << '\n';
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << '\n';
    return failed == 0 ? 0 : 1;
}
