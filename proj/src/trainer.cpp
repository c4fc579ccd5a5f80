#include "longcl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "longcl/error.hpp"
#include "longcl/prototypes.hpp"

namespace longcl {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

bool uses_memman(Method m) { return m == Method::memman_only || m == Method::long_cl; }
bool uses_memcon(Method m) { return m == Method::memcon_only || m == Method::long_cl; }

}  // namespace

ToyModel train_task(const ToyModel& model, const TaskDataset& task, std::span<const Record> replay,
                    const TrainConfig& cfg) {
    if (task.train.empty()) throw PreconditionError("task '" + task.id + "' has an empty training set");
    if (task.feature_dim() != model.shape().features) throw ShapeError("task and model feature dimensions differ");
    if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");

    std::vector<const Record*> pool;
    pool.reserve(task.train.size() + replay.size());
    for (const auto& r : task.train) pool.push_back(&r);
    for (const auto& r : replay) pool.push_back(&r);

    ToyModel out = model;
    std::vector<double> params(out.adapter().values().begin(), out.adapter().values().end());
    std::vector<double> m1(params.size(), 0.0), m2(params.size(), 0.0);
    std::size_t step = 0;
    std::mt19937_64 rng(cfg.seed);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(pool.begin(), pool.end(), rng);
        for (std::size_t start = 0; start < pool.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(pool.size(), start + cfg.batch_size);
            std::span<const Record* const> batch(pool.data() + start, stop - start);
            const auto grad = out.adapter_gradient(batch);
            ++step;
            if (cfg.optimizer == Optimizer::sgd) {
                for (std::size_t i = 0; i < params.size(); ++i) {
                    m1[i] = cfg.momentum * m1[i] + grad[i];
                    params[i] -= cfg.learning_rate * m1[i];
                }
            } else {
                constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
                const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
                const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
                for (std::size_t i = 0; i < params.size(); ++i) {
                    m1[i] = b1 * m1[i] + (1.0 - b1) * grad[i];
                    m2[i] = b2 * m2[i] + (1.0 - b2) * grad[i] * grad[i];
                    params[i] -= cfg.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
                }
            }
            out.set_adapter(out.adapter().with_values(params));
        }
    }
    if (!out.adapter().all_finite()) throw Error("training diverged: non-finite adapter parameters");
    return out;
}

double evaluate(const ToyModel& model, std::span<const Record> split) {
    if (split.empty()) throw PreconditionError("cannot evaluate on an empty split");
    std::size_t correct = 0;
    for (const auto& r : split) correct += model.predict(r.x) == r.y ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(split.size());
}

RunResult run_stream(const TaskStream& stream, Method method, const RunConfig& config, std::uint64_t seed,
                     const TaskObserver& observer) {
    if (stream.size() < 2) throw PreconditionError("a continual-learning run needs at least 2 tasks");
    validate_stream(stream);

    const ModelShape shape{stream.feature_dim(), stream.num_classes(), config.rank};
    ToyModel model = ToyModel::create(shape, mix_seed(seed, 0, 0xA11), config.init_scale);
    const UnitPartition partition = make_partition(model.adapter(), config.partition);
    const Encoder encoder = config.encoder == EncoderKind::identity
                                ? Encoder::identity(shape.features)
                                : Encoder::random_projection(shape.features, config.embedding_dim, config.encoder_seed);

    RunResult result;
    result.perf = PerfMatrix(stream.size());
    result.base_before = model.base();

    TaskMask mask(partition.size());
    PrototypeStore prototypes;
    std::vector<Record> replay;
    const bool needs_prototypes = method != Method::vanilla;

    for (std::size_t t = 1; t <= stream.size(); ++t) {
        const TaskDataset& task = stream.tasks[t - 1];
        TaskTrace trace;
        trace.t = t;
        trace.task_id = task.id;
        trace.replay_pool_size = replay.size();

        std::vector<Embedding> embeddings;
        if (needs_prototypes) {
            embeddings.reserve(task.train.size());
            for (const auto& r : task.train) embeddings.push_back(encoder.embed(r.x));
            prototypes.append(compute_prototype(embeddings), embeddings.size());
        }

        trace.theta_prev = model.adapter();
        TrainConfig tc = config.train;
        tc.seed = mix_seed(seed, t, 0x7A1);
        ToyModel tuned = train_task(model, task, replay, tc);
        trace.phi = tuned.adapter();

        if (uses_memman(method)) {
            auto step = memman_step(trace.theta_prev, trace.phi, partition, mask, prototypes, t, config.memman);
            mask = step.mask;
            trace.selected_units = std::move(step.selected);
            if (step.plan) trace.alpha = step.plan->alpha;
            model.set_adapter(std::move(step.fused));
        } else {
            model = std::move(tuned);
        }
        trace.mask = mask;
        trace.theta = model.adapter();

        if (uses_memcon(method) || method == Method::uniform_replay) {
            SelectionReport report = memcon_select(embeddings, prototypes, t, config.memcon);
            if (method == Method::uniform_replay) {
                std::vector<std::size_t> ids(task.train.size());
                std::iota(ids.begin(), ids.end(), std::size_t{0});
                std::mt19937_64 rng(mix_seed(seed, t, 0x0F11));
                std::shuffle(ids.begin(), ids.end(), rng);
                ids.resize(report.buffer.size());
                trace.replay_ids = std::move(ids);
            } else {
                for (const auto& rec : report.buffer) trace.replay_ids.push_back(rec.id);
                trace.selection = std::move(report);
            }
            for (std::size_t id : trace.replay_ids) replay.push_back(task.train[id]);
        }

        const std::size_t last = config.evaluate_all ? stream.size() : t;
        for (std::size_t k = 0; k < last; ++k) {
            const double acc = evaluate(model, stream.tasks[k].test);
            result.perf.set(t - 1, k, acc);
            trace.accuracy_row.push_back(acc);
        }

        if (observer) observer(trace);
        result.traces.push_back(std::move(trace));
    }
    result.base_after = model.base();
    return result;
}

std::string to_string(Method method) {
    switch (method) {
        case Method::vanilla: return "vanilla";
        case Method::uniform_replay: return "uniform-replay";
        case Method::memman_only: return "memman-only";
        case Method::memcon_only: return "memcon-only";
        case Method::long_cl: return "long-cl";
    }
    return "vanilla";
}

Method parse_method(const std::string& name) {
    if (name == "vanilla") return Method::vanilla;
    if (name == "uniform-replay") return Method::uniform_replay;
    if (name == "memman-only") return Method::memman_only;
    if (name == "memcon-only") return Method::memcon_only;
    if (name == "long-cl") return Method::long_cl;
    throw ConfigError("unknown method '" + name + "'");
}

std::string to_string(Optimizer optimizer) { return optimizer == Optimizer::sgd ? "sgd" : "adam"; }

Optimizer parse_optimizer(const std::string& name) {
    if (name == "sgd") return Optimizer::sgd;
    if (name == "adam") return Optimizer::adam;
    throw ConfigError("unknown optimizer '" + name + "'");
}

}  // namespace longcl
