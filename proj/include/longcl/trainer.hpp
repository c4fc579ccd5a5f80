#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "longcl/memcon.hpp"
#include "longcl/memman.hpp"
#include "longcl/metrics.hpp"
#include "longcl/model.hpp"
#include "longcl/param_core.hpp"
#include "longcl/streams.hpp"

namespace longcl {

enum class Optimizer { sgd, adam };

struct TrainConfig {
    std::size_t epochs = 1;
    std::size_t batch_size = 16;
    double learning_rate = 0.05;
    Optimizer optimizer = Optimizer::sgd;
    double momentum = 0.0;  // sgd only
    std::uint64_t seed = 0;
};

enum class Method { vanilla, uniform_replay, memman_only, memcon_only, long_cl };

enum class EncoderKind { identity, random_projection };

struct RunConfig {
    TrainConfig train;
    MemManConfig memman;
    MemConConfig memcon;
    PartitionSpec partition = PartitionSpec::row();
    std::size_t rank = 4;
    double init_scale = 1.0;
    EncoderKind encoder = EncoderKind::random_projection;
    std::size_t embedding_dim = 32;
    std::uint64_t encoder_seed = 0x5EEDu;
    bool evaluate_all = false;  // also fill zero-shot cells (k > j)
};

// One SGD/Adam pass per epoch over the shuffled concatenation of the task's
// training data and the replay records. Deterministic in `cfg.seed`.
ToyModel train_task(const ToyModel& model, const TaskDataset& task, std::span<const Record> replay,
                    const TrainConfig& cfg);

// Fraction of exact-match predictions.
double evaluate(const ToyModel& model, std::span<const Record> split);

// Everything a run decided at one task boundary.
struct TaskTrace {
    std::size_t t = 0;  // one-based position in the stream
    std::string task_id;
    std::optional<double> alpha;
    std::vector<std::size_t> selected_units;
    TaskMask mask;
    std::optional<SelectionReport> selection;
    std::vector<std::size_t> replay_ids;  // ids of this task's samples added to the replay pool
    std::size_t replay_pool_size = 0;     // records replayed while training this task
    ParamVector theta_prev;
    ParamVector phi;
    ParamVector theta;
    std::vector<double> accuracy_row;  // m(t, 1..t), plus zero-shot cells when enabled
};

struct RunResult {
    PerfMatrix perf;
    std::vector<TaskTrace> traces;
    ParamVector base_before;
    ParamVector base_after;
};

using TaskObserver = std::function<void(const TaskTrace&)>;

RunResult run_stream(const TaskStream& stream, Method method, const RunConfig& config, std::uint64_t seed,
                     const TaskObserver& observer = {});

std::string to_string(Method method);
Method parse_method(const std::string& name);
std::string to_string(Optimizer optimizer);
Optimizer parse_optimizer(const std::string& name);

}  // namespace longcl
