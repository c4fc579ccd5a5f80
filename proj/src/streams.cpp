#include "longcl/streams.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "longcl/error.hpp"

namespace longcl {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(tag)};
    return std::mt19937_64(seq);
}

struct Geometry {
    std::vector<std::vector<double>> class_means;
    std::vector<double> drift_direction;
};

Geometry make_geometry(const SyntheticSpec& spec) {
    auto rng = make_rng(spec.seed, 0, 0xC1A55);
    std::normal_distribution<double> normal(0.0, 1.0);
    Geometry g;
    g.class_means.assign(spec.classes, std::vector<double>(spec.features));
    for (auto& mean : g.class_means)
        for (double& v : mean) v = spec.separation * normal(rng);
    g.drift_direction.resize(spec.features);
    double norm = 0.0;
    for (double& v : g.drift_direction) {
        v = normal(rng);
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : g.drift_direction) v /= norm;
    return g;
}

void rotate_pairs(std::vector<double>& x, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t k = 0; k + 1 < x.size(); k += 2) {
        const double a = x[k];
        const double b = x[k + 1];
        x[k] = c * a - s * b;
        x[k + 1] = s * a + c * b;
    }
}

std::vector<Record> sample_split(const SyntheticSpec& spec, const Geometry& g, std::size_t t, std::size_t count,
                                 const std::vector<std::size_t>& feature_perm, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Record> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const int label = static_cast<int>(i % spec.classes);
        std::vector<double> z(spec.features);
        for (std::size_t k = 0; k < spec.features; ++k) z[k] = g.class_means[label][k] + spec.noise * normal(rng);
        std::vector<double> x;
        switch (spec.family) {
            case StreamFamily::rotated_gaussians:
                rotate_pairs(z, static_cast<double>(t) * spec.rotation_step);
                x = std::move(z);
                break;
            case StreamFamily::permuted_features:
                x.resize(spec.features);
                for (std::size_t k = 0; k < spec.features; ++k) x[k] = z[feature_perm[k]];
                break;
            case StreamFamily::drifting_means:
                for (std::size_t k = 0; k < spec.features; ++k)
                    z[k] += static_cast<double>(t) * spec.drift_step * g.drift_direction[k];
                x = std::move(z);
                break;
        }
        out.push_back({std::move(x), label});
    }
    return out;
}

std::string where(const std::filesystem::path& file, std::size_t line) {
    return file.string() + ":" + std::to_string(line) + ": ";
}

std::vector<Record> read_jsonl(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IngestionError(file.string() + ": cannot open file");
    std::vector<Record> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw IngestionError(where(file, lineno) + "malformed JSON");
        }
        if (!j.is_object() || j.size() != 2 || !j.contains("x") || !j.contains("y"))
            throw IngestionError(where(file, lineno) + "record must be {\"x\": [floats], \"y\": int}");
        const auto& jx = j["x"];
        const auto& jy = j["y"];
        if (!jx.is_array() || jx.empty()) throw IngestionError(where(file, lineno) + "\"x\" must be a non-empty array");
        if (!jy.is_number_integer()) throw IngestionError(where(file, lineno) + "\"y\" must be an integer");
        Record rec;
        rec.x.reserve(jx.size());
        for (const auto& v : jx) {
            if (!v.is_number()) throw IngestionError(where(file, lineno) + "\"x\" entries must be numbers");
            const double d = v.get<double>();
            if (!std::isfinite(d)) throw IngestionError(where(file, lineno) + "non-finite feature");
            rec.x.push_back(d);
        }
        rec.y = jy.get<int>();
        out.push_back(std::move(rec));
    }
    if (out.empty()) throw IngestionError(file.string() + ": empty dataset");
    return out;
}

struct SplitSource {
    std::vector<Record> records;
    std::filesystem::path file;
};

void check_split(const SplitSource& split, std::size_t dim, std::size_t classes) {
    // Line numbers assume one record per non-blank line; recompute on error.
    for (std::size_t i = 0; i < split.records.size(); ++i) {
        const auto& r = split.records[i];
        if (r.x.size() != dim || r.y < 0 || static_cast<std::size_t>(r.y) >= classes) {
            std::ifstream in(split.file);
            std::string line;
            std::size_t lineno = 0, seen = 0;
            while (std::getline(in, line)) {
                ++lineno;
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                if (seen++ == i) break;
            }
            if (r.x.size() != dim)
                throw IngestionError(where(split.file, lineno) + "expected " + std::to_string(dim) + " features, got " +
                                     std::to_string(r.x.size()));
            throw IngestionError(where(split.file, lineno) + "label " + std::to_string(r.y) + " outside [0, " +
                                 std::to_string(classes) + ")");
        }
    }
}

}  // namespace

std::size_t TaskStream::num_classes() const noexcept {
    std::size_t c = 0;
    for (const auto& t : tasks) c = std::max(c, t.num_classes);
    return c;
}

TaskStream gen_synthetic_stream(const SyntheticSpec& spec) {
    if (spec.tasks < 2) throw ConfigError("a stream needs at least 2 tasks");
    if (spec.train_per_task == 0 || spec.test_per_task == 0) throw ConfigError("task splits must be non-empty");
    if (spec.features == 0 || spec.classes < 2) throw ConfigError("need features >= 1 and classes >= 2");
    if (!(spec.noise >= 0.0) || !std::isfinite(spec.separation)) throw ConfigError("invalid noise/separation");

    const Geometry g = make_geometry(spec);
    TaskStream stream;
    stream.seed = spec.seed;
    for (std::size_t t = 0; t < spec.tasks; ++t) {
        std::vector<std::size_t> perm(spec.features);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        if (spec.family == StreamFamily::permuted_features && t > 0) {
            auto prng = make_rng(spec.seed, t, 0x9E3);
            std::shuffle(perm.begin(), perm.end(), prng);
        }
        auto train_rng = make_rng(spec.seed, t, 1);
        auto test_rng = make_rng(spec.seed, t, 2);
        TaskDataset task;
        task.id = "task_" + std::to_string(t + 1);
        task.num_classes = spec.classes;
        task.train = sample_split(spec, g, t, spec.train_per_task, perm, train_rng);
        task.test = sample_split(spec, g, t, spec.test_per_task, perm, test_rng);
        stream.tasks.push_back(std::move(task));
        stream.order.push_back(t);
    }
    return stream;
}

TaskStream load_jsonl_stream(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw IngestionError(manifest.string() + ": cannot open manifest");
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw IngestionError(manifest.string() + ": malformed manifest: " + e.what());
    }
    if (!doc.is_object()) throw IngestionError(manifest.string() + ": manifest must be a JSON object");

    std::size_t declared_classes = 0;
    const nlohmann::ordered_json* tasks = &doc;
    if (doc.contains("tasks")) {
        for (const auto& [key, _] : doc.items())
            if (key != "tasks" && key != "num_classes")
                throw IngestionError(manifest.string() + ": unknown manifest key '" + key + "'");
        tasks = &doc["tasks"];
        if (doc.contains("num_classes")) {
            if (!doc["num_classes"].is_number_unsigned() || doc["num_classes"].get<std::size_t>() < 2)
                throw IngestionError(manifest.string() + ": num_classes must be an integer >= 2");
            declared_classes = doc["num_classes"].get<std::size_t>();
        }
    }
    if (!tasks->is_object() || tasks->empty()) throw IngestionError(manifest.string() + ": manifest lists no tasks");

    const auto base = manifest.parent_path();
    std::vector<std::pair<SplitSource, SplitSource>> splits;
    std::vector<std::string> ids;
    for (const auto& [id, entry] : tasks->items()) {
        if (!entry.is_object() || !entry.contains("train") || !entry.contains("test") || !entry["train"].is_string() ||
            !entry["test"].is_string())
            throw IngestionError(manifest.string() + ": task '" + id + "' needs string \"train\" and \"test\" paths");
        auto resolve = [&](const std::string& p) {
            std::filesystem::path path(p);
            return path.is_absolute() ? path : base / path;
        };
        SplitSource train{{}, resolve(entry["train"].get<std::string>())};
        SplitSource test{{}, resolve(entry["test"].get<std::string>())};
        train.records = read_jsonl(train.file);
        test.records = read_jsonl(test.file);
        splits.emplace_back(std::move(train), std::move(test));
        ids.push_back(id);
    }

    const std::size_t dim = splits.front().first.records.front().x.size();
    std::size_t classes = declared_classes;
    if (classes == 0) {
        int max_label = 0;
        for (const auto& [train, test] : splits) {
            for (const auto& r : train.records) max_label = std::max(max_label, r.y);
            for (const auto& r : test.records) max_label = std::max(max_label, r.y);
        }
        classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);
    }

    TaskStream stream;
    for (std::size_t t = 0; t < splits.size(); ++t) {
        auto& [train, test] = splits[t];
        check_split(train, dim, classes);
        check_split(test, dim, classes);
        std::set<std::vector<double>> seen;
        for (const auto& r : train.records) seen.insert(r.x);
        for (std::size_t i = 0; i < test.records.size(); ++i)
            if (seen.contains(test.records[i].x))
                throw IngestionError(test.file.string() + ": test record " + std::to_string(i + 1) +
                                     " duplicates a training record");
        TaskDataset task;
        task.id = ids[t];
        task.num_classes = classes;
        task.train = std::move(train.records);
        task.test = std::move(test.records);
        stream.tasks.push_back(std::move(task));
        stream.order.push_back(t);
    }
    return stream;
}

std::filesystem::path write_jsonl_stream(const TaskStream& stream, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json tasks = nlohmann::ordered_json::object();
    auto write_split = [](const std::filesystem::path& file, const std::vector<Record>& records) {
        std::ofstream out(file, std::ios::trunc);
        if (!out) throw IoError("cannot write " + file.string());
        for (const auto& r : records) out << nlohmann::json{{"x", r.x}, {"y", r.y}}.dump() << '\n';
    };
    for (const auto& task : stream.tasks) {
        const std::string train = task.id + ".train.jsonl";
        const std::string test = task.id + ".test.jsonl";
        write_split(dir / train, task.train);
        write_split(dir / test, task.test);
        tasks[task.id] = {{"train", train}, {"test", test}};
    }
    nlohmann::ordered_json doc{{"num_classes", stream.num_classes()}, {"tasks", tasks}};
    const auto path = dir / "manifest.json";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    return path;
}

std::vector<std::size_t> shuffled_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    auto rng = make_rng(seed, n, 0x0DE5);
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> permutation) {
    std::vector<std::size_t> inv(permutation.size(), permutation.size());
    for (std::size_t i = 0; i < permutation.size(); ++i) {
        if (permutation[i] >= permutation.size() || inv[permutation[i]] != permutation.size())
            throw ConfigError("task order is not a permutation");
        inv[permutation[i]] = i;
    }
    return inv;
}

TaskStream permute_order(const TaskStream& stream, std::span<const std::size_t> permutation) {
    if (permutation.size() != stream.size())
        throw ConfigError("permutation length " + std::to_string(permutation.size()) + " differs from task count " +
                          std::to_string(stream.size()));
    inverse_permutation(permutation);  // bijection check
    TaskStream out;
    out.seed = stream.seed;
    for (std::size_t i = 0; i < permutation.size(); ++i) {
        out.tasks.push_back(stream.tasks[permutation[i]]);
        out.order.push_back(stream.order[permutation[i]]);
    }
    return out;
}

TaskStream permute_order(const TaskStream& stream, std::uint64_t seed) {
    const auto perm = shuffled_permutation(stream.size(), seed);
    return permute_order(stream, perm);
}

void validate_stream(const TaskStream& stream) {
    if (stream.tasks.empty()) throw ConfigError("stream has no tasks");
    inverse_permutation(stream.order);
    const std::size_t dim = stream.feature_dim();
    for (const auto& task : stream.tasks) {
        if (task.train.empty() || task.test.empty()) throw ConfigError("task '" + task.id + "' has an empty split");
        std::set<std::vector<double>> seen;
        for (const auto* split : {&task.train, &task.test}) {
            for (const auto& r : *split) {
                if (r.x.size() != dim) throw ShapeError("task '" + task.id + "' has inconsistent feature dimensions");
                if (r.y < 0 || static_cast<std::size_t>(r.y) >= task.num_classes)
                    throw ConfigError("task '" + task.id + "' has a label outside [0, C)");
            }
        }
        for (const auto& r : task.train) seen.insert(r.x);
        for (const auto& r : task.test)
            if (seen.contains(r.x)) throw ConfigError("task '" + task.id + "' train/test splits overlap");
    }
}

std::string to_string(StreamFamily family) {
    switch (family) {
        case StreamFamily::rotated_gaussians: return "rotated-gaussians";
        case StreamFamily::permuted_features: return "permuted-features";
        case StreamFamily::drifting_means: return "drifting-means";
    }
    return "rotated-gaussians";
}

StreamFamily parse_family(const std::string& name) {
    if (name == "rotated-gaussians") return StreamFamily::rotated_gaussians;
    if (name == "permuted-features") return StreamFamily::permuted_features;
    if (name == "drifting-means") return StreamFamily::drifting_means;
    throw ConfigError("unknown stream family '" + name + "'");
}

}  // namespace longcl
