#include "longcl/memcon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>

#include "longcl/error.hpp"
#include "longcl/ranking.hpp"

namespace longcl {

Encoder Encoder::identity(std::size_t dim) {
    if (dim == 0) throw ConfigError("encoder dimension must be positive");
    Encoder e;
    e.kind_ = Kind::identity;
    e.input_dim_ = dim;
    e.output_dim_ = dim;
    return e;
}

Encoder Encoder::random_projection(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed) {
    if (input_dim == 0 || output_dim == 0) throw ConfigError("encoder dimensions must be positive");
    Encoder e;
    e.kind_ = Kind::random_projection;
    e.input_dim_ = input_dim;
    e.output_dim_ = output_dim;
    e.matrix_.resize(input_dim * output_dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(output_dim)));
    for (double& w : e.matrix_) w = normal(rng);
    return e;
}

Embedding Encoder::embed(std::span<const double> features) const {
    if (features.size() != input_dim_) {
        throw ShapeError("encoder expects " + std::to_string(input_dim_) + " features, got " +
                         std::to_string(features.size()));
    }
    if (kind_ == Kind::identity) return Embedding(features.begin(), features.end());
    Embedding out(output_dim_, 0.0);
    for (std::size_t r = 0; r < output_dim_; ++r) {
        const double* row = matrix_.data() + r * input_dim_;
        double acc = 0.0;
        for (std::size_t c = 0; c < input_dim_; ++c) acc += row[c] * features[c];
        out[r] = acc;
    }
    return out;
}

std::vector<HardEntry> select_hard(std::span<const Embedding> embeddings, const Embedding& prototype, double r_h) {
    if (embeddings.empty()) throw PreconditionError("select_hard: empty dataset");
    if (!(r_h > 0.0 && r_h <= 1.0)) throw ConfigError("r_h must lie in (0, 1]");
    std::vector<double> dist;
    dist.reserve(embeddings.size());
    for (const auto& e : embeddings) dist.push_back(euclidean_distance(e, prototype));
    const auto order = ranked_indices(dist, fraction_count(embeddings.size(), r_h), RankOrder::largest_first);
    std::vector<HardEntry> out;
    out.reserve(order.size());
    for (std::size_t id : order) out.push_back({id, dist[id]});
    return out;
}

double compute_delta(std::span<const Embedding> prototypes) {
    if (prototypes.size() < 2) return 0.0;
    double d_max = 0.0;
    for (std::size_t i = 0; i < prototypes.size(); ++i)
        for (std::size_t j = i + 1; j < prototypes.size(); ++j)
            d_max = std::max(d_max, euclidean_distance(prototypes[i], prototypes[j]));
    return 0.8 * d_max / 2.0;
}

std::vector<DiffEntry> select_differential(std::span<const Embedding> embeddings,
                                           std::span<const Embedding> previous_prototypes, double r_g, double delta) {
    if (!(r_g > 0.0 && r_g <= 1.0)) throw ConfigError("r_g must lie in (0, 1]");
    if (previous_prototypes.empty() || embeddings.empty()) return {};

    std::vector<DiffEntry> eligible;
    for (std::size_t id = 0; id < embeddings.size(); ++id) {
        double total = 0.0;
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& proto : previous_prototypes) {
            const double d = euclidean_distance(embeddings[id], proto);
            total += d;
            nearest = std::min(nearest, d);
        }
        if (nearest >= delta) eligible.push_back({id, total, nearest});
    }

    std::vector<double> scores;
    scores.reserve(eligible.size());
    for (const auto& e : eligible) scores.push_back(e.cumulative);
    // eligible is in id order, so position ties resolve to the lower id.
    const auto order = ranked_indices(scores, fraction_count(embeddings.size(), r_g), RankOrder::smallest_first);
    std::vector<DiffEntry> out;
    out.reserve(order.size());
    for (std::size_t pos : order) out.push_back(eligible[pos]);
    return out;
}

std::vector<BufferRecord> build_buffer(std::span<const HardEntry> hard, std::span<const DiffEntry> diff) {
    std::vector<BufferRecord> out;
    std::unordered_map<std::size_t, std::size_t> position;
    for (const auto& h : hard) {
        if (position.contains(h.id)) continue;
        position.emplace(h.id, out.size());
        out.push_back({h.id, BufferTag::hard, h.distance, std::nullopt});
    }
    for (const auto& g : diff) {
        auto it = position.find(g.id);
        if (it != position.end()) {
            auto& rec = out[it->second];
            if (rec.tag == BufferTag::hard) rec.tag = BufferTag::both;
            if (!rec.diff_score) rec.diff_score = g.cumulative;
            continue;
        }
        position.emplace(g.id, out.size());
        out.push_back({g.id, BufferTag::diff, std::nullopt, g.cumulative});
    }
    return out;
}

SelectionReport memcon_select(std::span<const Embedding> embeddings, const PrototypeStore& prototypes, std::size_t t,
                              const MemConConfig& config) {
    if (t < 1) throw PreconditionError("task index is one-based");
    const auto seen = prototypes.first(t);
    SelectionReport report;
    report.task = t;
    report.hard = select_hard(embeddings, seen[t - 1], config.r_h);
    if (t >= 2) {
        report.delta = config.delta_rule ? compute_delta(seen) : 0.0;
        report.diff = select_differential(embeddings, seen.first(t - 1), config.r_g, report.delta);
    } else if (!(config.r_g > 0.0 && config.r_g <= 1.0)) {
        throw ConfigError("r_g must lie in (0, 1]");
    }
    report.buffer = build_buffer(report.hard, report.diff);
    return report;
}

std::string to_string(BufferTag tag) {
    switch (tag) {
        case BufferTag::hard: return "hard";
        case BufferTag::diff: return "diff";
        case BufferTag::both: return "both";
    }
    return "hard";
}

namespace {

BufferTag parse_tag(const std::string& s) {
    if (s == "hard") return BufferTag::hard;
    if (s == "diff") return BufferTag::diff;
    if (s == "both") return BufferTag::both;
    throw IngestionError("unknown buffer tag '" + s + "'");
}

}  // namespace

nlohmann::ordered_json to_json(const SelectionReport& report) {
    nlohmann::ordered_json j;
    j["task"] = report.task;
    j["delta"] = report.delta;
    auto& hard = j["hard"] = nlohmann::ordered_json::array();
    for (const auto& h : report.hard) hard.push_back({{"id", h.id}, {"distance", h.distance}});
    auto& diff = j["diff"] = nlohmann::ordered_json::array();
    for (const auto& g : report.diff)
        diff.push_back({{"id", g.id}, {"cumulative", g.cumulative}, {"min_distance", g.min_distance}});
    auto& buffer = j["buffer"] = nlohmann::ordered_json::array();
    for (const auto& r : report.buffer) {
        nlohmann::ordered_json rec{{"id", r.id}, {"tag", to_string(r.tag)}};
        if (r.hard_score) rec["hard_score"] = *r.hard_score;
        if (r.diff_score) rec["diff_score"] = *r.diff_score;
        buffer.push_back(std::move(rec));
    }
    return j;
}

SelectionReport selection_from_json(const nlohmann::json& j) {
    SelectionReport report;
    try {
        report.task = j.at("task").get<std::size_t>();
        report.delta = j.at("delta").get<double>();
        for (const auto& h : j.at("hard")) report.hard.push_back({h.at("id").get<std::size_t>(), h.at("distance").get<double>()});
        for (const auto& g : j.at("diff"))
            report.diff.push_back({g.at("id").get<std::size_t>(), g.at("cumulative").get<double>(),
                                   g.at("min_distance").get<double>()});
        for (const auto& r : j.at("buffer")) {
            BufferRecord rec;
            rec.id = r.at("id").get<std::size_t>();
            rec.tag = parse_tag(r.at("tag").get<std::string>());
            if (r.contains("hard_score")) rec.hard_score = r["hard_score"].get<double>();
            if (r.contains("diff_score")) rec.diff_score = r["diff_score"].get<double>();
            report.buffer.push_back(rec);
        }
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError(std::string("malformed selection report: ") + e.what());
    }
    return report;
}

}  // namespace longcl
