#include "longcl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "longcl/error.hpp"
#include "longcl/metrics.hpp"

namespace longcl {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// Reads fields of one JSON object and rejects keys nobody asked for.
bool is_count(const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); }

class Section {
public:
    Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) fail(path_, "must be an object");
    }

    [[noreturn]] static void fail(const std::string& field, const std::string& msg) {
        throw ConfigError(field + ": " + msg);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) {
        seen_.insert(key);
        return obj_.contains(key);
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return obj_.at(key);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const auto& v = obj_.at(key);
        if (!v.is_number()) fail(field(key), "must be a number");
        return v.get<double>();
    }

    double ratio(const std::string& key, double fallback, bool include_one = true) {
        const double v = number(key, fallback);
        const bool ok = include_one ? (v > 0.0 && v <= 1.0) : (v > 0.0 && v < 1.0);
        if (!ok) fail(field(key), include_one ? "must lie in (0, 1]" : "must lie in (0, 1)");
        return v;
    }

    std::uint64_t count(const std::string& key, std::uint64_t fallback, std::uint64_t min_value = 0) {
        if (!has(key)) return fallback;
        const auto& v = obj_.at(key);
        if (!is_count(v)) fail(field(key), "must be a non-negative integer");
        const auto n = v.get<std::uint64_t>();
        if (n < min_value) fail(field(key), "must be at least " + std::to_string(min_value));
        return n;
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = obj_.at(key);
        if (!v.is_boolean()) fail(field(key), "must be true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const auto& v = obj_.at(key);
        if (!v.is_string()) fail(field(key), "must be a string");
        return v.get<std::string>();
    }

    void finish() const {
        for (const auto& [key, _] : obj_.items())
            if (!seen_.contains(key)) fail(field(key), "unknown key");
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename Fn>
auto wrap(const std::string& field, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        if (msg.rfind(field, 0) == 0) throw;
        throw ConfigError(field + ": " + msg);
    }
}

StreamSource parse_stream(const json& doc, const std::filesystem::path& base_dir) {
    Section s(doc, "stream");
    const std::string kind = s.string("kind", "synthetic");
    StreamSource src;
    if (kind == "synthetic") {
        SyntheticSpec spec;
        const std::string family = s.string("family", to_string(spec.family));
        spec.family = wrap(s.field("family"), [&] { return parse_family(family); });
        spec.tasks = s.count("tasks", spec.tasks, 2);
        spec.train_per_task = s.count("train_per_task", spec.train_per_task, 1);
        spec.test_per_task = s.count("test_per_task", spec.test_per_task, 1);
        spec.features = s.count("features", spec.features, 1);
        spec.classes = s.count("classes", spec.classes, 2);
        spec.separation = s.number("separation", spec.separation);
        spec.noise = s.number("noise", spec.noise);
        if (spec.noise < 0.0) Section::fail(s.field("noise"), "must be non-negative");
        spec.rotation_step = s.number("rotation_step", spec.rotation_step);
        spec.drift_step = s.number("drift_step", spec.drift_step);
        spec.seed = s.count("seed", spec.seed);
        s.finish();
        src.synthetic = spec;
        src.spec = ojson{{"kind", "synthetic"},
                         {"family", to_string(spec.family)},
                         {"tasks", spec.tasks},
                         {"train_per_task", spec.train_per_task},
                         {"test_per_task", spec.test_per_task},
                         {"features", spec.features},
                         {"classes", spec.classes},
                         {"separation", spec.separation},
                         {"noise", spec.noise},
                         {"rotation_step", spec.rotation_step},
                         {"drift_step", spec.drift_step},
                         {"seed", spec.seed}};
    } else if (kind == "manifest") {
        const std::string path = s.string("path", "");
        if (path.empty()) Section::fail(s.field("path"), "required for a manifest stream");
        s.finish();
        std::filesystem::path p(path);
        src.manifest = p.is_absolute() ? p : base_dir / p;
        src.spec = ojson{{"kind", "manifest"}, {"path", std::filesystem::weakly_canonical(src.manifest).string()}};
    } else {
        Section::fail(s.field("kind"), "must be \"synthetic\" or \"manifest\"");
    }
    return src;
}

std::vector<ArmSpec> parse_arms(const json& doc) {
    std::vector<ArmSpec> arms;
    if (doc.is_string()) {
        arms.push_back({doc.get<std::string>(), wrap("arms", [&] { return parse_method(doc.get<std::string>()); }), {}});
        return arms;
    }
    if (!doc.is_array() || doc.empty()) Section::fail("arms", "must be a method name or a non-empty array");
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string field = "arms[" + std::to_string(i) + "]";
        const auto& item = doc[i];
        ArmSpec arm;
        if (item.is_string()) {
            arm.name = item.get<std::string>();
            arm.method = wrap(field, [&] { return parse_method(arm.name); });
        } else {
            Section s(item, field);
            const std::string method = s.string("method", "");
            arm.method = wrap(s.field("method"), [&] { return parse_method(method); });
            arm.name = s.string("name", method);
            if (s.has("fixed_alpha")) {
                const double a = s.number("fixed_alpha", 0.0);
                if (!(a >= 0.0 && a <= 1.0)) Section::fail(s.field("fixed_alpha"), "must lie in [0, 1]");
                if (arm.method != Method::long_cl && arm.method != Method::memman_only)
                    Section::fail(s.field("fixed_alpha"), "only applies to arms that fuse parameters");
                arm.fixed_alpha = a;
            }
            s.finish();
        }
        if (arm.name.empty() || arm.name.find_first_of("/\\") != std::string::npos)
            Section::fail(field, "arm name must be a non-empty path component");
        for (const auto& other : arms)
            if (other.name == arm.name) Section::fail(field, "duplicate arm name '" + arm.name + "'");
        arms.push_back(std::move(arm));
    }
    return arms;
}

std::vector<OrderSpec> parse_orders(const json& doc) {
    if (!doc.is_array() || doc.empty()) Section::fail("orders", "must be a non-empty array");
    std::vector<OrderSpec> orders;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string field = "orders[" + std::to_string(i) + "]";
        const auto& item = doc[i];
        OrderSpec o;
        if (item.is_string()) {
            if (item.get<std::string>() != "identity") Section::fail(field, "string orders must be \"identity\"");
        } else if (item.is_array()) {
            o.kind = OrderSpec::Kind::explicit_permutation;
            for (const auto& v : item) {
                if (!is_count(v)) Section::fail(field, "permutation entries must be non-negative integers");
                o.permutation.push_back(v.get<std::size_t>());
            }
            wrap(field, [&] { return inverse_permutation(o.permutation); });
        } else {
            Section s(item, field);
            if (!s.has("shuffle")) Section::fail(field, "expected {\"shuffle\": seed}");
            o.kind = OrderSpec::Kind::shuffle;
            o.seed = s.count("shuffle", 0);
            s.finish();
        }
        for (const auto& other : orders)
            if (other.name() == o.name()) Section::fail(field, "duplicate order '" + o.name() + "'");
        orders.push_back(std::move(o));
    }
    return orders;
}

std::string pad3(std::size_t t) {
    std::ostringstream s;
    s << std::setw(3) << std::setfill('0') << t;
    return s.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

ojson run_config_json(const RunConfig& run) {
    return ojson{{"train",
                  {{"epochs", run.train.epochs},
                   {"batch_size", run.train.batch_size},
                   {"learning_rate", run.train.learning_rate},
                   {"optimizer", to_string(run.train.optimizer)},
                   {"momentum", run.train.momentum}}},
                 {"model", {{"rank", run.rank}, {"init_scale", run.init_scale}}},
                 {"memman",
                  {{"k_fraction", run.memman.k_fraction},
                   {"lambda_floor", run.memman.lambda_floor},
                   {"granularity", to_string(run.partition.granularity)},
                   {"row_width", run.partition.row_width}}},
                 {"memcon",
                  {{"r_h", run.memcon.r_h},
                   {"r_g", run.memcon.r_g},
                   {"delta_rule", run.memcon.delta_rule},
                   {"encoder", run.encoder == EncoderKind::identity ? "identity" : "random-projection"},
                   {"embedding_dim", run.embedding_dim},
                   {"encoder_seed", run.encoder_seed}}},
                 {"evaluate_all", run.evaluate_all}};
}

}  // namespace

std::string OrderSpec::name() const {
    switch (kind) {
        case Kind::identity: return "identity";
        case Kind::shuffle: return "shuffle" + std::to_string(seed);
        case Kind::explicit_permutation: {
            std::string s = "perm";
            for (auto p : permutation) s += "-" + std::to_string(p);
            return s;
        }
    }
    return "identity";
}

ExperimentConfig parse_experiment_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    Section root(doc, "");
    ExperimentConfig cfg;

    if (!root.has("stream")) Section::fail("stream", "required");
    cfg.stream = parse_stream(root.raw("stream"), base_dir);

    if (root.has("arms")) {
        cfg.arms = parse_arms(root.raw("arms"));
    } else {
        cfg.arms = {ArmSpec{"long-cl", Method::long_cl, {}}};
    }

    if (root.has("train")) {
        Section s(root.raw("train"), "train");
        auto& t = cfg.run.train;
        t.epochs = s.count("epochs", t.epochs);
        t.batch_size = s.count("batch_size", t.batch_size, 1);
        t.learning_rate = s.number("learning_rate", t.learning_rate);
        if (!(t.learning_rate > 0.0)) Section::fail(s.field("learning_rate"), "must be positive");
        const std::string opt = s.string("optimizer", to_string(t.optimizer));
        t.optimizer = wrap(s.field("optimizer"), [&] { return parse_optimizer(opt); });
        t.momentum = s.number("momentum", t.momentum);
        if (!(t.momentum >= 0.0 && t.momentum < 1.0)) Section::fail(s.field("momentum"), "must lie in [0, 1)");
        s.finish();
    }

    if (root.has("model")) {
        Section s(root.raw("model"), "model");
        cfg.run.rank = s.count("rank", cfg.run.rank, 1);
        cfg.run.init_scale = s.number("init_scale", cfg.run.init_scale);
        if (!(cfg.run.init_scale >= 0.0)) Section::fail(s.field("init_scale"), "must be non-negative");
        s.finish();
    }

    if (root.has("memman")) {
        Section s(root.raw("memman"), "memman");
        cfg.run.memman.k_fraction = s.ratio("k_fraction", cfg.run.memman.k_fraction);
        cfg.run.memman.lambda_floor = s.ratio("lambda_floor", cfg.run.memman.lambda_floor, false);
        const std::string gran = s.string("granularity", to_string(cfg.run.partition.granularity));
        cfg.run.partition.granularity = wrap(s.field("granularity"), [&] { return parse_granularity(gran); });
        cfg.run.partition.row_width = s.count("row_width", cfg.run.partition.row_width);
        s.finish();
    }

    if (root.has("memcon")) {
        Section s(root.raw("memcon"), "memcon");
        cfg.run.memcon.r_h = s.ratio("r_h", cfg.run.memcon.r_h);
        cfg.run.memcon.r_g = s.ratio("r_g", cfg.run.memcon.r_g);
        cfg.run.memcon.delta_rule = s.boolean("delta_rule", cfg.run.memcon.delta_rule);
        const std::string enc = s.string("encoder", "random-projection");
        if (enc == "identity") {
            cfg.run.encoder = EncoderKind::identity;
        } else if (enc == "random-projection") {
            cfg.run.encoder = EncoderKind::random_projection;
        } else {
            Section::fail(s.field("encoder"), "must be \"identity\" or \"random-projection\"");
        }
        cfg.run.embedding_dim = s.count("embedding_dim", cfg.run.embedding_dim, 1);
        cfg.run.encoder_seed = s.count("encoder_seed", cfg.run.encoder_seed);
        s.finish();
    }

    if (root.has("seeds")) {
        const auto& seeds = root.raw("seeds");
        if (!seeds.is_array() || seeds.empty()) Section::fail("seeds", "must be a non-empty array");
        cfg.seeds.clear();
        for (const auto& v : seeds) {
            if (!is_count(v)) Section::fail("seeds", "entries must be non-negative integers");
            const auto seed = v.get<std::uint64_t>();
            if (std::find(cfg.seeds.begin(), cfg.seeds.end(), seed) != cfg.seeds.end())
                Section::fail("seeds", "duplicate seed " + std::to_string(seed));
            cfg.seeds.push_back(seed);
        }
    }

    if (root.has("orders")) cfg.orders = parse_orders(root.raw("orders"));
    cfg.run.evaluate_all = root.boolean("evaluate_all", cfg.run.evaluate_all);
    cfg.checkpoints = root.boolean("checkpoints", cfg.checkpoints);
    if (root.has("output_dir")) {
        const std::string out = root.string("output_dir", "");
        if (out.empty()) Section::fail("output_dir", "must be a non-empty path");
        std::filesystem::path p(out);
        cfg.output_dir = p.is_absolute() ? p : base_dir / p;
    } else {
        cfg.output_dir = base_dir / "out";
    }
    root.finish();

    if (cfg.stream.synthetic) {
        for (const auto& o : cfg.orders)
            if (o.kind == OrderSpec::Kind::explicit_permutation && o.permutation.size() != cfg.stream.synthetic->tasks)
                Section::fail("orders", "permutation '" + o.name() + "' does not match the task count");
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    return parse_experiment_config(doc, path.parent_path());
}

TaskStream materialize_stream(const StreamSource& source) {
    if (source.synthetic) return gen_synthetic_stream(*source.synthetic);
    return load_jsonl_stream(source.manifest);
}

std::vector<CellResult> run_experiment(const ExperimentConfig& config) {
    const TaskStream base = materialize_stream(config.stream);
    if (base.size() < 2) throw PreconditionError("a continual-learning run needs at least 2 tasks");
    std::vector<CellResult> cells;

    for (const auto& arm : config.arms) {
        for (const auto& order : config.orders) {
            TaskStream stream = base;
            if (order.kind == OrderSpec::Kind::shuffle) stream = permute_order(base, order.seed);
            if (order.kind == OrderSpec::Kind::explicit_permutation) stream = permute_order(base, order.permutation);

            for (const auto seed : config.seeds) {
                const auto dir = config.output_dir / arm.name / order.name() / std::to_string(seed);
                std::filesystem::create_directories(dir);

                RunConfig run = config.run;
                run.memman.fixed_alpha = arm.fixed_alpha;

                std::ostringstream log;
                log << ojson{{"event", "run_start"},
                             {"arm", arm.name},
                             {"method", to_string(arm.method)},
                             {"order", order.name()},
                             {"seed", seed},
                             {"tasks", stream.size()}}
                           .dump()
                    << '\n';

                auto observer = [&](const TaskTrace& tr) {
                    log << ojson{{"event", "task_start"}, {"t", tr.t}, {"task_id", tr.task_id}}.dump() << '\n';
                    ojson end{{"event", "task_end"}, {"t", tr.t}, {"task_id", tr.task_id}};
                    end["alpha"] = tr.alpha ? ojson(*tr.alpha) : ojson(nullptr);
                    end["selected_units"] = tr.selected_units.size();
                    end["mask_popcount"] = tr.mask.popcount();
                    if (tr.selection) {
                        end["hard"] = tr.selection->hard.size();
                        end["diff"] = tr.selection->diff.size();
                        end["delta"] = tr.selection->delta;
                    }
                    end["replay_added"] = tr.replay_ids.size();
                    end["replay_pool"] = tr.replay_pool_size;
                    end["accuracy"] = tr.accuracy_row;
                    log << end.dump() << '\n';

                    const std::string suffix = pad3(tr.t);
                    if (tr.mask.size() > 0 && !tr.selected_units.empty())
                        write_text(dir / ("mask_t" + suffix + ".txt"), tr.mask.to_bitstring() + "\n");
                    if (tr.selection)
                        write_text(dir / ("selection_t" + suffix + ".json"), to_json(*tr.selection).dump(2) + "\n");
                    if (config.checkpoints) write_snapshot(dir / ("ckpt_t" + suffix + ".pv"), tr.theta);
                };

                const RunResult result = run_stream(stream, arm.method, run, seed, observer);
                const double ap = compute_ap(result.perf);
                const double af = compute_af(result.perf);
                log << ojson{{"event", "run_end"}, {"AP", ap}, {"AF", af}}.dump() << '\n';

                export_matrix(result.perf, dir / "perf.csv");
                write_text(dir / "summary.json", summary_json(result.perf));
                write_text(dir / "run.log", log.str());

                ojson cell{{"arm", arm.name},
                           {"method", to_string(arm.method)},
                           {"order", order.name()},
                           {"task_order", stream.order},
                           {"seed", seed},
                           {"stream", config.stream.spec},
                           {"config", run_config_json(run)}};
                cell["fixed_alpha"] = arm.fixed_alpha ? ojson(*arm.fixed_alpha) : ojson(nullptr);
                write_text(dir / "cell.json", cell.dump(2) + "\n");

                cells.push_back({arm.name, order.name(), seed, dir, ap, af});
            }
        }
    }
    return cells;
}

namespace {

struct CellSummary {
    std::string arm;
    std::string order;
    json stream;
    double ap = 0.0;
    double af = 0.0;
};

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw IngestionError(path.string() + ": malformed JSON: " + e.what());
    }
}

void collect_cells(const std::filesystem::path& dir, std::vector<CellSummary>& out) {
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> found;
    if (std::filesystem::exists(dir / "summary.json")) found.push_back(dir);
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "summary.json") &&
            std::filesystem::exists(entry.path() / "cell.json"))
            found.push_back(entry.path());
    }
    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end()), found.end());
    for (const auto& cell_dir : found) {
        const auto cell = read_json(cell_dir / "cell.json");
        // perf.csv is authoritative; summary.json must agree with it.
        const auto perf = read_matrix(cell_dir / "perf.csv");
        CellSummary s;
        try {
            s.arm = cell.at("arm").get<std::string>();
            s.order = cell.at("order").get<std::string>();
            s.stream = cell.at("stream");
        } catch (const json::exception& e) {
            throw IngestionError((cell_dir / "cell.json").string() + ": " + e.what());
        }
        s.ap = compute_ap(perf);
        s.af = compute_af(perf);
        out.push_back(std::move(s));
    }
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

ComparisonTable compare_runs(const std::vector<std::filesystem::path>& dirs, bool by_order) {
    if (dirs.empty()) throw PreconditionError("compare needs at least one run directory");
    std::vector<CellSummary> cells;
    for (const auto& d : dirs) collect_cells(d, cells);
    if (cells.empty()) throw IngestionError("no run cells found");
    for (const auto& c : cells)
        if (c.stream != cells.front().stream) throw PreconditionError("runs were produced from different streams");

    std::vector<std::pair<std::string, std::string>> keys;
    std::map<std::pair<std::string, std::string>, std::vector<const CellSummary*>> groups;
    for (const auto& c : cells) {
        auto key = std::make_pair(c.arm, by_order ? c.order : std::string{});
        if (!groups.contains(key)) keys.push_back(key);
        groups[key].push_back(&c);
    }

    ComparisonTable table;
    for (const auto& key : keys) {
        const auto& members = groups[key];
        std::vector<double> aps, afs;
        for (const auto* c : members) {
            aps.push_back(c->ap);
            afs.push_back(c->af);
        }
        ComparisonRow row;
        row.arm = key.first;
        row.order = key.second;
        row.runs = members.size();
        std::tie(row.ap_mean, row.ap_std) = mean_std(aps);
        std::tie(row.af_mean, row.af_std) = mean_std(afs);
        const auto [lo, hi] = std::minmax_element(afs.begin(), afs.end());
        row.af_spread = *hi - *lo;
        table.rows.push_back(row);
    }
    return table;
}

std::string ComparisonTable::to_csv() const {
    std::ostringstream out;
    out << "arm,order,runs,AP_mean,AP_std,AF_mean,AF_std,AF_spread\n";
    for (const auto& r : rows) {
        out << r.arm << ',' << r.order << ',' << r.runs << ',' << format_double(r.ap_mean) << ','
            << format_double(r.ap_std) << ',' << format_double(r.af_mean) << ',' << format_double(r.af_std) << ','
            << format_double(r.af_spread) << '\n';
    }
    return out.str();
}

std::string ComparisonTable::to_text() const {
    std::size_t arm_w = 3, order_w = 5;
    for (const auto& r : rows) {
        arm_w = std::max(arm_w, r.arm.size());
        order_w = std::max(order_w, r.order.size());
    }
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(arm_w)) << "arm" << "  " << std::setw(static_cast<int>(order_w))
        << "order" << "  " << std::right << std::setw(4) << "runs" << "  " << std::setw(16) << "AP (%)" << "  "
        << std::setw(16) << "AF (%)" << '\n';
    for (const auto& r : rows) {
        std::ostringstream ap, af;
        ap << std::fixed << std::setprecision(2) << 100.0 * r.ap_mean << " +- " << 100.0 * r.ap_std;
        af << std::fixed << std::setprecision(2) << 100.0 * r.af_mean << " +- " << 100.0 * r.af_std;
        out << std::left << std::setw(static_cast<int>(arm_w)) << r.arm << "  " << std::setw(static_cast<int>(order_w))
            << r.order << "  " << std::right << std::setw(4) << r.runs << "  " << std::setw(16) << ap.str() << "  "
            << std::setw(16) << af.str() << '\n';
    }
    return out.str();
}

}  // namespace longcl
