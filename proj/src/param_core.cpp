#include "longcl/param_core.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "longcl/error.hpp"

namespace longcl {

namespace {

void validate_segments(const std::vector<Segment>& segments, std::size_t len) {
    std::size_t cursor = 0;
    for (const auto& seg : segments) {
        if (seg.label.empty()) throw ShapeError("segment label must not be empty");
        if (seg.offset != cursor)
            throw ShapeError("segment '" + seg.label + "' is not contiguous with its predecessor");
        if (seg.length == 0) throw ShapeError("segment '" + seg.label + "' is empty");
        if (seg.row_width == 0 || seg.length % seg.row_width != 0)
            throw ShapeError("segment '" + seg.label + "' row width does not divide its length");
        cursor += seg.length;
    }
    if (cursor != len) throw ShapeError("segment table does not cover the parameter vector");
}

void append_rows(std::vector<UnitRange>& out, std::size_t offset, std::size_t length, std::size_t width,
                 const std::string& label) {
    if (width == 0 || length % width != 0) {
        throw ConfigError("row width " + std::to_string(width) + " does not divide length " +
                          std::to_string(length) + " of segment '" + label + "'");
    }
    for (std::size_t b = offset; b < offset + length; b += width) out.push_back({b, b + width});
}

}  // namespace

ParamVector::ParamVector(std::vector<double> values) : values_(std::move(values)) {
    if (!values_.empty()) segments_.push_back({"params", 0, values_.size(), values_.size()});
}

ParamVector::ParamVector(std::vector<double> values, std::vector<Segment> segments)
    : values_(std::move(values)), segments_(std::move(segments)) {
    validate_segments(segments_, values_.size());
}

const Segment& ParamVector::segment(const std::string& label) const {
    for (const auto& seg : segments_)
        if (seg.label == label) return seg;
    throw ShapeError("no segment labelled '" + label + "'");
}

ParamVector ParamVector::with_values(std::vector<double> values) const {
    if (values.size() != values_.size()) throw ShapeError("with_values: length mismatch");
    ParamVector out;
    out.values_ = std::move(values);
    out.segments_ = segments_;
    return out;
}

bool ParamVector::combinable(const ParamVector& other) const noexcept {
    return values_.size() == other.values_.size() && segments_ == other.segments_;
}

void ParamVector::require_combinable(const ParamVector& other) const {
    if (values_.size() != other.values_.size()) {
        throw ShapeError("parameter length mismatch: " + std::to_string(values_.size()) + " vs " +
                         std::to_string(other.values_.size()));
    }
    if (segments_ != other.segments_) throw ShapeError("parameter segment tables differ");
}

bool ParamVector::all_finite() const noexcept {
    for (double v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

UnitPartition::UnitPartition(std::vector<UnitRange> units, Granularity granularity)
    : units_(std::move(units)), granularity_(granularity) {
    if (units_.empty()) throw ShapeError("a partition needs at least one unit");
    std::size_t cursor = 0;
    for (const auto& u : units_) {
        if (u.begin != cursor || u.end <= u.begin) throw ShapeError("units must be sorted, disjoint and cover the index set");
        cursor = u.end;
    }
}

UnitPartition make_partition(std::size_t param_len, const PartitionSpec& spec) {
    if (param_len == 0) throw ConfigError("cannot partition an empty parameter vector");
    std::vector<double> zeros(param_len, 0.0);
    return make_partition(ParamVector(std::move(zeros)), spec);
}

UnitPartition make_partition(const ParamVector& layout, const PartitionSpec& spec) {
    if (layout.size() == 0) throw ConfigError("cannot partition an empty parameter vector");
    std::vector<UnitRange> units;
    switch (spec.granularity) {
        case Granularity::scalar:
            units.reserve(layout.size());
            for (std::size_t i = 0; i < layout.size(); ++i) units.push_back({i, i + 1});
            break;
        case Granularity::row:
            for (const auto& seg : layout.segments()) {
                const std::size_t width = spec.row_width == 0 ? seg.row_width : spec.row_width;
                append_rows(units, seg.offset, seg.length, width, seg.label);
            }
            break;
        case Granularity::segment:
            for (const auto& seg : layout.segments()) units.push_back({seg.offset, seg.offset + seg.length});
            break;
    }
    return UnitPartition(std::move(units), spec.granularity);
}

DriftScores compute_drift(const ParamVector& prev, const ParamVector& curr, const UnitPartition& part) {
    prev.require_combinable(curr);
    if (part.total_length() != prev.size()) throw ShapeError("partition does not cover the parameter vector");
    const auto a = prev.values();
    const auto b = curr.values();
    DriftScores drift;
    drift.per_unit.reserve(part.size());
    for (const auto& unit : part.units()) {
        double sq = 0.0;
        for (std::size_t i = unit.begin; i < unit.end; ++i) {
            const double d = a[i] - b[i];
            sq += d * d;
        }
        drift.per_unit.push_back(std::sqrt(sq));
    }
    return drift;
}

void write_snapshot(const std::filesystem::path& path, const ParamVector& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open snapshot for writing: " + path.string());
    out << "LONGCL-PV v1 " << params.size() << '\n';
    out << "segments " << params.segments().size();
    for (const auto& seg : params.segments()) {
        if (seg.label.find_first_of(" \t\n:") != std::string::npos)
            throw IoError("segment label not representable in snapshot: '" + seg.label + "'");
        out << ' ' << seg.label << ':' << seg.offset << ':' << seg.length << ':' << seg.row_width;
    }
    out << '\n';
    for (double v : params.values()) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        unsigned char bytes[8];
        for (int k = 0; k < 8; ++k) bytes[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xffu);
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
    if (!out) throw IoError("failed writing snapshot: " + path.string());
}

ParamVector read_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open snapshot: " + path.string());

    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string magic, version;
    std::size_t len = 0;
    if (!(hs >> magic >> version >> len) || magic != "LONGCL-PV" || version != "v1")
        throw IngestionError(path.string() + ":1: bad snapshot header");

    std::string table;
    std::getline(in, table);
    std::istringstream ts(table);
    std::string keyword;
    std::size_t count = 0;
    if (!(ts >> keyword >> count) || keyword != "segments")
        throw IngestionError(path.string() + ":2: bad segment table");
    std::vector<Segment> segments;
    for (std::size_t s = 0; s < count; ++s) {
        std::string token;
        if (!(ts >> token)) throw IngestionError(path.string() + ":2: truncated segment table");
        Segment seg;
        std::istringstream fs(token);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(fs, field, ':')) fields.push_back(field);
        if (fields.size() != 4) throw IngestionError(path.string() + ":2: malformed segment '" + token + "'");
        try {
            seg.label = fields[0];
            seg.offset = std::stoull(fields[1]);
            seg.length = std::stoull(fields[2]);
            seg.row_width = std::stoull(fields[3]);
        } catch (const std::exception&) {
            throw IngestionError(path.string() + ":2: malformed segment '" + token + "'");
        }
        segments.push_back(std::move(seg));
    }

    std::vector<double> values(len);
    for (std::size_t i = 0; i < len; ++i) {
        unsigned char bytes[8];
        if (!in.read(reinterpret_cast<char*>(bytes), 8))
            throw IngestionError(path.string() + ": truncated payload");
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
        values[i] = std::bit_cast<double>(bits);
    }
    try {
        return ParamVector(std::move(values), std::move(segments));
    } catch (const ShapeError& e) {
        throw IngestionError(path.string() + ": " + e.what());
    }
}

std::string to_string(Granularity g) {
    switch (g) {
        case Granularity::scalar: return "scalar";
        case Granularity::row: return "row";
        case Granularity::segment: return "segment";
    }
    return "row";
}

Granularity parse_granularity(const std::string& name) {
    if (name == "scalar") return Granularity::scalar;
    if (name == "row") return Granularity::row;
    if (name == "segment") return Granularity::segment;
    throw ConfigError("unknown granularity '" + name + "'");
}

}  // namespace longcl
