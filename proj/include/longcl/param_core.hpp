#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace longcl {

// A named contiguous range of a parameter vector. `row_width` is the length of
// one matrix row inside the segment (equal to `length` for unstructured data).
struct Segment {
    std::string label;
    std::size_t offset = 0;
    std::size_t length = 0;
    std::size_t row_width = 0;

    friend bool operator==(const Segment&, const Segment&) = default;
};

// Flat parameter state of a trainable model. All memory-management arithmetic
// runs on these 64-bit values.
class ParamVector {
public:
    ParamVector() = default;

    // Single segment labelled "params" with row width equal to its length.
    explicit ParamVector(std::vector<double> values);

    // Segments must be sorted, contiguous and cover every value.
    ParamVector(std::vector<double> values, std::vector<Segment> segments);

    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> mutable_values() noexcept { return values_; }
    const std::vector<Segment>& segments() const noexcept { return segments_; }

    const Segment& segment(const std::string& label) const;

    // Same values on the same layout.
    ParamVector with_values(std::vector<double> values) const;

    bool combinable(const ParamVector& other) const noexcept;
    void require_combinable(const ParamVector& other) const;

    bool all_finite() const noexcept;

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

private:
    std::vector<double> values_;
    std::vector<Segment> segments_;
};

enum class Granularity { scalar, row, segment };

struct PartitionSpec {
    Granularity granularity = Granularity::row;
    // Row width for Granularity::row. Zero selects each segment's own row width.
    std::size_t row_width = 0;

    static PartitionSpec scalar() { return {Granularity::scalar, 0}; }
    static PartitionSpec row(std::size_t width = 0) { return {Granularity::row, width}; }
    static PartitionSpec segment() { return {Granularity::segment, 0}; }
};

struct UnitRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const UnitRange&, const UnitRange&) = default;
};

// Disjoint, sorted memory units covering [0, total_length).
class UnitPartition {
public:
    UnitPartition(std::vector<UnitRange> units, Granularity granularity);

    std::size_t size() const noexcept { return units_.size(); }
    std::size_t total_length() const noexcept { return units_.empty() ? 0 : units_.back().end; }
    const std::vector<UnitRange>& units() const noexcept { return units_; }
    const UnitRange& operator[](std::size_t i) const { return units_[i]; }
    Granularity granularity() const noexcept { return granularity_; }

private:
    std::vector<UnitRange> units_;
    Granularity granularity_;
};

struct DriftScores {
    std::vector<double> per_unit;

    std::size_t size() const noexcept { return per_unit.size(); }
};

UnitPartition make_partition(std::size_t param_len, const PartitionSpec& spec);
UnitPartition make_partition(const ParamVector& layout, const PartitionSpec& spec);

// Euclidean norm of (prev - curr) restricted to each unit.
DriftScores compute_drift(const ParamVector& prev, const ParamVector& curr, const UnitPartition& part);

// Snapshot file: header line `LONGCL-PV v1 <len>`, a segment-table line, then
// `len` little-endian IEEE-754 doubles.
void write_snapshot(const std::filesystem::path& path, const ParamVector& params);
ParamVector read_snapshot(const std::filesystem::path& path);

std::string to_string(Granularity g);
Granularity parse_granularity(const std::string& name);

}  // namespace longcl
