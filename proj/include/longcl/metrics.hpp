#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace longcl {

// m(j, k): accuracy on task k after training through task j, both zero-based
// here. Cells with k > j are zero-shot and only filled when requested.
class PerfMatrix {
public:
    PerfMatrix() = default;
    explicit PerfMatrix(std::size_t tasks) : tasks_(tasks), cells_(tasks * tasks) {}

    std::size_t tasks() const noexcept { return tasks_; }
    void set(std::size_t after_task, std::size_t task, double accuracy);
    std::optional<double> get(std::size_t after_task, std::size_t task) const;
    double at(std::size_t after_task, std::size_t task) const;

    // Rows that hold at least one defined cell, counted from the top.
    std::size_t completed_rows() const noexcept;

    friend bool operator==(const PerfMatrix&, const PerfMatrix&) = default;

private:
    std::size_t tasks_ = 0;
    std::vector<std::optional<double>> cells_;
};

// Mean of the final row.
double compute_ap(const PerfMatrix& m);

// Mean over i < M of m(i, i) - m(M, i). Negative means backward transfer.
double compute_af(const PerfMatrix& m);

// CSV: header `after_task,task_1,...,task_M`, one row per completed step,
// undefined cells empty. Values use the shortest round-trip representation.
std::string matrix_to_csv(const PerfMatrix& m);
PerfMatrix matrix_from_csv(const std::string& csv);

void export_matrix(const PerfMatrix& m, const std::filesystem::path& path);
PerfMatrix read_matrix(const std::filesystem::path& path);

// `{"AP": float, "AF": float, "M": int}`
std::string summary_json(const PerfMatrix& m);

std::string format_double(double v);

}  // namespace longcl
