#include "longcl/metrics.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "longcl/error.hpp"

namespace longcl {

void PerfMatrix::set(std::size_t after_task, std::size_t task, double accuracy) {
    if (after_task >= tasks_ || task >= tasks_) throw ShapeError("performance cell outside the matrix");
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw PreconditionError("accuracy must lie in [0, 1]");
    cells_[after_task * tasks_ + task] = accuracy;
}

std::optional<double> PerfMatrix::get(std::size_t after_task, std::size_t task) const {
    if (after_task >= tasks_ || task >= tasks_) throw ShapeError("performance cell outside the matrix");
    return cells_[after_task * tasks_ + task];
}

double PerfMatrix::at(std::size_t after_task, std::size_t task) const {
    auto v = get(after_task, task);
    if (!v) {
        throw PreconditionError("performance cell (" + std::to_string(after_task + 1) + ", " +
                                std::to_string(task + 1) + ") is undefined");
    }
    return *v;
}

std::size_t PerfMatrix::completed_rows() const noexcept {
    std::size_t rows = 0;
    for (std::size_t j = 0; j < tasks_; ++j) {
        bool any = false;
        for (std::size_t k = 0; k < tasks_; ++k) any = any || cells_[j * tasks_ + k].has_value();
        if (!any) break;
        rows = j + 1;
    }
    return rows;
}

double compute_ap(const PerfMatrix& m) {
    const std::size_t M = m.tasks();
    if (M == 0) throw PreconditionError("AP of an empty matrix");
    double sum = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        auto v = m.get(M - 1, i);
        if (!v) throw PreconditionError("AP needs a complete final row");
        sum += *v;
    }
    return sum / static_cast<double>(M);
}

double compute_af(const PerfMatrix& m) {
    const std::size_t M = m.tasks();
    if (M < 2) throw PreconditionError("AF is undefined for fewer than two tasks");
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < M; ++i) {
        auto diag = m.get(i, i);
        auto last = m.get(M - 1, i);
        if (!diag || !last) throw PreconditionError("AF needs the diagonal and the final row");
        sum += *diag - *last;
    }
    return sum / static_cast<double>(M - 1);
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw IoError("cannot format value");
    return std::string(buf, ptr);
}

std::string matrix_to_csv(const PerfMatrix& m) {
    std::ostringstream out;
    out << "after_task";
    for (std::size_t k = 0; k < m.tasks(); ++k) out << ",task_" << (k + 1);
    out << '\n';
    for (std::size_t j = 0; j < m.completed_rows(); ++j) {
        out << (j + 1);
        for (std::size_t k = 0; k < m.tasks(); ++k) {
            out << ',';
            if (auto v = m.get(j, k)) out << format_double(*v);
        }
        out << '\n';
    }
    return out.str();
}

PerfMatrix matrix_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw IngestionError("performance CSV: missing header");
    std::vector<std::string> header;
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) header.push_back(cell);
    }
    if (header.empty() || header[0] != "after_task") throw IngestionError("performance CSV: bad header");
    const std::size_t M = header.size() - 1;
    for (std::size_t k = 0; k < M; ++k)
        if (header[k + 1] != "task_" + std::to_string(k + 1)) throw IngestionError("performance CSV: bad header");

    PerfMatrix m(M);
    std::size_t lineno = 1;
    std::size_t expected_row = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            auto pos = line.find(',', start);
            cells.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        const std::string where = "performance CSV line " + std::to_string(lineno) + ": ";
        if (cells.size() != M + 1) throw IngestionError(where + "wrong number of cells");
        if (cells[0] != std::to_string(expected_row) || expected_row > M)
            throw IngestionError(where + "unexpected after_task value");
        for (std::size_t k = 0; k < M; ++k) {
            const auto& c = cells[k + 1];
            if (c.empty()) continue;
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
            if (ec != std::errc() || ptr != c.data() + c.size()) throw IngestionError(where + "bad number '" + c + "'");
            m.set(expected_row - 1, k, v);
        }
        ++expected_row;
    }
    return m;
}

void export_matrix(const PerfMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << matrix_to_csv(m);
    if (!out) throw IoError("failed writing " + path.string());
}

PerfMatrix read_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return matrix_from_csv(ss.str());
}

std::string summary_json(const PerfMatrix& m) {
    nlohmann::ordered_json j;
    j["AP"] = compute_ap(m);
    j["AF"] = compute_af(m);
    j["M"] = m.tasks();
    return j.dump() + "\n";
}

}  // namespace longcl
