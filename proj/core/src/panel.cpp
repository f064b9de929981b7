#include "mosumfm/panel.hpp"

#include <cassert>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mosumfm {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

double parse_cell(const std::string& raw, std::size_t row, std::size_t col) {
    const std::string cell = trim(raw);
    double value = 0.0;
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    const auto result = std::from_chars(first, last, value);
    if (result.ec != std::errc{} || result.ptr != last || cell.empty()) {
        throw ValidationError("non-numeric cell '" + cell + "' at data row " +
                              std::to_string(row + 1) + ", column " + std::to_string(col + 1));
    }
    if (!std::isfinite(value)) {
        throw ValidationError("non-finite value '" + cell + "' at data row " +
                              std::to_string(row + 1) + ", column " + std::to_string(col + 1));
    }
    return value;
}

void check_finite(const Eigen::MatrixXd& values) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            if (!std::isfinite(values(i, j))) {
                throw ValidationError("non-finite entry at series " + std::to_string(i) +
                                      ", time " + std::to_string(j));
            }
        }
    }
}

std::vector<std::string> default_labels(const char* prefix, Eigen::Index n) {
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) labels.push_back(prefix + std::to_string(i));
    return labels;
}

}  // namespace

Panel make_panel(Eigen::MatrixXd values, std::vector<std::string> series_labels,
                 std::vector<std::string> time_labels, bool demean) {
    if (values.rows() < 1 || values.cols() < 2) {
        throw ValidationError("panel requires N >= 1 and T >= 2, got " +
                              std::to_string(values.rows()) + " x " +
                              std::to_string(values.cols()));
    }
    check_finite(values);
    if (series_labels.empty()) series_labels = default_labels("s", values.rows());
    if (time_labels.empty()) time_labels = default_labels("t", values.cols());
    if (static_cast<Eigen::Index>(series_labels.size()) != values.rows() ||
        static_cast<Eigen::Index>(time_labels.size()) != values.cols()) {
        throw ValidationError("label counts do not match the value matrix");
    }
    Panel panel{std::move(values), std::move(series_labels), std::move(time_labels), false};
    if (demean) demean_rows(panel);
    return panel;
}

void demean_rows(Panel& panel) {
    panel.values.colwise() -= panel.values.rowwise().mean();
    panel.demeaned = true;
}

Panel load_panel(const std::string& path, Layout layout, bool demean) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open panel file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty panel file: " + path);
    auto header = split_csv_line(line);
    if (header.size() < 2) throw ValidationError("header must have a label column and data: " + path);
    std::vector<std::string> col_labels(header.begin() + 1, header.end());
    for (auto& label : col_labels) label = trim(label);

    std::vector<std::string> row_labels;
    std::vector<std::vector<double>> rows;
    std::size_t row_index = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw ValidationError("ragged row " + std::to_string(row_index + 1) + ": expected " +
                                  std::to_string(header.size()) + " cells, got " +
                                  std::to_string(cells.size()));
        }
        row_labels.push_back(trim(cells[0]));
        std::vector<double> row(cells.size() - 1);
        for (std::size_t j = 1; j < cells.size(); ++j) {
            row[j - 1] = parse_cell(cells[j], row_index, j);
        }
        rows.push_back(std::move(row));
        ++row_index;
    }
    if (rows.empty()) throw ValidationError("no data rows in " + path);

    Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }

    if (layout == Layout::SeriesInColumns) {
        values.transposeInPlace();
        std::swap(row_labels, col_labels);
    }
    return make_panel(std::move(values), std::move(row_labels), std::move(col_labels), demean);
}

void save_panel_csv(const Panel& panel, const std::string& path, Layout layout) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open output file: " + path);
    out.precision(17);
    const bool rows_are_series = layout == Layout::SeriesInRows;
    const auto& row_labels = rows_are_series ? panel.series_labels : panel.time_labels;
    const auto& col_labels = rows_are_series ? panel.time_labels : panel.series_labels;

    out << "label";
    for (const auto& label : col_labels) out << ',' << label;
    out << '\n';
    const Eigen::Index n_rows = static_cast<Eigen::Index>(row_labels.size());
    const Eigen::Index n_cols = static_cast<Eigen::Index>(col_labels.size());
    for (Eigen::Index i = 0; i < n_rows; ++i) {
        out << row_labels[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n_cols; ++j) {
            out << ',' << (rows_are_series ? panel.values(i, j) : panel.values(j, i));
        }
        out << '\n';
    }
}

std::string Panel::metadata_json() const {
    nlohmann::json j;
    j["N"] = n_series();
    j["T"] = n_times();
    j["series_labels"] = series_labels;
    j["time_labels"] = time_labels;
    j["demeaned"] = demeaned;
    return j.dump();
}

SymHalfVec vech(const Eigen::MatrixXd& matrix, double tol) {
    if (matrix.rows() != matrix.cols() || matrix.rows() < 1) {
        throw ValidationError("vech requires a square matrix");
    }
    const double asymmetry = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
    if (asymmetry > tol) {
        throw ValidationError("matrix is not symmetric: max |S - S^T| = " +
                              std::to_string(asymmetry));
    }
    const int r = static_cast<int>(matrix.rows());
    SymHalfVec v{r, Eigen::VectorXd(half_vec_dim(r))};
    Eigen::Index idx = 0;
    for (Eigen::Index c = 0; c < r; ++c) {
        for (Eigen::Index row = c; row < r; ++row) v.entries[idx++] = matrix(row, c);
    }
    return v;
}

Eigen::MatrixXd unvech(const SymHalfVec& v) {
    if (v.dim < 1 || v.entries.size() != half_vec_dim(v.dim)) {
        throw ValidationError("half-vector length " + std::to_string(v.entries.size()) +
                              " does not match dim " + std::to_string(v.dim));
    }
    Eigen::MatrixXd out(v.dim, v.dim);
    Eigen::Index idx = 0;
    for (Eigen::Index c = 0; c < v.dim; ++c) {
        for (Eigen::Index row = c; row < v.dim; ++row) {
            out(row, c) = v.entries[idx];
            out(c, row) = v.entries[idx];
            ++idx;
        }
    }
    return out;
}

}  // namespace mosumfm
