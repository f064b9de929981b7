#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mosumfm/errors.hpp"

namespace mosumfm {

enum class Layout { SeriesInRows, SeriesInColumns };

/// Observed panel, rows = series, columns = time. Immutable once built;
/// safe to share read-only across threads.
struct Panel {
    Eigen::MatrixXd values;  // N x T
    std::vector<std::string> series_labels;
    std::vector<std::string> time_labels;
    bool demeaned = false;

    Eigen::Index n_series() const { return values.rows(); }
    Eigen::Index n_times() const { return values.cols(); }

    /// JSON object with N, T, labels and the demeaned flag.
    std::string metadata_json() const;
};

/// Validates shape and finiteness, optionally subtracts each row mean.
/// Missing labels are filled with "s<i>" / "t<j>".
Panel make_panel(Eigen::MatrixXd values, std::vector<std::string> series_labels = {},
                 std::vector<std::string> time_labels = {}, bool demean = false);

/// CSV with one header row and one leading label column.
Panel load_panel(const std::string& path, Layout layout, bool demean);

void save_panel_csv(const Panel& panel, const std::string& path,
                    Layout layout = Layout::SeriesInRows);

/// Subtracts each row's sample mean in place and sets the demeaned flag.
void demean_rows(Panel& panel);

/// Half-vectorised symmetric matrix: lower triangle stacked column-major,
/// (1,1),(2,1),...,(r,1),(2,2),...,(r,r). entries.size() == r(r+1)/2.
struct SymHalfVec {
    int dim = 0;
    Eigen::VectorXd entries;
};

constexpr Eigen::Index half_vec_dim(int r) {
    return static_cast<Eigen::Index>(r) * (r + 1) / 2;
}

/// Fails if max |S - S^T| exceeds tol.
SymHalfVec vech(const Eigen::MatrixXd& matrix, double tol = 1e-10);

Eigen::MatrixXd unvech(const SymHalfVec& v);

/// vech(g g^T) without symmetry checks; out must have g.size()*(g.size()+1)/2
/// entries. Hot path for the scan statistics.
inline void vech_outer(const Eigen::Ref<const Eigen::VectorXd>& g,
                       Eigen::Ref<Eigen::VectorXd> out) {
    const Eigen::Index r = g.size();
    Eigen::Index idx = 0;
    for (Eigen::Index c = 0; c < r; ++c) {
        const double gc = g[c];
        for (Eigen::Index row = c; row < r; ++row) out[idx++] = g[row] * gc;
    }
}

}  // namespace mosumfm
