#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>

#include "mosumfm/mosum.hpp"
#include "mosumfm/panel.hpp"
#include "mosumfm/simlab.hpp"

namespace mosumfm::cli {

/// Exit codes: 0 success, 1 validation failure, 2 numerical failure.
/// Failures emit a machine-readable error JSON on `err`.

struct DetectOptions {
    std::string panel_path;
    Layout layout = Layout::SeriesInRows;
    bool demean = true;
    DetectorConfig config;
    std::optional<std::pair<int, int>> r_sweep;  // inclusive range of r values
    std::string out_prefix = "mosum";
};

int cmd_detect(const DetectOptions& options, std::ostream& out, std::ostream& err);

struct SimulateOptions {
    DgpKind kind = DgpKind::M2;
    int T = 400;
    int N = 100;
    double rho_f = 0.0;
    double rho_e = 0.0;
    int reps = 200;
    std::uint64_t seed = 1;
    DetectorConfig config;
    int threads = 1;
    std::optional<int> paper_table;  // 1..4: run the full grid of that table
    std::string out_path;            // empty = stdout
};

int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err);

struct SpectrumOptions {
    std::string panel_path;
    Layout layout = Layout::SeriesInRows;
    bool demean = true;
    int r_max = 8;
    std::uint64_t seed = 1;
    std::vector<double> grid = {0.6, 0.7, 0.8, 0.9, 1.0};
    int reps = 30;
    std::string out_path;  // empty = stdout
};

int cmd_spectrum(const SpectrumOptions& options, std::ostream& out, std::ostream& err);

struct VolatilityOptions {
    std::string high_path;
    std::string low_path;
    Layout layout = Layout::SeriesInRows;
    bool demean = true;
    std::string out_path;
};

int cmd_volatility(const VolatilityOptions& options, std::ostream& out, std::ostream& err);

}  // namespace mosumfm::cli
