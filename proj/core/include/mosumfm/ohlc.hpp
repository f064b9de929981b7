#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mosumfm/panel.hpp"

namespace mosumfm {

/// Daily high/low price panels, rows = series. Requires high >= low > 0.
struct OhlcSeries {
    Eigen::MatrixXd high;  // N x T
    Eigen::MatrixXd low;   // N x T
    std::vector<std::string> series_labels;
    std::vector<std::string> time_labels;
};

OhlcSeries make_ohlc(Eigen::MatrixXd high, Eigen::MatrixXd low,
                     std::vector<std::string> series_labels = {},
                     std::vector<std::string> time_labels = {});

/// Two aligned CSV panels (same layout as load_panel).
OhlcSeries load_ohlc(const std::string& high_path, const std::string& low_path, Layout layout);

/// Log range volatility X_it = log(0.361 (high - low)^2), demeaned per
/// series by default. A zero range makes the log undefined and is an error
/// naming the series and date.
Panel log_range_volatility(const OhlcSeries& ohlc, bool demean = true);

}  // namespace mosumfm
