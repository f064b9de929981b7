#include "mosumfm/ohlc.hpp"

#include <cmath>

#include "mosumfm/errors.hpp"

namespace mosumfm {

namespace {

std::string at(const OhlcSeries& ohlc, Eigen::Index i, Eigen::Index j) {
    const std::string series = i < static_cast<Eigen::Index>(ohlc.series_labels.size())
                                   ? ohlc.series_labels[static_cast<std::size_t>(i)]
                                   : std::to_string(i);
    const std::string date = j < static_cast<Eigen::Index>(ohlc.time_labels.size())
                                 ? ohlc.time_labels[static_cast<std::size_t>(j)]
                                 : std::to_string(j);
    return "series '" + series + "', date '" + date + "'";
}

}  // namespace

OhlcSeries make_ohlc(Eigen::MatrixXd high, Eigen::MatrixXd low,
                     std::vector<std::string> series_labels,
                     std::vector<std::string> time_labels) {
    if (high.rows() != low.rows() || high.cols() != low.cols()) {
        throw ValidationError("high and low panels have different shapes");
    }
    if (high.rows() < 1 || high.cols() < 2) {
        throw ValidationError("price panels require N >= 1 and T >= 2");
    }
    OhlcSeries ohlc{std::move(high), std::move(low), std::move(series_labels),
                    std::move(time_labels)};
    for (Eigen::Index i = 0; i < ohlc.high.rows(); ++i) {
        for (Eigen::Index j = 0; j < ohlc.high.cols(); ++j) {
            const double hi = ohlc.high(i, j);
            const double lo = ohlc.low(i, j);
            if (!std::isfinite(hi) || !std::isfinite(lo) || lo <= 0.0 || hi < lo) {
                throw ValidationError("prices must satisfy high >= low > 0 at " + at(ohlc, i, j));
            }
        }
    }
    return ohlc;
}

OhlcSeries load_ohlc(const std::string& high_path, const std::string& low_path, Layout layout) {
    Panel high = load_panel(high_path, layout, /*demean=*/false);
    Panel low = load_panel(low_path, layout, /*demean=*/false);
    if (high.series_labels != low.series_labels || high.time_labels != low.time_labels) {
        throw ValidationError("high and low panels have mismatched labels");
    }
    return make_ohlc(std::move(high.values), std::move(low.values),
                     std::move(high.series_labels), std::move(high.time_labels));
}

Panel log_range_volatility(const OhlcSeries& ohlc, bool demean) {
    Eigen::MatrixXd x(ohlc.high.rows(), ohlc.high.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double range = ohlc.high(i, j) - ohlc.low(i, j);
            if (range <= 0.0) {
                throw ValidationError("zero price range (log volatility undefined) at " +
                                      at(ohlc, i, j));
            }
            x(i, j) = std::log(0.361 * range * range);
        }
    }
    return make_panel(std::move(x), ohlc.series_labels, ohlc.time_labels, demean);
}

}  // namespace mosumfm
