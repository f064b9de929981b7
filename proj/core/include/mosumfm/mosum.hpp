#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mosumfm/factor.hpp"
#include "mosumfm/panel.hpp"

namespace mosumfm {

enum class StandardizationMode { Full, Diagonal };

std::string to_string(StandardizationMode mode);
StandardizationMode standardization_mode_from_string(const std::string& name);

/// Bartlett-kernel long-run covariance of vech(g_t g_t^T - I_r).
struct LongRunCov {
    Eigen::MatrixXd matrix;  // d x d, symmetric; diagonal mode has zero off-diagonals
    StandardizationMode mode = StandardizationMode::Diagonal;
    int bandwidth = 0;

    Eigen::Index dim() const { return matrix.rows(); }
};

/// V = Gamma(0) + sum_{l=1}^{m} (1 - l/(m+1)) (Gamma(l) + Gamma(l)^T) with
/// Gamma(l) = (1/T) sum_{t=l+1}^{T} Z_t Z_{t-l}^T, Z_t = vech(g_t g_t^T - I).
/// Diagonal mode keeps only the diagonal of the full-sample estimate. Full
/// mode requires the result to be positive definite; one ridge of
/// 1e-10 tr(V)/d is attempted before giving up.
LongRunCov hac_long_run_cov(const FactorEstimate& fe, int m, StandardizationMode mode);

/// Moving-sum scan over vech(g_t g_t^T). stats[i] is the standardized
/// statistic at k = gamma + i, for k = gamma..T-gamma.
struct MosumProfile {
    int gamma = 0;
    int T = 0;
    int r = 0;
    int d = 0;
    std::vector<double> stats;
    Eigen::MatrixXd raw;  // d x stats.size(), column i = M(gamma + i)
    double threshold = std::numeric_limits<double>::quiet_NaN();
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double kappa = std::numeric_limits<double>::quiet_NaN();
    double eta = std::numeric_limits<double>::quiet_NaN();

    int first_k() const { return gamma; }
    int last_k() const { return T - gamma; }
};

/// M(k) = (2 gamma)^{-1/2} vech(sum_{t=k+1}^{k+gamma} g_t g_t^T
///                              - sum_{t=k-gamma+1}^{k} g_t g_t^T),
/// maintained by a rolling update; the statistic is sqrt(M^T V^-1 M) with a
/// cached Cholesky (full) or elementwise division (diagonal).
MosumProfile mosum_profile(const FactorEstimate& fe, int gamma, const LongRunCov& lrcov);

/// a(x) = sqrt(2 log x)
double gumbel_a(double x);
/// b_d(x) = 2 log x + d log log x / 2 + log(1/2) - log Gamma(d/2)
double gumbel_b(double x, int d);

/// Gumbel-quantile threshold (b_d(T/g) - log log (1 - alpha)^{-1/2}) / a(T/g).
/// Requires T/gamma > e.
double threshold_gumbel(int T, int gamma, int d, double alpha);

/// p = 1 - exp(-2 exp(-x)) with x = a(T/g) max_stat - b_d(T/g).
double asymptotic_pvalue(double max_stat, int T, int gamma, int d);

struct ChangePoint {
    int location = 0;
    double statistic = 0.0;
    double p_value = std::numeric_limits<double>::quiet_NaN();
};

/// Effective tuning used by a pipeline run, echoed into reports.
struct ResolvedSettings {
    int r = 0;
    int gamma = 0;
    int m = 0;
    double alpha = 0.0;
    double eta = 0.0;
    double kappa = 0.0;
    double varrho = 0.0;
    StandardizationMode mode = StandardizationMode::Diagonal;
    std::string r_strategy;
};

struct ChangePointReport {
    std::vector<ChangePoint> estimates;  // ascending locations
    double threshold = std::numeric_limits<double>::quiet_NaN();
    ResolvedSettings settings;

    int count() const { return static_cast<int>(estimates.size()); }
    std::vector<int> locations() const;
    std::string to_json_string() const;
};

/// Reports every k with stats maximal over the window |j - k| <= eta*gamma
/// (clipped at the profile edges) and above the threshold. Within a flat
/// plateau of equal values only the smallest k is kept.
ChangePointReport detect_changes(const MosumProfile& profile, double eta, double threshold);

struct GammaChoice {
    int gamma = 0;
    bool used_fallback = false;
    long long primary_value = 0;   // floor(T^{2 zeta} log^varrho T)
    long long fallback_value = 0;  // floor(T^{zeta} log^varrho T), capped at floor(T/2)-1
    double zeta = 0.0;
};

/// Bandwidth rule gamma = floor(T^{2 zeta} log^varrho T) with
/// zeta = max(2/5, 1 - log N / log T). When that exceeds floor(T/2)-1 the
/// statistic is undefined, so the T^{zeta} reading is returned instead,
/// capped to stay feasible; the diagnostics record both candidates.
GammaChoice default_gamma(int T, int N, double varrho);

struct DetectorConfig {
    enum class RStrategy { Fixed, IcStable, EigenRatio };

    RStrategy r_strategy = RStrategy::IcStable;
    int r = 0;      // used when r_strategy == Fixed
    int r_max = 8;  // search cap for the estimators
    std::optional<int> gamma;
    double varrho = 1.1;
    std::optional<int> m;  // HAC bandwidth, default floor(T^{1/4})
    double alpha = 0.05;
    double eta = 0.6;
    double kappa = 0.2;
    StandardizationMode mode = StandardizationMode::Diagonal;
    std::vector<double> subsample_grid = {0.6, 0.7, 0.8, 0.9, 1.0};
    int subsample_reps = 30;
    std::uint64_t seed = 0;

    static DetectorConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
};

std::string to_string(DetectorConfig::RStrategy strategy);
DetectorConfig::RStrategy r_strategy_from_string(const std::string& name);

struct PipelineResult {
    FactorEstimate factors;
    LongRunCov lrcov;
    MosumProfile profile;
    ChangePointReport report;
    GammaChoice gamma_choice;  // populated when gamma was derived
    ResolvedSettings settings;
};

/// estimate_factors -> hac_long_run_cov -> mosum_profile -> detect_changes,
/// with the threshold threshold_gumbel(...) * max(1, log(T/gamma))^kappa.
PipelineResult run_pipeline(const Panel& panel, const DetectorConfig& config);

/// k, statistic and threshold per scan position, for plotting.
std::string profile_to_csv(const MosumProfile& profile);

}  // namespace mosumfm
