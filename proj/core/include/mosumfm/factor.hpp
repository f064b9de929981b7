#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mosumfm/panel.hpp"

namespace mosumfm {

/// Principal-components estimate of the pseudo factors. ghat row t is the
/// factor vector at time t, scaled so that (1/T) ghat^T ghat = I.
struct FactorEstimate {
    Eigen::MatrixXd ghat;      // T x r
    Eigen::VectorXd phi;       // r leading eigenvalues of (NT)^-1 X X^T, descending
    Eigen::MatrixXd loadings;  // N x r, X ghat / T
    int r = 0;
};

/// Thin SVD of the N x T panel: X = U S W^T, ghat = sqrt(T) W_{:,1:r},
/// phi_k = s_k^2 / (NT). Column signs are fixed so the largest-magnitude
/// coordinate of each factor column is positive.
FactorEstimate estimate_factors(const Panel& panel, int r);

struct FactorCountReport {
    int r_hat = 0;
    std::map<std::string, int> per_criterion;
    std::map<std::string, std::vector<double>> ic_curves;  // value at r = 0..r_max
    std::vector<double> eigenvalues;                       // leading r_max + 1

    std::string to_json_string() const;
};

/// Information criteria IC_j(r) = log V(r) + r p_j(N, T), where V(r) is the
/// mean squared PCA residual with r factors. Minimised over r in [1, r_max];
/// r_hat is the median of the three criterion choices.
FactorCountReport bai_ng_ic(const Panel& panel, int r_max);

/// Repeats bai_ng_ic over random subpanels (a fraction kappa of the series,
/// a contiguous window of length floor(kappa*T)) and keeps, per criterion,
/// the kappa-weighted mode of the subsample choices. Ties break to the
/// smaller r; the final r_hat is the median across criteria.
FactorCountReport stable_factor_count(const Panel& panel, int r_max,
                                      const std::vector<double>& grid, int reps,
                                      std::uint64_t seed);

/// r_hat = argmax_k phi_k / phi_{k+1} over k in [1, r_max]; a zero
/// denominator counts as an infinite ratio and stops the search.
FactorCountReport eigenvalue_ratio_count(const Panel& panel, int r_max);

/// All nonzero eigenvalues of (NT)^-1 X X^T, descending (computed on the
/// smaller Gram side). Shared by the factor-number estimators.
Eigen::VectorXd gram_eigenvalues(const Eigen::MatrixXd& values);

}  // namespace mosumfm
