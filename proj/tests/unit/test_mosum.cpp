#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mosumfm/factor.hpp"
#include "mosumfm/mosum.hpp"
#include "mosumfm/panel.hpp"
#include "mosumfm/rng.hpp"

using namespace mosumfm;

namespace {

FactorEstimate inject_factors(Eigen::MatrixXd ghat) {
    FactorEstimate fe;
    fe.r = static_cast<int>(ghat.cols());
    fe.ghat = std::move(ghat);
    return fe;
}

Eigen::MatrixXd random_ghat(Rng& rng, int t, int r) {
    Eigen::MatrixXd g(t, r);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < r; ++j) g(i, j) = rng.normal();
    return g;
}

/// From-scratch window sums, no rolling update. Oracle for mosum_profile.
std::vector<double> brute_force_profile(const Eigen::MatrixXd& ghat, int gamma,
                                        const LongRunCov& lrcov) {
    const int t_len = static_cast<int>(ghat.rows());
    const int r = static_cast<int>(ghat.cols());
    const Eigen::Index d = half_vec_dim(r);
    std::vector<double> stats;
    Eigen::LLT<Eigen::MatrixXd> chol;
    if (lrcov.mode == StandardizationMode::Full) chol.compute(lrcov.matrix);
    for (int k = gamma; k + gamma <= t_len; ++k) {
        Eigen::MatrixXd diff = Eigen::MatrixXd::Zero(r, r);
        for (int t = k + 1; t <= k + gamma; ++t)
            diff += ghat.row(t - 1).transpose() * ghat.row(t - 1);
        for (int t = k - gamma + 1; t <= k; ++t)
            diff -= ghat.row(t - 1).transpose() * ghat.row(t - 1);
        Eigen::VectorXd m(d);
        Eigen::Index idx = 0;
        for (int c = 0; c < r; ++c)
            for (int row = c; row < r; ++row) m[idx++] = diff(row, c);
        m /= std::sqrt(2.0 * gamma);
        double quad;
        if (lrcov.mode == StandardizationMode::Full) {
            quad = m.dot(chol.solve(m));
        } else {
            quad = (m.array().square() / lrcov.matrix.diagonal().array()).sum();
        }
        stats.push_back(std::sqrt(std::max(quad, 0.0)));
    }
    return stats;
}

using BigFloat = boost::multiprecision::cpp_bin_float_50;

BigFloat oracle_threshold(int t_len, int gamma, int d, const BigFloat& alpha) {
    const BigFloat x = BigFloat(t_len) / gamma;
    const BigFloat a = sqrt(2 * log(x));
    const BigFloat b = 2 * log(x) + d * log(log(x)) / 2 + log(BigFloat(1) / 2) -
                       boost::math::lgamma(BigFloat(d) / 2);
    return (b - log(log(1 / sqrt(1 - alpha)))) / a;
}

}  // namespace

TEST_SUITE("mosum") {

TEST_CASE("HAC with m = 0 equals the lag-zero covariance") {
    Rng rng(1);
    const FactorEstimate fe = inject_factors(random_ghat(rng, 200, 2));
    const LongRunCov lr = hac_long_run_cov(fe, 0, StandardizationMode::Full);

    const int t_len = 200;
    Eigen::MatrixXd z(3, t_len);
    for (int t = 0; t < t_len; ++t) {
        const double g1 = fe.ghat(t, 0), g2 = fe.ghat(t, 1);
        z.col(t) << g1 * g1 - 1.0, g2 * g1, g2 * g2 - 1.0;
    }
    const Eigen::MatrixXd gamma0 = z * z.transpose() / t_len;
    CHECK((lr.matrix - gamma0).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("constant factor outer products: rank-1 covariance") {
    // g_t == (2, 3): Z_t is the constant z = vech(gg' - I) = (3, 6, 8).
    Eigen::MatrixXd g(50, 2);
    for (int t = 0; t < 50; ++t) g.row(t) << 2.0, 3.0;
    const FactorEstimate fe = inject_factors(g);
    const int m = 3, t_len = 50;

    CHECK_THROWS_AS(hac_long_run_cov(fe, m, StandardizationMode::Full), NumericalError);

    const LongRunCov lr = hac_long_run_cov(fe, m, StandardizationMode::Diagonal);
    double c = 1.0;
    for (int l = 1; l <= m; ++l)
        c += 2.0 * (1.0 - static_cast<double>(l) / (m + 1)) * (t_len - l) / t_len;
    const Eigen::Vector3d z(3.0, 6.0, 8.0);
    CHECK((lr.matrix.diagonal() - c * z.cwiseAbs2()).cwiseAbs().maxCoeff() <= 1e-10);

    // A zero coordinate in z breaks the diagonal mode too: g = (1, 2).
    Eigen::MatrixXd g2(50, 2);
    for (int t = 0; t < 50; ++t) g2.row(t) << 1.0, 2.0;
    CHECK_THROWS_AS(hac_long_run_cov(inject_factors(g2), m, StandardizationMode::Diagonal),
                    NumericalError);
}

TEST_CASE("HAC variance of squared iid normals approaches 2") {
    double total = 0.0;
    const int t_len = 5000;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(derive_seed(99, seed));
        const FactorEstimate fe = inject_factors(random_ghat(rng, t_len, 1));
        const int m = static_cast<int>(std::floor(std::pow(t_len, 0.25)));
        total += hac_long_run_cov(fe, m, StandardizationMode::Full).matrix(0, 0);
    }
    CHECK(std::abs(total / 5.0 - 2.0) <= 0.2);
}

TEST_CASE("HAC validates its bandwidth") {
    Rng rng(2);
    const FactorEstimate fe = inject_factors(random_ghat(rng, 20, 1));
    CHECK_THROWS_AS(hac_long_run_cov(fe, -1, StandardizationMode::Full), ValidationError);
    CHECK_THROWS_AS(hac_long_run_cov(fe, 19, StandardizationMode::Full), ValidationError);
}

TEST_CASE("profile vanishes when the outer products are constant in t") {
    Eigen::MatrixXd g = Eigen::MatrixXd::Ones(40, 1);
    const FactorEstimate fe = inject_factors(g);
    LongRunCov lr{Eigen::MatrixXd::Constant(1, 1, 2.0), StandardizationMode::Diagonal, 0};
    const MosumProfile profile = mosum_profile(fe, 5, lr);
    REQUIRE(profile.stats.size() == 40 - 10 + 1);
    for (double s : profile.stats) CHECK(s == 0.0);
}

TEST_CASE("hand-computed two-level example") {
    // ghat = (1,1,1,3,3,3): outer products 1,1,1,9,9,9.
    Eigen::MatrixXd g(6, 1);
    g << 1, 1, 1, 3, 3, 3;
    const FactorEstimate fe = inject_factors(g);
    const double v = 4.0;
    LongRunCov lr{Eigen::MatrixXd::Constant(1, 1, v), StandardizationMode::Diagonal, 0};

    // gamma = 2: windows at k = 3 are {9,9} and {1,1}; M = (18-2)/sqrt(4) = 8.
    const MosumProfile p2 = mosum_profile(fe, 2, lr);
    REQUIRE(p2.stats.size() == 3);  // k = 2, 3, 4
    CHECK(p2.stats[1] == doctest::Approx(8.0 / std::sqrt(v)).epsilon(1e-12));

    // gamma = 3: single scan point k = 3, M = (27-3)/sqrt(6).
    const MosumProfile p3 = mosum_profile(fe, 3, lr);
    REQUIRE(p3.stats.size() == 1);
    CHECK(p3.stats[0] == doctest::Approx(24.0 / std::sqrt(6.0) / std::sqrt(v)).epsilon(1e-12));
}

TEST_CASE("rolling profile equals the brute-force recomputation") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        Rng rng(derive_seed(7, seed));
        const FactorEstimate fe = inject_factors(random_ghat(rng, 500, 3));
        const auto mode = seed % 2 == 0 ? StandardizationMode::Full : StandardizationMode::Diagonal;
        const LongRunCov lr = hac_long_run_cov(fe, 5, mode);
        const int gamma = 40;
        const MosumProfile profile = mosum_profile(fe, gamma, lr);
        const std::vector<double> oracle = brute_force_profile(fe.ghat, gamma, lr);
        REQUIRE(profile.stats.size() == oracle.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < oracle.size(); ++i)
            worst = std::max(worst, std::abs(profile.stats[i] - oracle[i]));
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("squared statistic equals the quadratic form with an explicit inverse") {
    Rng rng(8);
    const FactorEstimate fe = inject_factors(random_ghat(rng, 300, 2));
    const LongRunCov lr = hac_long_run_cov(fe, 4, StandardizationMode::Full);
    const Eigen::MatrixXd inv = lr.matrix.inverse();
    const MosumProfile profile = mosum_profile(fe, 30, lr);
    for (Eigen::Index i = 0; i < profile.raw.cols(); i += 17) {
        const Eigen::VectorXd m = profile.raw.col(i);
        const double quad = m.dot(inv * m);
        const double stat2 = profile.stats[static_cast<std::size_t>(i)] *
                             profile.stats[static_cast<std::size_t>(i)];
        CHECK(std::abs(stat2 - quad) <= 1e-8 * std::max(1.0, quad));
    }
}

TEST_CASE("profile validates gamma and covariance dimensions") {
    Rng rng(9);
    const FactorEstimate fe = inject_factors(random_ghat(rng, 50, 2));
    const LongRunCov lr = hac_long_run_cov(fe, 2, StandardizationMode::Diagonal);
    CHECK_THROWS_AS(mosum_profile(fe, 0, lr), ValidationError);
    CHECK_THROWS_AS(mosum_profile(fe, 26, lr), ValidationError);
    LongRunCov wrong{Eigen::MatrixXd::Identity(2, 2), StandardizationMode::Diagonal, 0};
    CHECK_THROWS_AS(mosum_profile(fe, 10, wrong), ValidationError);
}

TEST_CASE("gumbel constants at x = e") {
    const double e = std::numbers::e;
    CHECK(std::abs(gumbel_a(e) - std::sqrt(2.0)) <= 1e-12);
    CHECK(std::abs(gumbel_b(e, 2) - (2.0 - std::log(2.0))) <= 1e-12);
}

TEST_CASE("threshold matches a 50-digit oracle") {
    const double got = threshold_gumbel(400, 50, 6, 0.05);
    const BigFloat expected = oracle_threshold(400, 50, 6, BigFloat("0.05"));
    // Frozen oracle value: 4.2328668767987357...
    CHECK(std::abs(got - 4.232866876798736) <= 1e-12 * 4.23);
    CHECK(abs(BigFloat(got) - expected) <= 1e-12 * expected);
}

TEST_CASE("threshold domain requires T/gamma > e") {
    CHECK_THROWS_WITH_AS(threshold_gumbel(10, 5, 1, 0.05), doctest::Contains("smaller gamma"),
                         ValidationError);
    CHECK_NOTHROW(threshold_gumbel(11, 4, 1, 0.05));
}

TEST_CASE("p-value at the centered point and monotonicity") {
    const int t_len = 400, gamma = 50, d = 6;
    // max_stat with a * stat - b = 0 gives p = 1 - exp(-2).
    const double x = 400.0 / 50.0;
    const double stat0 = gumbel_b(x, d) / gumbel_a(x);
    CHECK(asymptotic_pvalue(stat0, t_len, gamma, d) ==
          doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-12));
    // p saturates at 1 in double precision for small statistics; require
    // strict decrease once it leaves the saturated region.
    double prev = 2.0;
    for (double stat = 0.0; stat < 8.0; stat += 0.25) {
        const double p = asymptotic_pvalue(stat, t_len, gamma, d);
        if (prev < 1.0) {
            CHECK(p < prev);
        } else {
            CHECK(p <= prev);
        }
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        prev = p;
    }
    CHECK(prev < 0.01);
}

TEST_CASE("p-value and threshold invert each other") {
    for (double alpha : {0.01, 0.05, 0.1}) {
        const double thr = threshold_gumbel(400, 50, 6, alpha);
        CHECK(std::abs(asymptotic_pvalue(thr, 400, 50, 6) - alpha) <= 1e-10);
    }
    double prev = std::numeric_limits<double>::infinity();
    for (double alpha = 0.005; alpha < 1.0; alpha += 0.005) {
        const double thr = threshold_gumbel(400, 50, 6, alpha);
        CHECK(thr < prev);
        prev = thr;
    }
}

TEST_CASE("detect_changes selects local maximizers above the threshold") {
    MosumProfile profile;
    profile.gamma = 50;
    profile.T = 400;
    profile.stats.assign(301, 0.5);  // k = 50..350

    SUBCASE("single strict peak") {
        profile.stats[70] = 3.0;  // k = 120
        const auto report = detect_changes(profile, 0.6, 2.0);
        REQUIRE(report.count() == 1);
        CHECK(report.estimates[0].location == 120);
        CHECK(report.estimates[0].statistic == 3.0);
    }
    SUBCASE("nothing above the threshold") {
        const auto report = detect_changes(profile, 0.6, 2.0);
        CHECK(report.count() == 0);
    }
    SUBCASE("two equal peaks with disjoint windows are both kept") {
        profile.stats[50] = 3.0;   // k = 100
        profile.stats[250] = 3.0;  // k = 300
        const auto report = detect_changes(profile, 0.6, 2.0);
        REQUIRE(report.count() == 2);
        CHECK(report.estimates[0].location == 100);
        CHECK(report.estimates[1].location == 300);
    }
    SUBCASE("a flat plateau reports only its smallest k") {
        for (int i = 100; i <= 104; ++i) profile.stats[static_cast<std::size_t>(i)] = 3.0;
        const auto report = detect_changes(profile, 0.6, 2.0);
        REQUIRE(report.count() == 1);
        CHECK(report.estimates[0].location == 150);
    }
}

TEST_CASE("default bandwidth rule and its fallback") {
    SUBCASE("simulation-scale dimensions overflow into the fallback") {
        const GammaChoice choice = default_gamma(400, 100, 1.1);
        // Direct evaluation: zeta = max(0.4, 1 - log 100 / log 400) = 0.4.
        const double lp = std::pow(std::log(400.0), 1.1);
        CHECK(choice.primary_value == static_cast<long long>(std::floor(std::pow(400.0, 0.8) * lp)));
        CHECK(choice.primary_value == 864);
        CHECK(choice.used_fallback);
        CHECK(choice.gamma == static_cast<int>(std::floor(std::pow(400.0, 0.4) * lp)));
        CHECK(choice.gamma == 78);
    }
    SUBCASE("large-T dimensions") {
        const GammaChoice choice = default_gamma(4312, 72, 0.5);
        const double zeta = std::max(0.4, 1.0 - std::log(72.0) / std::log(4312.0));
        CHECK(choice.zeta == doctest::Approx(zeta).epsilon(1e-12));
        CHECK(choice.used_fallback);
        CHECK(choice.gamma ==
              static_cast<int>(std::floor(std::pow(4312.0, zeta) * std::sqrt(std::log(4312.0)))));
        CHECK(choice.gamma == 173);
    }
    SUBCASE("N >= T pins zeta at 2/5") {
        CHECK(default_gamma(100, 100, 1.1).zeta == doctest::Approx(0.4));
        CHECK(default_gamma(100, 5000, 0.5).zeta == doctest::Approx(0.4));
    }
    CHECK_THROWS_AS(default_gamma(7, 10, 1.1), ValidationError);
}

TEST_CASE("sign flips of factor columns leave the statistics unchanged") {
    Rng rng(14);
    Eigen::MatrixXd x(20, 200);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 200; ++j) x(i, j) = rng.normal();
    const Panel panel = make_panel(std::move(x));
    const FactorEstimate fe = estimate_factors(panel, 3);
    const LongRunCov lr = hac_long_run_cov(fe, 3, StandardizationMode::Full);
    const MosumProfile base = mosum_profile(fe, 20, lr);

    for (int pattern = 1; pattern < 8; ++pattern) {
        FactorEstimate flipped = fe;
        for (int c = 0; c < 3; ++c) {
            if (pattern & (1 << c)) flipped.ghat.col(c) = -flipped.ghat.col(c);
        }
        const LongRunCov lr_flipped = hac_long_run_cov(flipped, 3, StandardizationMode::Full);
        const MosumProfile flipped_profile = mosum_profile(flipped, 20, lr_flipped);
        double worst = 0.0;
        for (std::size_t i = 0; i < base.stats.size(); ++i)
            worst = std::max(worst, std::abs(base.stats[i] - flipped_profile.stats[i]));
        CHECK(worst <= 1e-10);
    }
}

TEST_CASE("pipeline recovers a single noiseless loading shift") {
    Rng rng(15);
    const int n = 30, t_len = 300, k_star = 150, gamma = 75;
    Eigen::VectorXd lambda(n);
    for (int i = 0; i < n; ++i) lambda[i] = rng.uniform(0.5, 1.5);
    Eigen::MatrixXd x(n, t_len);
    for (int j = 0; j < t_len; ++j) {
        const double f = rng.normal();
        x.col(j) = (j < k_star ? 1.0 : 5.0) * lambda * f;
    }
    const Panel panel = make_panel(std::move(x));

    DetectorConfig config;
    config.r_strategy = DetectorConfig::RStrategy::Fixed;
    config.r = 1;
    config.gamma = gamma;
    const PipelineResult result = run_pipeline(panel, config);
    REQUIRE(result.report.count() == 1);
    CHECK(std::abs(result.report.estimates[0].location - k_star) <= 2);

    // Cross-check the peak against a brute-force scan of the same profile.
    const std::vector<double> oracle =
        brute_force_profile(result.factors.ghat, gamma, result.lrcov);
    const auto argmax = std::max_element(oracle.begin(), oracle.end()) - oracle.begin();
    CHECK(gamma + static_cast<int>(argmax) == result.report.estimates[0].location);
    CHECK(result.report.estimates[0].p_value < 0.05);
}

TEST_CASE("pipeline validates gamma against T") {
    Rng rng(16);
    Eigen::MatrixXd x(5, 40);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 40; ++j) x(i, j) = rng.normal();
    const Panel panel = make_panel(std::move(x));
    DetectorConfig config;
    config.r_strategy = DetectorConfig::RStrategy::Fixed;
    config.r = 1;
    config.gamma = 21;
    CHECK_THROWS_AS(run_pipeline(panel, config), ValidationError);
}

TEST_CASE("detector config JSON round trip") {
    DetectorConfig config;
    config.r_strategy = DetectorConfig::RStrategy::Fixed;
    config.r = 4;
    config.gamma = 65;
    config.alpha = 0.01;
    config.mode = StandardizationMode::Full;
    const DetectorConfig back = DetectorConfig::from_json_text(config.to_json_text());
    CHECK(back.r == 4);
    CHECK(back.gamma == 65);
    CHECK(back.alpha == 0.01);
    CHECK(back.mode == StandardizationMode::Full);
    CHECK(to_string(back.r_strategy) == "fixed");
}

}  // TEST_SUITE
