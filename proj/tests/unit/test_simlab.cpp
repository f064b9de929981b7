#include <cmath>

#include "doctest.h"
#include "mosumfm/rng.hpp"
#include "mosumfm/simlab.hpp"

using namespace mosumfm;

namespace {

DetectorConfig tiny_config() {
    DetectorConfig config;
    config.r_strategy = DetectorConfig::RStrategy::Fixed;
    config.r = 3;
    config.gamma = 30;
    config.m = 3;
    return config;
}

SimulatedPanel truth_of_length(int t_len, std::vector<int> breaks) {
    SimulatedPanel truth;
    truth.panel = make_panel(Eigen::MatrixXd::Zero(1, t_len));
    truth.true_changepoints = std::move(breaks);
    return truth;
}

ChangePointReport report_at(std::vector<int> locations) {
    ChangePointReport report;
    for (int k : locations) report.estimates.push_back({k, 5.0, 0.01});
    return report;
}

}  // namespace

TEST_SUITE("simlab") {

TEST_CASE("scenario shapes: breaks, ranks and dimensions") {
    const SimulatedPanel m2 = simulate(make_m2_spec(400, 50, 0.0, 0.0, 1));
    CHECK(m2.true_changepoints == std::vector<int>{100, 200, 300});
    CHECK(m2.segment_ranks == std::vector<int>{3, 3, 2, 3});
    CHECK(m2.pseudo_factor_count == 6);
    CHECK(m2.panel.n_series() == 50);
    CHECK(m2.panel.n_times() == 400);

    const SimulatedPanel m3 = simulate(make_m3_spec(240, 40, 0.7, 0.3, 2));
    CHECK(m3.true_changepoints.empty());
    CHECK(m3.pseudo_factor_count == 3);

    const SimulatedPanel m1 = simulate(make_m1_spec(3));
    CHECK(m1.true_changepoints == std::vector<int>{133, 267});
    CHECK(m1.panel.n_series() == 200);
    CHECK(m1.panel.n_times() == 400);
    CHECK(m1.segment_ranks == std::vector<int>{5, 5, 5});
    CHECK(m1.pseudo_factor_count == 7);
    CHECK(!m1.notes.empty());
}

TEST_CASE("M1 rejects other dimensions and M2 validates T") {
    DgpSpec bad = make_m1_spec(1);
    bad.N = 100;
    CHECK_THROWS_AS(simulate(bad), ValidationError);
    DgpSpec tiny = make_m2_spec(4, 10, 0.0, 0.0, 1);
    CHECK_THROWS_AS(simulate(tiny), ValidationError);
}

TEST_CASE("identical specs give bit-identical panels; seeds change them") {
    const DgpSpec spec = make_m2_spec(200, 30, 0.7, 0.3, 77);
    const SimulatedPanel a = simulate(spec);
    const SimulatedPanel b = simulate(spec);
    CHECK((a.panel.values.array() == b.panel.values.array()).all());

    DgpSpec other = spec;
    other.seed = 78;
    const SimulatedPanel c = simulate(other);
    CHECK((a.panel.values - c.panel.values).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("M2 factor path: independent standard normals when rho = 0") {
    const SimulatedPanel sim = simulate(make_m2_spec(2000, 20, 0.0, 0.0, 5));
    const Eigen::MatrixXd cov =
        sim.factors.transpose() * sim.factors / static_cast<double>(sim.factors.rows());
    CHECK((cov - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <=
          5.0 / std::sqrt(2000.0));
}

TEST_CASE("toeplitz covariance structure") {
    const Eigen::MatrixXd cov = toeplitz_covariance(5, 0.3);
    for (int i = 0; i < 5; ++i) {
        CHECK(cov(i, i) == 1.0);
        double expected = 0.0;
        for (int j = 0; j < 5; ++j) expected += std::pow(0.3, std::abs(i - j));
        CHECK(cov.row(i).sum() == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("evaluate: buckets and the log-T accuracy radius") {
    const SimulatedPanel truth = truth_of_length(400, {133, 267});

    SUBCASE("near misses inside log T count as hits") {
        const EvalRecord record = evaluate(report_at({130, 270}), truth);
        CHECK(record.bucket == 2);
        CHECK(record.hits == std::vector<int>{1, 1});
    }
    SUBCASE("no estimates: all misses, lowest bucket") {
        const EvalRecord record = evaluate(report_at({}), truth);
        CHECK(record.bucket == 0);
        CHECK(record.hits == std::vector<int>{0, 0});
    }
    SUBCASE("an extra estimate moves the bucket, not the hits") {
        const EvalRecord record = evaluate(report_at({50, 133, 267}), truth);
        CHECK(record.bucket == 3);
        CHECK(record.hits == std::vector<int>{1, 1});
    }
    SUBCASE("distance 6 exceeds log(400) = 5.99") {
        const EvalRecord record = evaluate(report_at({139, 267}), truth);
        CHECK(record.hits == std::vector<int>{0, 1});
    }
}

TEST_CASE("monte_carlo with one replicate equals a manual run") {
    const DgpSpec spec = make_m3_spec(150, 20, 0.0, 0.0, 0);
    const DetectorConfig config = tiny_config();
    const std::uint64_t seed = 404;

    const EvalSummary summary = monte_carlo(spec, config, 1, seed, 1);

    DgpSpec replicate = spec;
    replicate.seed = derive_seed(seed, 0);
    DetectorConfig replicate_config = config;
    replicate_config.seed = derive_seed(seed, 0, 0x9e3779b9ULL);
    const SimulatedPanel sim = simulate(replicate);
    const EvalRecord record = evaluate(run_pipeline(sim.panel, replicate_config).report, sim);

    CHECK(summary.buckets[static_cast<std::size_t>(record.bucket)] == 1.0);
    CHECK(summary.replicates == 1);
}

TEST_CASE("monte_carlo summaries are identical across thread counts and reruns") {
    const DgpSpec spec = make_m3_spec(150, 20, 0.0, 0.0, 0);
    const DetectorConfig config = tiny_config();
    const EvalSummary one = monte_carlo(spec, config, 8, 11, 1);
    const EvalSummary two = monte_carlo(spec, config, 8, 11, 2);
    const EvalSummary eight = monte_carlo(spec, config, 8, 11, 8);
    const EvalSummary again = monte_carlo(spec, config, 8, 11, 2);
    CHECK(one.to_json_text() == two.to_json_text());
    CHECK(one.to_json_text() == eight.to_json_text());
    CHECK(one.to_json_text() == again.to_json_text());
}

TEST_CASE("bucket masses partition the replicates") {
    const DgpSpec spec = make_m2_spec(200, 25, 0.0, 0.0, 0);
    DetectorConfig config = tiny_config();
    config.gamma = 40;
    const EvalSummary summary = monte_carlo(spec, config, 10, 3, 2);
    double total = 0.0;
    for (double b : summary.buckets) total += b;
    CHECK(std::abs(total - 1.0) <= 1e-12);
    REQUIRE(summary.accuracy.size() == 3);
    for (double a : summary.accuracy) {
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
    }
}

TEST_CASE("monte_carlo validates reps and reports the failing seed") {
    const DgpSpec spec = make_m3_spec(150, 20, 0.0, 0.0, 0);
    CHECK_THROWS_AS(monte_carlo(spec, tiny_config(), 0, 1, 1), ValidationError);

    DetectorConfig broken = tiny_config();
    broken.gamma = 100;  // 2 gamma > T: every replicate fails
    CHECK_THROWS_WITH_AS(monte_carlo(spec, broken, 2, 1, 1), doctest::Contains("seed"),
                         NumericalError);
}

TEST_CASE("summary serialization carries buckets and accuracies") {
    const DgpSpec spec = make_m2_spec(200, 25, 0.0, 0.0, 0);
    DetectorConfig config = tiny_config();
    config.gamma = 40;
    const EvalSummary summary = monte_carlo(spec, config, 4, 3, 2);
    const std::string json = summary.to_json_text();
    CHECK(json.find("\"replicates\":4") != std::string::npos);
    const std::string row = summary.to_csv_row(spec, config.mode);
    CHECK(row.substr(0, 11) == "M2,200,25,0");
    CHECK(EvalSummary::csv_header().find("bucket_0") != std::string::npos);
}

}  // TEST_SUITE
