#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "mosumfm/factor.hpp"
#include "mosumfm/mosum.hpp"
#include "mosumfm/rng.hpp"
#include "mosumfm/simlab.hpp"

using namespace mosumfm;

namespace {

Panel random_panel(int n, int t, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, t);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < t; ++j) x(i, j) = rng.normal();
    return make_panel(std::move(x));
}

FactorEstimate random_factors(int t, int r, std::uint64_t seed) {
    Rng rng(seed);
    FactorEstimate fe;
    fe.r = r;
    fe.ghat.resize(t, r);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < r; ++j) fe.ghat(i, j) = rng.normal();
    return fe;
}

void BM_EstimateFactors(benchmark::State& state) {
    const auto n = static_cast<int>(state.range(0));
    const auto t = static_cast<int>(state.range(1));
    const Panel panel = random_panel(n, t, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(estimate_factors(panel, 4));
    }
}
BENCHMARK(BM_EstimateFactors)->Args({100, 400})->Args({200, 400})->Args({100, 1000});

void BM_HacLongRunCov(benchmark::State& state) {
    const auto t = static_cast<int>(state.range(0));
    const auto r = static_cast<int>(state.range(1));
    const FactorEstimate fe = random_factors(t, r, 2);
    const int m = static_cast<int>(std::pow(t, 0.25));
    for (auto _ : state) {
        benchmark::DoNotOptimize(hac_long_run_cov(fe, m, StandardizationMode::Full));
    }
}
BENCHMARK(BM_HacLongRunCov)->Args({400, 3})->Args({1000, 3})->Args({1000, 6});

void BM_MosumProfileRolling(benchmark::State& state) {
    const auto t = static_cast<int>(state.range(0));
    const auto r = static_cast<int>(state.range(1));
    const FactorEstimate fe = random_factors(t, r, 3);
    const LongRunCov lr = hac_long_run_cov(fe, 4, StandardizationMode::Diagonal);
    const int gamma = t / 8;
    for (auto _ : state) {
        benchmark::DoNotOptimize(mosum_profile(fe, gamma, lr));
    }
    state.SetComplexityN(t);
}
BENCHMARK(BM_MosumProfileRolling)->Args({400, 3})->Args({2000, 3})->Args({8000, 3})->Complexity();

void BM_MosumProfileBruteForce(benchmark::State& state) {
    const auto t = static_cast<int>(state.range(0));
    const int r = 3;
    const FactorEstimate fe = random_factors(t, r, 3);
    const LongRunCov lr = hac_long_run_cov(fe, 4, StandardizationMode::Diagonal);
    const int gamma = t / 8;
    const Eigen::VectorXd inv_diag = lr.matrix.diagonal().cwiseInverse();
    for (auto _ : state) {
        double total = 0.0;
        for (int k = gamma; k + gamma <= t; ++k) {
            Eigen::MatrixXd diff = Eigen::MatrixXd::Zero(r, r);
            for (int s = k + 1; s <= k + gamma; ++s)
                diff += fe.ghat.row(s - 1).transpose() * fe.ghat.row(s - 1);
            for (int s = k - gamma + 1; s <= k; ++s)
                diff -= fe.ghat.row(s - 1).transpose() * fe.ghat.row(s - 1);
            Eigen::VectorXd m(half_vec_dim(r));
            Eigen::Index idx = 0;
            for (int c = 0; c < r; ++c)
                for (int row = c; row < r; ++row) m[idx++] = diff(row, c);
            m /= std::sqrt(2.0 * gamma);
            total += std::sqrt(m.cwiseAbs2().dot(inv_diag));
        }
        benchmark::DoNotOptimize(total);
    }
    state.SetComplexityN(t);
}
BENCHMARK(BM_MosumProfileBruteForce)->Args({400})->Args({2000})->Complexity();

void BM_StableFactorCount(benchmark::State& state) {
    const Panel panel = random_panel(100, 400, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(stable_factor_count(panel, 8, {0.6, 0.7, 0.8, 0.9, 1.0}, 30, 7));
    }
}
BENCHMARK(BM_StableFactorCount);

void BM_SimulateThreeBreak(benchmark::State& state) {
    const DgpSpec spec = make_m2_spec(400, 100, 0.7, 0.3, 5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate(spec));
    }
}
BENCHMARK(BM_SimulateThreeBreak);

void BM_PipelineFixedR(benchmark::State& state) {
    const SimulatedPanel sim = simulate(make_m2_spec(400, 100, 0.0, 0.0, 6));
    DetectorConfig config;
    config.r_strategy = DetectorConfig::RStrategy::Fixed;
    config.r = 4;
    config.gamma = 65;
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_pipeline(sim.panel, config));
    }
}
BENCHMARK(BM_PipelineFixedR);

}  // namespace

BENCHMARK_MAIN();
