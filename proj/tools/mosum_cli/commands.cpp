#include "commands.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"
#include "mosumfm/errors.hpp"
#include "mosumfm/factor.hpp"
#include "mosumfm/ohlc.hpp"
#include "mosumfm/rng.hpp"

namespace mosumfm::cli {

namespace {

int run_guarded(const std::function<void()>& body, std::ostream& err) {
    try {
        body();
        return 0;
    } catch (const ValidationError& e) {
        nlohmann::json j{{"error", {{"type", "validation"}, {"message", e.what()}}}};
        err << j.dump() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        nlohmann::json j{{"error", {{"type", "numerical"}, {"message", e.what()}}}};
        err << j.dump() << '\n';
        return 2;
    } catch (const std::exception& e) {
        nlohmann::json j{{"error", {{"type", "internal"}, {"message", e.what()}}}};
        err << j.dump() << '\n';
        return 2;
    }
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open output file: " + path);
    out << content;
}

std::string normalized_profile_csv(const MosumProfile& profile) {
    std::ostringstream out;
    out.precision(17);
    out << "k,stat,normalized_stat,threshold\n";
    for (std::size_t i = 0; i < profile.stats.size(); ++i) {
        out << (profile.gamma + static_cast<int>(i)) << ',' << profile.stats[i] << ','
            << profile.stats[i] / profile.threshold << ',' << profile.threshold << '\n';
    }
    return out.str();
}

}  // namespace

int cmd_detect(const DetectOptions& options, std::ostream& out, std::ostream& err) {
    return run_guarded(
        [&] {
            const Panel panel = load_panel(options.panel_path, options.layout, options.demean);

            if (options.r_sweep) {
                const auto [lo, hi] = *options.r_sweep;
                if (lo < 1 || hi < lo) throw ValidationError("invalid r sweep range");
                nlohmann::json sweep;
                sweep["panel"] = nlohmann::json::parse(panel.metadata_json());
                auto& reports = sweep["reports"] = nlohmann::json::array();
                for (int r = lo; r <= hi; ++r) {
                    DetectorConfig config = options.config;
                    config.r_strategy = DetectorConfig::RStrategy::Fixed;
                    config.r = r;
                    const PipelineResult result = run_pipeline(panel, config);
                    write_file(options.out_prefix + "_profile_r" + std::to_string(r) + ".csv",
                               normalized_profile_csv(result.profile));
                    reports.push_back(
                        nlohmann::json::parse(result.report.to_json_string()));
                }
                write_file(options.out_prefix + "_rsweep.json", sweep.dump() + "\n");
                out << sweep.dump() << '\n';
                return;
            }

            const PipelineResult result = run_pipeline(panel, options.config);
            write_file(options.out_prefix + "_report.json",
                       result.report.to_json_string() + "\n");
            write_file(options.out_prefix + "_profile.csv",
                       normalized_profile_csv(result.profile));
            out << result.report.to_json_string() << '\n';
        },
        err);
}

int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err) {
    return run_guarded(
        [&] {
            if (options.reps < 1) throw ValidationError("reps must be >= 1");

            struct Row {
                DgpSpec spec;
                StandardizationMode mode;
                std::uint64_t seed;
            };
            std::vector<Row> rows;
            if (options.paper_table) {
                const int table = *options.paper_table;
                const std::vector<int> t_grid = {400, 600, 800, 1000};
                const std::vector<int> n_grid = {100, 200, 500};
                const std::vector<StandardizationMode> modes = {StandardizationMode::Diagonal,
                                                                StandardizationMode::Full};
                std::uint64_t combo = 0;
                if (table == 1) {
                    for (auto mode : modes) {
                        rows.push_back({make_m1_spec(0), mode, derive_seed(options.seed, combo)});
                    }
                } else if (table == 2 || table == 3) {
                    const double rho_f = table == 2 ? 0.0 : 0.7;
                    const double rho_e = table == 2 ? 0.0 : 0.3;
                    for (int t : t_grid) {
                        for (int n : n_grid) {
                            const auto row_seed = derive_seed(options.seed, combo++);
                            for (auto mode : modes) {
                                rows.push_back(
                                    {make_m2_spec(t, n, rho_f, rho_e, 0), mode, row_seed});
                            }
                        }
                    }
                } else if (table == 4) {
                    for (const auto [rho_f, rho_e] :
                         std::vector<std::pair<double, double>>{{0.0, 0.0}, {0.7, 0.3}}) {
                        for (int t : t_grid) {
                            for (int n : n_grid) {
                                const auto row_seed = derive_seed(options.seed, combo++);
                                for (auto mode : modes) {
                                    rows.push_back(
                                        {make_m3_spec(t, n, rho_f, rho_e, 0), mode, row_seed});
                                }
                            }
                        }
                    }
                } else {
                    throw ValidationError("paper table must be 1, 2, 3 or 4");
                }
            } else {
                DgpSpec spec;
                if (options.kind == DgpKind::M1) {
                    spec = make_m1_spec(0);
                } else if (options.kind == DgpKind::M2) {
                    spec = make_m2_spec(options.T, options.N, options.rho_f, options.rho_e, 0);
                } else {
                    spec = make_m3_spec(options.T, options.N, options.rho_f, options.rho_e, 0);
                }
                rows.push_back({spec, options.config.mode, options.seed});
            }

            std::ostringstream table;
            table << EvalSummary::csv_header() << '\n';
            for (const auto& row : rows) {
                DetectorConfig config = options.config;
                config.mode = row.mode;
                const EvalSummary summary =
                    monte_carlo(row.spec, config, options.reps, row.seed, options.threads);
                table << summary.to_csv_row(row.spec, row.mode) << '\n';
            }
            if (options.out_path.empty()) {
                out << table.str();
            } else {
                write_file(options.out_path, table.str());
            }
        },
        err);
}

int cmd_spectrum(const SpectrumOptions& options, std::ostream& out, std::ostream& err) {
    return run_guarded(
        [&] {
            const Panel panel = load_panel(options.panel_path, options.layout, options.demean);
            const FactorCountReport ic = bai_ng_ic(panel, options.r_max);
            const FactorCountReport stable = stable_factor_count(
                panel, options.r_max, options.grid, options.reps, options.seed);
            const FactorCountReport ratio = eigenvalue_ratio_count(panel, options.r_max);

            nlohmann::json j;
            j["panel"] = nlohmann::json::parse(panel.metadata_json());
            j["r_max"] = options.r_max;
            j["information_criteria"] = nlohmann::json::parse(ic.to_json_string());
            j["stable"] = nlohmann::json::parse(stable.to_json_string());
            j["eigen_ratio"] = nlohmann::json::parse(ratio.to_json_string());
            const std::string text = j.dump() + "\n";
            if (options.out_path.empty()) {
                out << text;
            } else {
                write_file(options.out_path, text);
            }
        },
        err);
}

int cmd_volatility(const VolatilityOptions& options, std::ostream& out, std::ostream& err) {
    return run_guarded(
        [&] {
            const OhlcSeries ohlc = load_ohlc(options.high_path, options.low_path, options.layout);
            const Panel panel = log_range_volatility(ohlc, options.demean);
            if (options.out_path.empty()) throw ValidationError("volatility requires --out");
            save_panel_csv(panel, options.out_path);
            out << panel.metadata_json() << '\n';
        },
        err);
}

}  // namespace mosumfm::cli
