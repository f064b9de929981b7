#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "mosumfm/errors.hpp"

namespace {

using mosumfm::DetectorConfig;
using mosumfm::Layout;

struct ConfigFlags {
    std::string config_path;
    std::string r_strategy;
    int r = 0;
    int r_max = 8;
    int gamma = 0;
    double varrho = 1.1;
    int m = -1;
    double alpha = 0.05;
    double eta = 0.6;
    double kappa = 0.2;
    std::string mode;
    std::uint64_t seed = 0;
};

void add_config_flags(CLI::App* app, ConfigFlags& flags) {
    app->add_option("--config", flags.config_path, "JSON config file; explicit flags win");
    app->add_option("--r-strategy", flags.r_strategy, "fixed | ic-stable | eigen-ratio");
    app->add_option("--r", flags.r, "factor count (implies --r-strategy fixed)");
    app->add_option("--r-max", flags.r_max, "search cap for factor-number estimation");
    app->add_option("--gamma", flags.gamma, "scan bandwidth; derived from T and N if omitted");
    app->add_option("--varrho", flags.varrho, "log exponent of the bandwidth rule");
    app->add_option("--m", flags.m, "HAC bandwidth; default floor(T^(1/4))");
    app->add_option("--alpha", flags.alpha, "significance level");
    app->add_option("--eta", flags.eta, "local-maximiser window fraction");
    app->add_option("--kappa", flags.kappa, "threshold inflation exponent");
    app->add_option("--mode", flags.mode, "full | diagonal standardization");
    app->add_option("--seed", flags.seed, "seed for all randomised steps");
}

DetectorConfig resolve_config(const CLI::App* app, const ConfigFlags& flags) {
    DetectorConfig config;
    if (!flags.config_path.empty()) {
        std::ifstream in(flags.config_path);
        if (!in) throw mosumfm::ValidationError("cannot open config file: " + flags.config_path);
        std::stringstream buffer;
        buffer << in.rdbuf();
        config = DetectorConfig::from_json_text(buffer.str());
    }
    if (app->count("--r-strategy") > 0) {
        config.r_strategy = mosumfm::r_strategy_from_string(flags.r_strategy);
    }
    if (app->count("--r") > 0) {
        config.r = flags.r;
        if (app->count("--r-strategy") == 0) config.r_strategy = DetectorConfig::RStrategy::Fixed;
    }
    if (app->count("--r-max") > 0) config.r_max = flags.r_max;
    if (app->count("--gamma") > 0) config.gamma = flags.gamma;
    if (app->count("--varrho") > 0) config.varrho = flags.varrho;
    if (app->count("--m") > 0) config.m = flags.m;
    if (app->count("--alpha") > 0) config.alpha = flags.alpha;
    if (app->count("--eta") > 0) config.eta = flags.eta;
    if (app->count("--kappa") > 0) config.kappa = flags.kappa;
    if (app->count("--mode") > 0) {
        config.mode = mosumfm::standardization_mode_from_string(flags.mode);
    }
    if (app->count("--seed") > 0) config.seed = flags.seed;
    return config;
}

Layout parse_layout(const std::string& name) {
    if (name == "rows") return Layout::SeriesInRows;
    if (name == "columns") return Layout::SeriesInColumns;
    throw mosumfm::ValidationError("layout must be 'rows' or 'columns'");
}

std::pair<int, int> parse_range(const std::string& text) {
    const auto pos = text.find("..");
    if (pos == std::string::npos) {
        throw mosumfm::ValidationError("range must look like a..b: " + text);
    }
    return {std::stoi(text.substr(0, pos)), std::stoi(text.substr(pos + 2))};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MOSUM change point detection for large factor models"};
    app.require_subcommand(1);

    // detect
    auto* detect = app.add_subcommand("detect", "Scan a panel CSV for loading change points");
    std::string detect_panel, detect_layout = "rows", detect_out = "mosum", detect_sweep;
    bool detect_no_demean = false;
    ConfigFlags detect_flags;
    detect->add_option("--panel", detect_panel, "panel CSV")->required();
    detect->add_option("--layout", detect_layout, "rows | columns (series orientation)");
    detect->add_flag("--no-demean", detect_no_demean, "skip per-series demeaning");
    detect->add_option("--out", detect_out, "output prefix");
    detect->add_option("--r-sweep", detect_sweep, "a..b: one normalized profile per r");
    add_config_flags(detect, detect_flags);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo evaluation on synthetic panels");
    std::string sim_kind = "M2", sim_out;
    mosumfm::cli::SimulateOptions sim_options;
    int sim_paper_table = 0;
    ConfigFlags sim_flags;
    simulate->add_option("kind", sim_kind, "M1 | M2 | M3");
    simulate->add_option("--T", sim_options.T, "sample size");
    simulate->add_option("--N", sim_options.N, "panel dimension");
    simulate->add_option("--rho-f", sim_options.rho_f, "factor AR(1) coefficient");
    simulate->add_option("--rho-e", sim_options.rho_e, "idiosyncratic AR(1) coefficient");
    simulate->add_option("--reps", sim_options.reps, "replicates per configuration");
    simulate->add_option("--threads", sim_options.threads, "worker threads (result-invariant)");
    simulate->add_option("--paper-table", sim_paper_table, "run the full grid of table 1-4");
    simulate->add_option("--out", sim_out, "output CSV; stdout if omitted");
    add_config_flags(simulate, sim_flags);

    // spectrum
    auto* spectrum = app.add_subcommand("spectrum", "Eigenvalue and factor-number diagnostics");
    mosumfm::cli::SpectrumOptions spec_options;
    std::string spec_layout = "rows";
    bool spec_no_demean = false;
    spectrum->add_option("--panel", spec_options.panel_path, "panel CSV")->required();
    spectrum->add_option("--layout", spec_layout, "rows | columns");
    spectrum->add_flag("--no-demean", spec_no_demean, "skip per-series demeaning");
    spectrum->add_option("--r-max", spec_options.r_max, "largest factor count considered");
    spectrum->add_option("--seed", spec_options.seed, "seed for the subsampling estimator");
    spectrum->add_option("--reps", spec_options.reps, "subsamples per grid fraction");
    spectrum->add_option("--out", spec_options.out_path, "output JSON; stdout if omitted");

    // volatility
    auto* volatility =
        app.add_subcommand("volatility", "Log high-low range volatility panel from prices");
    mosumfm::cli::VolatilityOptions vol_options;
    std::string vol_layout = "rows";
    bool vol_no_demean = false;
    volatility->add_option("--high", vol_options.high_path, "daily high prices CSV")->required();
    volatility->add_option("--low", vol_options.low_path, "daily low prices CSV")->required();
    volatility->add_option("--layout", vol_layout, "rows | columns");
    volatility->add_flag("--no-demean", vol_no_demean, "skip per-series demeaning");
    volatility->add_option("--out", vol_options.out_path, "output panel CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (detect->parsed()) {
            mosumfm::cli::DetectOptions options;
            options.panel_path = detect_panel;
            options.layout = parse_layout(detect_layout);
            options.demean = !detect_no_demean;
            options.config = resolve_config(detect, detect_flags);
            options.out_prefix = detect_out;
            if (!detect_sweep.empty()) options.r_sweep = parse_range(detect_sweep);
            return mosumfm::cli::cmd_detect(options, std::cout, std::cerr);
        }
        if (simulate->parsed()) {
            sim_options.kind = mosumfm::dgp_kind_from_string(sim_kind);
            sim_options.config = resolve_config(simulate, sim_flags);
            sim_options.seed = simulate->count("--seed") > 0 ? sim_flags.seed : 1;
            if (sim_paper_table > 0) sim_options.paper_table = sim_paper_table;
            sim_options.out_path = sim_out;
            return mosumfm::cli::cmd_simulate(sim_options, std::cout, std::cerr);
        }
        if (spectrum->parsed()) {
            spec_options.layout = parse_layout(spec_layout);
            spec_options.demean = !spec_no_demean;
            return mosumfm::cli::cmd_spectrum(spec_options, std::cout, std::cerr);
        }
        if (volatility->parsed()) {
            vol_options.layout = parse_layout(vol_layout);
            vol_options.demean = !vol_no_demean;
            return mosumfm::cli::cmd_volatility(vol_options, std::cout, std::cerr);
        }
    } catch (const mosumfm::ValidationError& e) {
        std::cerr << R"({"error":{"type":"validation","message":")" << e.what() << R"("}})"
                  << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << R"({"error":{"type":"internal","message":")" << e.what() << R"("}})" << '\n';
        return 2;
    }
    return 0;
}
