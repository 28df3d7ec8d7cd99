#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "commands.hpp"
#include "server.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kConvergence = 3 };

void add_input_options(CLI::App* cmd, fusedpath::cli::RunConfig& cfg) {
    cmd->add_option("--data", cfg.data, "CSV file with one row per observation")->required();
    cmd->add_option("--schema", cfg.schema, "key=value schema file");
    cmd->add_option("--out", cfg.out, "output directory")->capture_default_str();
}

void add_fit_options(CLI::App* cmd, fusedpath::cli::RunConfig& cfg) {
    cmd->add_option("--grid-size", cfg.fit.grid_size, "positive lambda grid points (plus lambda = 0)")->capture_default_str();
    cmd->add_option("--lambda-min-ratio", cfg.fit.lambda_min_ratio, "smallest positive lambda / lambda_max")->capture_default_str();
    cmd->add_option("--max-iter", cfg.fit.max_iter, "ADMM iteration limit per lambda")->capture_default_str();
}

void add_cv_options(CLI::App* cmd, fusedpath::cli::RunConfig& cfg) {
    cmd->add_option("--k", cfg.k, "cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
    cmd->add_option("--seed", cfg.seed, "fold assignment seed")->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    using namespace fusedpath;
    cli::RunConfig cfg;
    std::string thresholds;

    CLI::App app{"Fused pooled regression across classes: summaries, regularization path, selection and evaluation"};
    app.require_subcommand(1);

    auto* summarize = app.add_subcommand("summarize", "descriptive statistics, class sizes, missingness");
    add_input_options(summarize, cfg);

    auto* path = app.add_subcommand("path", "solve the full regularization path");
    add_input_options(path, cfg);
    add_fit_options(path, cfg);

    auto* cv = app.add_subcommand("cv", "select lambda by cross-validation and AIC");
    add_input_options(cv, cfg);
    add_fit_options(cv, cfg);
    add_cv_options(cv, cfg);

    auto* evaluate = app.add_subcommand("evaluate", "compare CV selected, new pooled, classic pooled and separate fits");
    add_input_options(evaluate, cfg);
    add_fit_options(evaluate, cfg);
    add_cv_options(evaluate, cfg);
    evaluate->add_option("--thresholds", thresholds, "star boundaries t3,t4,t5")->required();

    auto* serve = app.add_subcommand("serve", "serve path and selection data as JSON over HTTP");
    add_input_options(serve, cfg);
    add_fit_options(serve, cfg);
    add_cv_options(serve, cfg);
    serve->add_option("--port", cfg.port, "TCP port")->capture_default_str()->check(CLI::Range(1, 65535));
    serve->add_option("--host", cfg.host, "bind address")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (!thresholds.empty()) cfg.thresholds = StarThresholds::parse(thresholds);
        if (*summarize) return cli::cmd_summarize(cfg, std::cerr);
        if (*path) return cli::cmd_path(cfg, std::cerr);
        if (*cv) return cli::cmd_cv(cfg, std::cerr);
        if (*evaluate) return cli::cmd_evaluate(cfg, std::cerr);
        if (*serve) return cli::cmd_serve(cfg, std::cerr);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const RankDeficientError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const ConvergenceError& e) {
        std::cerr << "convergence failure: " << e.what() << '\n';
        return kConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
