#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qanno/config.hpp"
#include "qanno/errors.hpp"
#include "qanno/report.hpp"

namespace {

using namespace qanno;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> baseline;
    std::string out_dir = "out";
    std::optional<double> budget;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
    auto* config = cmd->add_option("--config", args.config_path, "run configuration (JSON)");
    if (config_required) config->required();
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--baseline", args.baseline,
                    "override the baseline (framework|manual|oracle|random|no-qa-update)");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--budget", args.budget, "budget in price units");
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig config = load_run_config(args.config_path);
    if (args.seed.has_value()) config.seed = *args.seed;
    if (args.baseline.has_value()) config.baseline = parse_baseline(*args.baseline);
    if (args.budget.has_value()) {
        if (!(*args.budget > 0.0)) throw ConfigError("budget must be > 0");
        config.budget = *args.budget;
    }
    return config;
}

std::vector<Question> resolve_questions(const RunConfig& config) {
    if (!config.questions_path.empty()) return load_questions(config.questions_path);
    if (config.mode == ModelMode::Synthetic && config.synthetic.question_count >= 1) {
        return generate_synthetic_questions(config.synthetic.question_count);
    }
    throw ConfigError("no question source: give 'questions' or a synthetic question_count");
}

std::vector<double> parse_ratio_arg(const std::string& arg) {
    double start = 0.0, stop = 0.0, step = 0.0;
    if (std::sscanf(arg.c_str(), "%lf:%lf:%lf", &start, &stop, &step) != 3) {
        throw ConfigError("--ratios expects START:STOP:STEP");
    }
    return SweepSpec::ratio_range(start, stop, step);
}

int run_command(const CommonArgs& args) {
    const RunConfig config = resolve_config(args);
    const auto questions = resolve_questions(config);
    const RunResult result = run_experiment(config, questions);
    emit_report(result, config, args.out_dir);
    std::cout << "annotated " << result.samples.size() << " questions, total cost "
              << format_real(result.ledger.overall_total()) << "\n";
    return 0;
}

int sweep_command(const CommonArgs& args, const std::string& ratios_arg, int jobs) {
    RunConfig config = resolve_config(args);
    SweepSpec spec = load_sweep_spec(args.config_path);
    if (!ratios_arg.empty()) spec.ratios = parse_ratio_arg(ratios_arg);
    const auto questions = resolve_questions(config);
    const SweepResult sweep =
        run_sweep(config, spec, questions, jobs, std::filesystem::path(args.out_dir));
    std::cout << "sweep finished: " << sweep.rows.size() << " ratios -> "
              << (std::filesystem::path(args.out_dir) / "sweep.csv").string() << "\n";
    return 0;
}

int budget_command(const CommonArgs& args) {
    const RunConfig config = resolve_config(args);
    if (!config.budget.has_value()) throw ConfigError("budget run requires --budget or config.budget");
    const auto questions = resolve_questions(config);
    const BudgetResult result = run_budget_experiment(config, questions);
    if (result.budget_too_small) {
        std::cerr << "warning: budget " << format_real(*config.budget)
                  << " is below the worst-case cost of a single question; nothing annotated\n";
    }
    emit_report(result.run, config, args.out_dir);
    std::cout << "annotated " << result.annotated << " of " << questions.size()
              << " questions within budget " << format_real(*config.budget) << ", spent "
              << format_real(result.run.ledger.overall_total()) << "\n";
    return 0;
}

int report_command(const std::string& ledger_path, const std::string& out_dir) {
    emit_from_saved_ledger(ledger_path, out_dir);
    std::cout << "reports written to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cost-effective QA annotation simulator"};
    app.require_subcommand(1);

    CommonArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "annotate a question set with one configuration");
    add_common(run_cmd, run_args, true);

    CommonArgs sweep_args;
    std::string ratios_arg;
    int jobs = 1;
    auto* sweep_cmd = app.add_subcommand("sweep", "cost-ratio sensitivity sweep");
    add_common(sweep_cmd, sweep_args, true);
    sweep_cmd->add_option("--ratios", ratios_arg, "ratio range as START:STOP:STEP");
    sweep_cmd->add_option("--jobs", jobs, "concurrent sweep points")->check(CLI::PositiveNumber);

    CommonArgs budget_args;
    auto* budget_cmd = app.add_subcommand("budget", "annotate under a fixed budget");
    add_common(budget_cmd, budget_args, true);

    std::string ledger_path;
    std::string report_out = "out";
    auto* report_cmd = app.add_subcommand("report", "recompute CSV reports from a saved ledger");
    report_cmd->add_option("ledger", ledger_path, "path to ledger.jsonl")->required();
    report_cmd->add_option("--out", report_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 1;
    }

    try {
        if (run_cmd->parsed()) return run_command(run_args);
        if (sweep_cmd->parsed()) return sweep_command(sweep_args, ratios_arg, jobs);
        if (budget_cmd->parsed()) return budget_command(budget_args);
        if (report_cmd->parsed()) return report_command(ledger_path, report_out);
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const IngestError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
