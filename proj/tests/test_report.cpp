#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qanno/errors.hpp"
#include "qanno/report.hpp"

using namespace qanno;

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

RunConfig small_config() {
    RunConfig config;
    config.mode = ModelMode::Synthetic;
    config.batch_size = 50;
    config.seed = 9;
    config.synthetic.doc = SyntheticCurve{0.2, 0.9, 100.0};
    config.synthetic.span = SyntheticCurve{0.2, 0.9, 100.0};
    config.policy.hidden_units = 8;
    config.policy.epochs = 3;
    config.policy.learning_rate = 0.1;
    return config;
}

}  // namespace

TEST_CASE("real formatting is fixed at six decimals") {
    CHECK(format_real(0.0) == "0.000000");
    CHECK(format_real(1.0 / 3.0) == "0.333333");
    CHECK(format_real(22.070312500000007) == "22.070313");
}

TEST_CASE("summary savings against the manual equivalent") {
    // Table-style cells: document total 79.8 against a 102.4 manual equivalent.
    Ledger ledger;
    ledger.append({"q1", 1, Level::Document, Action::Sem, true, 79.8, true});
    CostMatrix costs{102.4, 1.0, 1.0, 1.0};
    auto dir = fresh_dir("qanno_report_savings");
    write_summary_csv(dir / "summary.csv", ledger, costs);
    const std::string content = slurp(dir / "summary.csv");
    // (102.4 - 79.8) / 102.4 * 100 = 22.0703125; IEEE doubles land a hair above
    // the decimal tie, so six-decimal output rounds up.
    CHECK(content.find("document,79.800000,102.400000,22.070313\n") != std::string::npos);
    CHECK(content.find("span,0.000000,0.000000,0.000000\n") != std::string::npos);

    const double savings = (costs.c0_doc - 79.8) / costs.c0_doc * 100.0;
    CHECK(savings == doctest::Approx(22.0703125).epsilon(1e-9));
}

TEST_CASE("manual runs report zero savings at every level") {
    RunConfig config = small_config();
    config.baseline = BaselineKind::Manual;
    auto questions = generate_synthetic_questions(120);
    RunResult result = run_experiment(config, questions);
    auto dir = fresh_dir("qanno_report_manual");
    emit_report(result, config, dir);
    const std::string content = slurp(dir / "summary.csv");
    CHECK(content ==
          "level,total_cost,manual_equivalent_cost,savings_percent\n"
          "document,120.000000,120.000000,0.000000\n"
          "span,120.000000,120.000000,0.000000\n"
          "overall,240.000000,240.000000,0.000000\n");
}

TEST_CASE("empty stats produce a header-only batches.csv") {
    auto dir = fresh_dir("qanno_report_empty");
    write_batches_csv(dir / "batches.csv", {});
    CHECK(slurp(dir / "batches.csv") ==
          "batch_index,questions,doc_man,doc_sem,doc_sem_success,doc_cost,"
          "span_man,span_sem,span_sem_success,span_cost,avg_cost,running_mean,"
          "doc_hit_rate,span_hit_rate\n");
}

TEST_CASE("summary overall row is the exact sum of the level rows") {
    RunConfig config = small_config();
    auto questions = generate_synthetic_questions(200);
    RunResult result = run_experiment(config, questions);
    auto dir = fresh_dir("qanno_report_sum");
    emit_report(result, config, dir);

    std::ifstream in(dir / "summary.csv");
    std::string line;
    std::getline(in, line);  // header
    double doc_total = 0, span_total = 0, overall_total = 0;
    while (std::getline(in, line)) {
        const auto first = line.find(',');
        const auto second = line.find(',', first + 1);
        const std::string level = line.substr(0, first);
        const double value = std::stod(line.substr(first + 1, second - first - 1));
        if (level == "document") doc_total = value;
        if (level == "span") span_total = value;
        if (level == "overall") overall_total = value;
    }
    CHECK(overall_total == doctest::Approx(doc_total + span_total).epsilon(1e-9));
    CHECK(result.ledger.overall_total() ==
          result.ledger.total(Level::Document) + result.ledger.total(Level::Span));
}

TEST_CASE("report from a saved ledger reproduces the CSVs byte for byte") {
    RunConfig config = small_config();
    auto questions = generate_synthetic_questions(150);
    RunResult result = run_experiment(config, questions);
    auto dir = fresh_dir("qanno_report_roundtrip");
    emit_report(result, config, dir);

    auto rerun = fresh_dir("qanno_report_roundtrip2");
    emit_from_saved_ledger(dir / "ledger.jsonl", rerun);
    CHECK(slurp(rerun / "batches.csv") == slurp(dir / "batches.csv"));
    CHECK(slurp(rerun / "summary.csv") == slurp(dir / "summary.csv"));
}

TEST_CASE("two identical runs emit byte-identical reports") {
    RunConfig config = small_config();
    auto questions = generate_synthetic_questions(150);
    auto dir_a = fresh_dir("qanno_report_det_a");
    auto dir_b = fresh_dir("qanno_report_det_b");
    emit_report(run_experiment(config, questions), config, dir_a);
    emit_report(run_experiment(config, questions), config, dir_b);
    for (const char* name : {"batches.csv", "summary.csv", "annotations.jsonl", "ledger.jsonl"}) {
        CHECK(slurp(dir_a / name) == slurp(dir_b / name));
    }
}

TEST_CASE("sweep emits one row per ratio and matches the budget run") {
    RunConfig config = small_config();
    config.batch_size = 100;
    SweepSpec spec;
    spec.ratios = {0.2, 0.4, 0.6};
    auto questions = generate_synthetic_questions(300);
    auto dir = fresh_dir("qanno_report_sweep");
    SweepResult sweep = run_sweep(config, spec, questions, 2, dir);
    REQUIRE(sweep.rows.size() == 3);

    std::ifstream in(dir / "sweep.csv");
    std::string line;
    int rows = 0;
    std::getline(in, line);
    CHECK(line == "ratio,avg_cost_per_sample,annotated_under_budget");
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3);

    // The replayed budget count equals an actual budget-constrained run.
    RunConfig point = config;
    point.costs = CostMatrix{1.0, 0.4, 1.0, 0.4};
    point.budget = 0.5 * 2.0 * 300;  // default used by the sweep
    BudgetResult budget = run_budget_experiment(point, questions);
    CHECK(sweep.rows[1].annotated_under_budget == doctest::Approx(budget.annotated));

    CHECK(std::filesystem::exists(dir / "ratio_0.2" / "batches.csv"));
    CHECK(std::filesystem::exists(dir / "ratio_0.4" / "summary.csv"));
    CHECK(std::filesystem::exists(dir / "ratio_0.6" / "ledger.jsonl"));
}

TEST_CASE("ratio list construction") {
    auto ratios = SweepSpec::ratio_range(0.05, 0.95, 0.05);
    CHECK(ratios.size() == 19);
    CHECK(ratios.front() == doctest::Approx(0.05));
    CHECK(ratios.back() == doctest::Approx(0.95));
    SweepSpec bad;
    bad.ratios = {0.5, 0.4};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

namespace {

std::filesystem::path write_config(const std::string& name, const std::string& body) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << body;
    return path;
}

}  // namespace

TEST_CASE("config parsing fills defaults and rejects junk") {
    auto path = write_config("qanno_cfg_ok.json", R"({
        "mode": "synthetic",
        "question_count": 50,
        "n": 4,
        "seed": 13,
        "costs": {"c0_doc": 2.0, "c1_doc": 0.5, "c0_span": 1.0, "c1_span": 0.25}
    })");
    RunConfig config = load_run_config(path);
    CHECK(config.n == 4);
    CHECK(config.feature_width == 8);  // 2n unless overridden
    CHECK(config.batch_size == 1000);
    CHECK(config.seed == 13);
    CHECK(config.costs.c1_span == doctest::Approx(0.25));
    CHECK(config.policy.hidden_units == 128);
    CHECK(config.policy.dropout == doctest::Approx(0.3));
    CHECK(config.policy.learning_rate == doctest::Approx(0.0001));
    CHECK(config.policy.epochs == 25);
    CHECK(config.baseline == BaselineKind::Framework);

    auto unknown = write_config("qanno_cfg_unknown.json", R"({"mode":"synthetic","batchsize":3})");
    CHECK_THROWS_WITH_AS(load_run_config(unknown), doctest::Contains("batchsize"), ConfigError);

    auto nested = write_config("qanno_cfg_nested.json",
                               R"({"mode":"synthetic","question_count":5,"policy":{"k":16}})");
    CHECK_THROWS_AS(load_run_config(nested), ConfigError);

    auto negative = write_config("qanno_cfg_neg.json",
                                 R"({"mode":"synthetic","question_count":5,"costs":{"c0_doc":-1}})");
    CHECK_THROWS_AS(load_run_config(negative), ConfigError);

    CHECK_THROWS_AS(load_run_config("/nonexistent/cfg.json"), IoError);
}

TEST_CASE("mturk preset sets the reported compensation ratio") {
    auto path = write_config("qanno_cfg_mturk.json",
                             R"({"mode":"synthetic","question_count":5,"cost_preset":"mturk"})");
    RunConfig config = load_run_config(path);
    CHECK(config.costs.c0_doc == doctest::Approx(1.0));
    CHECK(config.costs.c1_doc == doctest::Approx(3.2 / 5.9).epsilon(1e-12));
    CHECK(config.costs.c1_span == doctest::Approx(3.2 / 5.9).epsilon(1e-12));

    auto both = write_config(
        "qanno_cfg_both.json",
        R"({"mode":"synthetic","question_count":5,"cost_preset":"mturk","costs":{"c0_doc":1}})");
    CHECK_THROWS_AS(load_run_config(both), ConfigError);
}

TEST_CASE("sweep spec defaults to the 19-ratio grid") {
    auto path = write_config("qanno_cfg_sweep_default.json", R"({"mode":"synthetic","question_count":5})");
    SweepSpec spec = load_sweep_spec(path);
    CHECK(spec.ratios.size() == 19);
    CHECK(spec.repetitions == 1);

    auto custom = write_config("qanno_cfg_sweep_custom.json",
                               R"({"mode":"synthetic","question_count":5,
                                   "sweep":{"start":0.1,"stop":0.5,"step":0.2,"repetitions":2}})");
    SweepSpec custom_spec = load_sweep_spec(custom);
    CHECK(custom_spec.ratios.size() == 3);
    CHECK(custom_spec.repetitions == 2);
}

TEST_CASE("sweep repetitions average rows and keep per-rep directories") {
    RunConfig config = small_config();
    config.batch_size = 60;
    SweepSpec spec;
    spec.ratios = {0.3};
    spec.repetitions = 2;
    auto questions = generate_synthetic_questions(120);
    auto dir = fresh_dir("qanno_report_sweep_reps");
    SweepResult sweep = run_sweep(config, spec, questions, 1, dir);
    REQUIRE(sweep.rows.size() == 1);
    CHECK(std::filesystem::exists(dir / "ratio_0.3_rep1" / "summary.csv"));
    CHECK(std::filesystem::exists(dir / "ratio_0.3_rep2" / "summary.csv"));

    RunConfig point = config;
    point.costs = CostMatrix{1.0, 0.3, 1.0, 0.3};
    point.seed = config.seed;
    const double total_a = run_experiment(point, questions).ledger.overall_total();
    point.seed = config.seed + 1;
    const double total_b = run_experiment(point, questions).ledger.overall_total();
    CHECK(sweep.rows[0].avg_cost_per_sample ==
          doctest::Approx((total_a + total_b) / 2.0 / 120.0).epsilon(1e-12));
}

TEST_CASE("loading a ledger rejects foreign files") {
    auto bogus = write_config("qanno_ledger_bogus.jsonl", R"({"type":"other"})");
    CHECK_THROWS_AS(load_ledger(bogus), ConfigError);
    CHECK_THROWS_AS(load_ledger("/nonexistent/ledger.jsonl"), IoError);
}

TEST_CASE("unwritable output directory raises an I/O error without partial files") {
    Ledger ledger;
    ledger.append({"q1", 1, Level::Document, Action::Man, std::nullopt, 1.0, false});
    CHECK_THROWS_AS(write_summary_csv("/proc/qanno_not_writable/summary.csv", ledger, CostMatrix{}),
                    IoError);
}
