#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "qanno/annotation_loop.hpp"
#include "qanno/errors.hpp"
#include "qanno/sim_annotator.hpp"

using namespace qanno;

namespace {

RunConfig base_config() {
    RunConfig config;
    config.mode = ModelMode::Synthetic;
    config.n = 5;
    config.feature_width = 10;
    config.batch_size = 1000;
    config.seed = 42;
    config.costs = CostMatrix{1.0, 1.0 / 3.0, 1.0, 1.0 / 3.0};
    config.policy.hidden_units = 16;
    config.policy.epochs = 5;
    config.policy.learning_rate = 0.1;
    return config;
}

SyntheticCurve pinned(double h) { return SyntheticCurve{h, h, 1000.0}; }

void check_conservation(const RunResult& result) {
    double doc = 0.0, span = 0.0;
    for (const auto& s : result.samples) {
        doc += s.doc_path.cost;
        span += s.span_path.cost;
    }
    CHECK(result.ledger.total(Level::Document) == doc);
    CHECK(result.ledger.total(Level::Span) == span);
    CHECK(result.ledger.overall_total() == doc + span);
}

}  // namespace

TEST_CASE("annotate_question: successful feedback costs c1") {
    RunConfig config = base_config();
    config.baseline = BaselineKind::Oracle;
    config.synthetic.doc = pinned(1.0);
    config.synthetic.span = pinned(1.0);
    SyntheticQaModel model(config.synthetic.doc, config.synthetic.span);
    PolicyState pd(12, 16, 0.0, 32, Rng(1)), ps(22, 16, 0.0, 32, Rng(2));
    Ledger ledger;
    Rng model_rng(3), coin(4);
    LoopContext ctx{model, pd, ps, config, ledger, model_rng, coin, 1};

    Question q{"q1", "text", "gold_doc", "answer 1"};
    AnnotationSample sample = annotate_question(ctx, q);
    CHECK(sample.doc_path.action == Action::Sem);
    CHECK(sample.doc_path.sem_success == true);
    CHECK(sample.doc_path.cost == doctest::Approx(1.0 / 3.0));
    CHECK(sample.annotated_doc_id == "gold_doc");
    CHECK(sample.span_path.cost == doctest::Approx(1.0 / 3.0));
    CHECK(sample.annotated_span.surface_text == gold_answer_form(q));
    CHECK(ledger.overall_total() == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("annotate_question: failed feedback pays both prices and labels Man-optimal") {
    RunConfig config = base_config();
    config.baseline = BaselineKind::Framework;
    config.synthetic.doc = pinned(0.0);
    config.synthetic.span = pinned(0.0);
    SyntheticQaModel model(config.synthetic.doc, config.synthetic.span);
    PolicyState pd(12, 16, 0.0, 32, Rng(1)), ps(22, 16, 0.0, 32, Rng(2));
    // A single Sem-optimal example per level forces the untrained frequency to 1
    // after the (skipped) update, so the policies choose feedback.
    Rng warm(5);
    pd.add_example(std::vector<double>(12, 0.0), 1);
    ps.add_example(std::vector<double>(22, 0.0), 1);
    pd.train(1, 0.1, warm);
    ps.train(1, 0.1, warm);
    Ledger ledger;
    Rng model_rng(3), coin(4);
    LoopContext ctx{model, pd, ps, config, ledger, model_rng, coin, 1};

    Question q{"q1", "text", "gold_doc", "answer 1"};
    AnnotationSample sample = annotate_question(ctx, q);
    CHECK(sample.span_path.action == Action::Sem);
    CHECK(sample.span_path.sem_success == false);
    CHECK(sample.span_path.cost == doctest::Approx(1.0 + 1.0 / 3.0));
    // the fallback still annotates with gold
    CHECK(sample.annotated_doc_id == "gold_doc");
    CHECK(sample.annotated_span.surface_text == gold_answer_form(q));
    // the collected label says Man would have been optimal
    CHECK(ps.pool().back().label == 0);
    CHECK(pd.pool().back().label == 0);
}

TEST_CASE("annotate_question: two manual levels cost exactly two units") {
    RunConfig config = base_config();
    config.baseline = BaselineKind::Manual;
    config.synthetic.doc = pinned(0.5);
    config.synthetic.span = pinned(0.5);
    SyntheticQaModel model(config.synthetic.doc, config.synthetic.span);
    PolicyState pd(12, 16, 0.0, 32, Rng(1)), ps(22, 16, 0.0, 32, Rng(2));
    Ledger ledger;
    Rng model_rng(3), coin(4);
    LoopContext ctx{model, pd, ps, config, ledger, model_rng, coin, 1};

    AnnotationSample sample = annotate_question(ctx, {"q1", "text", "gold_doc", "answer 1"});
    CHECK(sample.doc_path.action == Action::Man);
    CHECK(sample.span_path.action == Action::Man);
    CHECK(sample.doc_path.cost + sample.span_path.cost == doctest::Approx(2.0));
}

TEST_CASE("manual baseline run: 2000 questions cost 4000") {
    RunConfig config = base_config();
    config.baseline = BaselineKind::Manual;
    auto questions = generate_synthetic_questions(2000);
    RunResult result = run_experiment(config, questions);
    CHECK(result.ledger.overall_total() == doctest::Approx(4000.0));
    CHECK(result.samples.size() == 2000);
    CHECK(result.batches.size() == 2);
    check_conservation(result);
}

TEST_CASE("oracle baseline matches its closed form at a pinned hit rate") {
    RunConfig config = base_config();
    config.baseline = BaselineKind::Oracle;
    config.synthetic.doc = pinned(0.5);
    config.synthetic.span = pinned(0.5);
    auto questions = generate_synthetic_questions(10000);
    RunResult result = run_experiment(config, questions);
    const double expected = 0.5 * (1.0 / 3.0) + 0.5 * 1.0;  // h*c1 + (1-h)*c0
    for (Level level : {Level::Document, Level::Span}) {
        const double avg = result.ledger.total(level) / 10000.0;
        CHECK(std::abs(avg - expected) / expected < 0.01);
    }
    check_conservation(result);
}

TEST_CASE("framework with beta = 1 stays within 2% of manual") {
    RunConfig config = base_config();
    config.costs = CostMatrix{1.0, 1.0, 1.0, 1.0};  // c1 = c0 -> beta = 1
    config.batch_size = 300;
    config.synthetic.doc = SyntheticCurve{0.3, 0.9, 500.0};
    config.synthetic.span = SyntheticCurve{0.3, 0.9, 500.0};
    auto questions = generate_synthetic_questions(1200);

    RunConfig manual = config;
    manual.baseline = BaselineKind::Manual;
    const double manual_total = run_experiment(manual, questions).ledger.overall_total();
    const double framework_total = run_experiment(config, questions).ledger.overall_total();
    CHECK(framework_total <= manual_total * 1.02);
}

TEST_CASE("every question yields exactly one gold-equal sample") {
    RunConfig config = base_config();
    config.baseline = BaselineKind::Random;
    config.batch_size = 250;
    config.synthetic.doc = SyntheticCurve{0.2, 0.9, 400.0};
    config.synthetic.span = SyntheticCurve{0.2, 0.9, 400.0};
    auto questions = generate_synthetic_questions(1000);
    RunResult result = run_experiment(config, questions);

    REQUIRE(result.samples.size() == questions.size());
    std::set<std::string> seen;
    for (std::size_t i = 0; i < result.samples.size(); ++i) {
        const auto& s = result.samples[i];
        CHECK(s.question.question_id == questions[i].question_id);
        CHECK(seen.insert(s.question.question_id).second);
        CHECK(s.annotated_doc_id == s.question.gold_doc_id);
        CHECK(s.annotated_span.surface_text == gold_answer_form(s.question));
    }
    check_conservation(result);
}

TEST_CASE("identical config and seed reproduce the ledger exactly") {
    RunConfig config = base_config();
    config.batch_size = 200;
    config.synthetic.doc = SyntheticCurve{0.1, 0.9, 300.0};
    config.synthetic.span = SyntheticCurve{0.1, 0.9, 300.0};
    auto questions = generate_synthetic_questions(600);

    RunResult a = run_experiment(config, questions);
    RunResult b = run_experiment(config, questions);
    REQUIRE(a.ledger.entries().size() == b.ledger.entries().size());
    for (std::size_t i = 0; i < a.ledger.entries().size(); ++i) {
        const auto& ea = a.ledger.entries()[i];
        const auto& eb = b.ledger.entries()[i];
        CHECK(ea.question_id == eb.question_id);
        CHECK(ea.action == eb.action);
        CHECK(ea.cost == eb.cost);
        CHECK(ea.sem_success == eb.sem_success);
        CHECK(ea.gold_in_topn == eb.gold_in_topn);
    }
}

TEST_CASE("budget: manual span-only annotates budget / c0 questions") {
    RunConfig config = base_config();
    config.baseline = BaselineKind::Manual;
    config.scope = LevelScope::SpanOnly;
    config.budget = 100.0;
    auto questions = generate_synthetic_questions(500);
    BudgetResult result = run_budget_experiment(config, questions);
    CHECK(result.annotated == 100);
    CHECK(result.run.ledger.overall_total() == doctest::Approx(100.0));
    CHECK(result.run.ledger.total(Level::Document) == 0.0);
}

TEST_CASE("budget: pinned oracle annotates budget / c1 questions") {
    RunConfig config = base_config();
    config.baseline = BaselineKind::Oracle;
    config.scope = LevelScope::SpanOnly;
    config.budget = 100.0;
    config.synthetic.doc = pinned(1.0);
    config.synthetic.span = pinned(1.0);
    auto questions = generate_synthetic_questions(500);
    BudgetResult result = run_budget_experiment(config, questions);
    CHECK(result.annotated == 300);
}

TEST_CASE("budget smaller than one worst-case question annotates nothing") {
    RunConfig config = base_config();
    config.baseline = BaselineKind::Manual;
    config.budget = 0.1;  // worst case is 2.0 for two manual levels
    auto questions = generate_synthetic_questions(10);
    BudgetResult result = run_budget_experiment(config, questions);
    CHECK(result.annotated == 0);
    CHECK(result.budget_too_small);
    CHECK(result.run.ledger.empty());
}

TEST_CASE("worst-case question cost by baseline") {
    RunConfig config = base_config();
    SyntheticQaModel pinned_model(pinned(1.0), pinned(1.0));
    SyntheticQaModel learning_model(SyntheticCurve{0.1, 0.9, 100.0}, SyntheticCurve{0.1, 0.9, 100.0});

    config.baseline = BaselineKind::Manual;
    CHECK(worst_case_question_cost(config, learning_model) == doctest::Approx(2.0));

    config.baseline = BaselineKind::Framework;
    CHECK(worst_case_question_cost(config, learning_model) == doctest::Approx(2.0 + 2.0 / 3.0));

    config.baseline = BaselineKind::Oracle;
    CHECK(worst_case_question_cost(config, learning_model) == doctest::Approx(2.0));
    CHECK(worst_case_question_cost(config, pinned_model) == doctest::Approx(2.0 / 3.0));

    // c1 > c0 puts the threshold above 1: feedback unreachable, worst case manual
    config.baseline = BaselineKind::Framework;
    config.costs = CostMatrix{1.0, 1.5, 1.0, 1.5};
    CHECK(worst_case_question_cost(config, learning_model) == doctest::Approx(2.0));
}

TEST_CASE("no-qa-update keeps the synthetic model frozen") {
    RunConfig config = base_config();
    config.baseline = BaselineKind::NoQaUpdate;
    config.batch_size = 100;
    config.synthetic.doc = SyntheticCurve{0.3, 0.9, 200.0};
    config.synthetic.span = SyntheticCurve{0.3, 0.9, 200.0};
    auto questions = generate_synthetic_questions(300);
    auto model = make_qa_model(config, nullptr);
    auto* synthetic = dynamic_cast<SyntheticQaModel*>(model.get());
    run_experiment(config, questions, *model);
    CHECK(synthetic->training_samples(Level::Document) == 0);
    CHECK(synthetic->training_samples(Level::Span) == 0);

    config.baseline = BaselineKind::Framework;
    auto model2 = make_qa_model(config, nullptr);
    auto* synthetic2 = dynamic_cast<SyntheticQaModel*>(model2.get());
    run_experiment(config, questions, *model2);
    CHECK(synthetic2->training_samples(Level::Document) == 300);
}

TEST_CASE("batch stats are re-derivable and consistent") {
    RunConfig config = base_config();
    config.baseline = BaselineKind::Random;
    config.batch_size = 128;
    auto questions = generate_synthetic_questions(400);
    RunResult result = run_experiment(config, questions);
    REQUIRE(result.batches.size() == 4);  // 128+128+128+16

    int total_questions = 0;
    for (const auto& b : result.batches) {
        CHECK(b.doc_man + b.doc_sem == b.questions);
        CHECK(b.span_man + b.span_sem == b.questions);
        CHECK(b.doc_sem_success <= b.doc_sem);
        CHECK(b.span_sem_success <= b.span_sem);
        total_questions += b.questions;
    }
    CHECK(total_questions == 400);
    CHECK(result.batches[3].questions == 16);

    auto rederived = derive_batch_stats(result.ledger);
    REQUIRE(rederived.size() == result.batches.size());
    for (std::size_t i = 0; i < rederived.size(); ++i) {
        CHECK(rederived[i].avg_cost == result.batches[i].avg_cost);
        CHECK(rederived[i].running_mean == result.batches[i].running_mean);
        CHECK(rederived[i].doc_hit_rate == result.batches[i].doc_hit_rate);
    }
}

TEST_CASE("span-only scope skips the document stage") {
    RunConfig config = base_config();
    config.scope = LevelScope::SpanOnly;
    config.baseline = BaselineKind::Manual;
    auto questions = generate_synthetic_questions(50);
    RunResult result = run_experiment(config, questions);
    CHECK(result.ledger.total(Level::Document) == 0.0);
    CHECK(result.ledger.total(Level::Span) == doctest::Approx(50.0));
    for (const auto& e : result.ledger.entries()) CHECK(e.level == Level::Span);
    for (const auto& s : result.samples) CHECK(s.annotated_doc_id == s.question.gold_doc_id);
}

TEST_CASE("empty question list is rejected") {
    RunConfig config = base_config();
    std::vector<Question> none;
    CHECK_THROWS_AS(run_experiment(config, none), ConfigError);
}

TEST_CASE("inconsistent questions are rejected before any annotation") {
    RunConfig config = base_config();
    auto questions = generate_synthetic_questions(5);
    questions[3].gold_answer.clear();
    CHECK_THROWS_AS(run_experiment(config, questions), ConfigError);
}

TEST_CASE("a policy warm start enables feedback from the first batch") {
    // Single batch, hit rate pinned to 1: cold start must annotate manually, a
    // warm-started policy can choose feedback immediately and halve the cost.
    RunConfig config = base_config();
    config.batch_size = 100;
    config.synthetic.doc = pinned(1.0);
    config.synthetic.span = pinned(1.0);
    config.policy.epochs = 40;
    config.policy.learning_rate = 0.5;
    auto questions = generate_synthetic_questions(100);

    const double cold_total = run_experiment(config, questions).ledger.overall_total();
    CHECK(cold_total == doctest::Approx(200.0));  // all manual

    // Success-shaped features (high top score) labeled Sem-optimal, failure-shaped
    // ones Man-optimal, mirroring what extract_policy_features produces.
    auto seed_path = std::filesystem::temp_directory_path() / "qanno_warm_start.jsonl";
    {
        std::ofstream out(seed_path);
        Rng rng(55);
        for (int i = 0; i < 200; ++i) {
            for (int level = 0; level < 2; ++level) {
                const bool success = i % 2 == 0;
                const double top = success ? rng.uniform(1.0, 1.5) : rng.uniform(0.1, 0.7);
                const int dims = level == 0 ? 12 : 22;
                std::string features = "1.000";
                for (int d = 1; d < dims - 2; ++d) {
                    features += "," + std::to_string(rng.uniform(0.0, 1.0));
                }
                char tail[64];
                std::snprintf(tail, sizeof(tail), ",%.6f,0.5", std::log(1.0 + top));
                features += tail;
                out << R"({"level":")" << (level == 0 ? "document" : "span")
                    << R"(","features":[)" << features << R"(],"label":)" << (success ? 1 : 0)
                    << "}\n";
            }
        }
    }
    config.policy_warm_start = seed_path;
    const double warm_total = run_experiment(config, questions).ledger.overall_total();
    CHECK(warm_total < cold_total);
    CHECK(warm_total == doctest::Approx(200.0 / 3.0).epsilon(0.02));  // all feedback at c1 = 1/3
}

TEST_CASE("lexical span-only run works against a corpus") {
    std::filesystem::path dir = std::filesystem::temp_directory_path();
    auto corpus_path = dir / "qanno_loop_corpus.jsonl";
    {
        std::ofstream out(corpus_path);
        out << R"({"doc_id":"d1","title":"","text":"the fox jumped over the lazy dog"})" << "\n";
        out << R"({"doc_id":"d2","title":"","text":"rain in spain stays in the plain"})" << "\n";
    }
    RunConfig config = base_config();
    config.mode = ModelMode::Lexical;
    config.scope = LevelScope::SpanOnly;
    config.baseline = BaselineKind::Manual;
    config.lexical.corpus_path = corpus_path;
    std::vector<Question> questions = {
        {"q1", "what jumped over the dog", "d1", "fox"},
        {"q2", "where does rain stay", "d2", "plain"},
    };
    RunResult result = run_experiment(config, questions);
    CHECK(result.samples.size() == 2);
    CHECK(result.samples[0].annotated_span.surface_text == "fox");
    CHECK(result.samples[0].annotated_span.start_token == 1);
    CHECK(result.ledger.total(Level::Document) == 0.0);

    Question unknown{"q3", "what", "d9", "x"};
    std::vector<Question> bad = {unknown};
    CHECK_THROWS_AS(run_experiment(config, bad), ConfigError);
}
