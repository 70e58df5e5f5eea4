#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qanno/cost_model.hpp"
#include "qanno/policy.hpp"
#include "qanno/qa_model.hpp"

namespace qanno {

// How one annotation level of one question was resolved.
struct PathRecord {
    Action action = Action::Man;
    std::optional<bool> sem_success;
    double cost = 0.0;
    bool gold_in_topn = false;
};

struct AnnotationSample {
    Question question;
    std::string annotated_doc_id;
    Candidate annotated_span;
    PathRecord doc_path;
    PathRecord span_path;
};

enum class BaselineKind { Framework, Manual, Oracle, Random, NoQaUpdate };
enum class LevelScope { Both, SpanOnly };
enum class ModelMode { Lexical, Synthetic };

BaselineKind parse_baseline(const std::string& name);  // throws ConfigError on unknown names
const char* to_string(BaselineKind baseline);

struct PolicyHyperparams {
    int hidden_units = 128;
    double dropout = 0.3;
    double learning_rate = 0.0001;
    int epochs = 25;
    int minibatch = 32;
};

struct LexicalParams {
    std::filesystem::path corpus_path;
    bool bigrams = false;
    std::vector<std::string> stopwords;
    double answer_prior_weight = 0.2;
};

struct SyntheticParams {
    SyntheticCurve doc;
    SyntheticCurve span;
    int question_count = 0;  // generated questions when no question file is given
};

struct RunConfig {
    ModelMode mode = ModelMode::Synthetic;
    BaselineKind baseline = BaselineKind::Framework;
    LevelScope scope = LevelScope::Both;
    int n = 5;
    int feature_width = 10;  // 2n unless overridden
    int batch_size = 1000;
    CostMatrix costs;
    std::optional<double> budget;
    std::uint64_t seed = 0;
    std::filesystem::path questions_path;  // optional for synthetic runs
    LexicalParams lexical;
    SyntheticParams synthetic;
    PolicyHyperparams policy;
    std::filesystem::path policy_warm_start;  // optional seed-label file

    void validate() const;
};

struct BatchStats {
    int batch_index = 0;
    int questions = 0;
    int doc_man = 0;
    int doc_sem = 0;
    int doc_sem_success = 0;
    double doc_cost = 0.0;
    int span_man = 0;
    int span_sem = 0;
    int span_sem_success = 0;
    double span_cost = 0.0;
    double avg_cost = 0.0;
    double running_mean = 0.0;
    double doc_hit_rate = 0.0;
    double span_hit_rate = 0.0;
};

struct RunResult {
    Ledger ledger;
    std::vector<BatchStats> batches;
    std::vector<AnnotationSample> samples;
};

struct BudgetResult {
    int annotated = 0;
    bool budget_too_small = false;  // budget below one worst-case question
    RunResult run;
};

// Builds the QA model named by the config; the corpus must outlive a lexical model.
std::unique_ptr<QaModel> make_qa_model(const RunConfig& config, const Corpus* corpus);

// Deterministic placeholder questions for synthetic runs without a question file.
std::vector<Question> generate_synthetic_questions(int count);

// Mutable state threaded through one run.
struct LoopContext {
    QaModel& model;
    PolicyState& policy_doc;
    PolicyState& policy_span;
    const RunConfig& config;
    Ledger& ledger;
    Rng& model_rng;
    Rng& coin_rng;  // random-baseline coin tosses
    int batch_index = 0;
};

// Two-level annotation of a single question: predict candidates, decide on the
// scheme, simulate the annotator, record costs and cost-optimal labels.
AnnotationSample annotate_question(LoopContext& ctx, const Question& question);

// Full batched run: batches of config.batch_size, policy updates after every batch
// (for baselines that use the policy), QA-model updates after every batch (except
// the no-qa-update baseline).
RunResult run_experiment(const RunConfig& config, const std::vector<Question>& questions,
                         QaModel& model);

// Convenience overload that constructs the model (and corpus for lexical runs).
RunResult run_experiment(const RunConfig& config, const std::vector<Question>& questions);

// Annotates in order until starting the next question could exceed the budget in
// the worst case; a started question is always finished.
BudgetResult run_budget_experiment(const RunConfig& config, const std::vector<Question>& questions,
                                   QaModel& model);
BudgetResult run_budget_experiment(const RunConfig& config, const std::vector<Question>& questions);

// Upper bound on the cost of annotating one more question under this config,
// used by the budget guard.
double worst_case_question_cost(const RunConfig& config, const QaModel& model);

std::vector<BatchStats> derive_batch_stats(const Ledger& ledger);

}  // namespace qanno
