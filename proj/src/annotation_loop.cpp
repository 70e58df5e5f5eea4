#include "qanno/annotation_loop.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "qanno/errors.hpp"
#include "qanno/sim_annotator.hpp"

namespace qanno {

BaselineKind parse_baseline(const std::string& name) {
    if (name == "framework") return BaselineKind::Framework;
    if (name == "manual") return BaselineKind::Manual;
    if (name == "oracle") return BaselineKind::Oracle;
    if (name == "random") return BaselineKind::Random;
    if (name == "no-qa-update") return BaselineKind::NoQaUpdate;
    throw ConfigError("unknown baseline: " + name);
}

const char* to_string(BaselineKind baseline) {
    switch (baseline) {
        case BaselineKind::Framework: return "framework";
        case BaselineKind::Manual: return "manual";
        case BaselineKind::Oracle: return "oracle";
        case BaselineKind::Random: return "random";
        case BaselineKind::NoQaUpdate: return "no-qa-update";
    }
    return "?";
}

void RunConfig::validate() const {
    if (n < 1) throw ConfigError("n must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (feature_width < 1) throw ConfigError("feature_width must be >= 1");
    costs.validate();
    if (budget.has_value() && !(*budget > 0.0)) throw ConfigError("budget must be > 0");
    if (mode == ModelMode::Lexical && lexical.corpus_path.empty()) {
        throw ConfigError("lexical mode requires a corpus path");
    }
    if (mode == ModelMode::Synthetic) {
        synthetic.doc.validate();
        synthetic.span.validate();
    }
    if (policy.hidden_units < 2 || policy.hidden_units % 2 != 0) {
        throw ConfigError("policy hidden_units must be even and >= 2");
    }
    if (policy.dropout < 0.0 || policy.dropout >= 1.0) throw ConfigError("policy dropout must lie in [0, 1)");
    if (!(policy.learning_rate > 0.0)) throw ConfigError("policy learning_rate must be > 0");
    if (policy.epochs < 1) throw ConfigError("policy epochs must be >= 1");
    if (policy.minibatch < 1) throw ConfigError("policy minibatch must be >= 1");
}

std::unique_ptr<QaModel> make_qa_model(const RunConfig& config, const Corpus* corpus) {
    if (config.mode == ModelMode::Lexical) {
        if (corpus == nullptr) throw ConfigError("lexical mode requires an ingested corpus");
        return std::make_unique<LexicalQaModel>(*corpus, config.lexical.answer_prior_weight);
    }
    return std::make_unique<SyntheticQaModel>(config.synthetic.doc, config.synthetic.span);
}

std::vector<Question> generate_synthetic_questions(int count) {
    std::vector<Question> questions;
    questions.reserve(static_cast<std::size_t>(count));
    char buf[32];
    for (int i = 1; i <= count; ++i) {
        Question q;
        std::snprintf(buf, sizeof(buf), "q%06d", i);
        q.question_id = buf;
        q.text = "synthetic question " + std::to_string(i);
        std::snprintf(buf, sizeof(buf), "d%06d", i);
        q.gold_doc_id = buf;
        q.gold_answer = "answer " + std::to_string(i);
        questions.push_back(std::move(q));
    }
    return questions;
}

namespace {

bool baseline_uses_policy(BaselineKind b) {
    return b == BaselineKind::Framework || b == BaselineKind::NoQaUpdate;
}

Action decide_action(LoopContext& ctx, Level level, PolicyState& policy,
                     std::span<const double> features, bool gold_in_topn) {
    switch (ctx.config.baseline) {
        case BaselineKind::Manual: return Action::Man;
        case BaselineKind::Random: return ctx.coin_rng.bernoulli(0.5) ? Action::Sem : Action::Man;
        case BaselineKind::Oracle: return gold_in_topn ? Action::Sem : Action::Man;
        case BaselineKind::Framework:
        case BaselineKind::NoQaUpdate:
            return policy.decide(features, threshold_beta(level, ctx.config.costs));
    }
    return Action::Man;
}

struct WarmStartExample {
    Level level;
    std::vector<double> features;
    int label;
};

std::vector<WarmStartExample> load_warm_start(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open policy warm-start file: " + path.string());
    std::vector<WarmStartExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw IngestError(path.string(), line_no, std::string("malformed record: ") + e.what());
        }
        WarmStartExample ex;
        const std::string level = record.value("level", "");
        if (level == "document") {
            ex.level = Level::Document;
        } else if (level == "span") {
            ex.level = Level::Span;
        } else {
            throw IngestError(path.string(), line_no, "level must be 'document' or 'span'");
        }
        if (!record.contains("features") || !record["features"].is_array()) {
            throw IngestError(path.string(), line_no, "missing features array");
        }
        for (const auto& v : record["features"]) ex.features.push_back(v.get<double>());
        const int label = record.value("label", -1);
        if (label != 0 && label != 1) throw IngestError(path.string(), line_no, "label must be 0 or 1");
        ex.label = label;
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace

AnnotationSample annotate_question(LoopContext& ctx, const Question& question) {
    const RunConfig& cfg = ctx.config;
    const CostMatrix& costs = cfg.costs;
    AnnotationSample sample;
    sample.question = question;

    // Document level (skipped entirely when the documents are given).
    if (cfg.scope == LevelScope::Both) {
        const CandidateList candidates = ctx.model.predict_docs(question, cfg.n, ctx.model_rng);
        const auto features = extract_policy_features(candidates, cfg.feature_width);
        const bool gold_in_topn = candidates.contains_doc(question.gold_doc_id);
        const Action action = decide_action(ctx, Level::Document, ctx.policy_doc, features, gold_in_topn);

        PathRecord path;
        path.action = action;
        path.gold_in_topn = gold_in_topn;
        if (action == Action::Sem) {
            const FeedbackResult feedback = sem_feedback(candidates, question);
            path.sem_success = feedback.accepted.has_value();
            sample.annotated_doc_id =
                feedback.accepted ? feedback.accepted->doc_id : manual_annotate_document(question);
        } else {
            sample.annotated_doc_id = manual_annotate_document(question);
        }
        path.cost = annotation_cost(Level::Document, action, path.sem_success.value_or(false), costs);
        sample.doc_path = path;

        if (baseline_uses_policy(cfg.baseline)) {
            const int label = label_optimal_action(action, path.sem_success, gold_in_topn);
            ctx.policy_doc.add_example(features, label);
        }
        ctx.ledger.append({question.question_id, ctx.batch_index, Level::Document, action,
                           path.sem_success, path.cost, gold_in_topn});
    } else {
        sample.annotated_doc_id = manual_annotate_document(question);
    }

    // Span level on the finally annotated document.
    const Document document = ctx.model.resolve_document(question, sample.annotated_doc_id);
    {
        const CandidateList candidates = ctx.model.predict_spans(question, document, cfg.n, ctx.model_rng);
        const auto features = extract_policy_features(candidates, cfg.feature_width);
        const bool gold_in_topn = candidates.contains_surface(gold_answer_form(question));
        const Action action = decide_action(ctx, Level::Span, ctx.policy_span, features, gold_in_topn);

        PathRecord path;
        path.action = action;
        path.gold_in_topn = gold_in_topn;
        if (action == Action::Sem) {
            const FeedbackResult feedback = sem_feedback(candidates, question);
            path.sem_success = feedback.accepted.has_value();
            sample.annotated_span =
                feedback.accepted ? *feedback.accepted : manual_annotate_span(question, document);
        } else {
            sample.annotated_span = manual_annotate_span(question, document);
        }
        path.cost = annotation_cost(Level::Span, action, path.sem_success.value_or(false), costs);
        sample.span_path = path;

        if (baseline_uses_policy(cfg.baseline)) {
            const int label = label_optimal_action(action, path.sem_success, gold_in_topn);
            ctx.policy_span.add_example(features, label);
        }
        ctx.ledger.append({question.question_id, ctx.batch_index, Level::Span, action,
                           path.sem_success, path.cost, gold_in_topn});
    }
    return sample;
}

double worst_case_question_cost(const RunConfig& config, const QaModel& model) {
    double worst = 0.0;
    std::vector<Level> levels = config.scope == LevelScope::Both
                                    ? std::vector<Level>{Level::Document, Level::Span}
                                    : std::vector<Level>{Level::Span};
    for (Level level : levels) {
        const double c0 = config.costs.c0(level);
        const double c1 = config.costs.c1(level);
        switch (config.baseline) {
            case BaselineKind::Manual:
                worst += c0;
                break;
            case BaselineKind::Oracle:
                // The clairvoyant oracle pays c1 on guaranteed hits, otherwise at
                // most the dearer of a manual annotation and a successful round.
                worst += model.guaranteed_hit(level) ? c1 : std::max(c0, c1);
                break;
            default:
                // Sem with fallback is reachable whenever the threshold is attainable.
                worst += threshold_beta(level, config.costs) <= 1.0 ? c0 + c1 : c0;
                break;
        }
    }
    return worst;
}

namespace {

struct LoopDriver {
    const RunConfig& config;
    const std::vector<Question>& questions;
    QaModel& model;

    RunResult run(std::optional<double> budget, int* annotated_out, bool* too_small_out) {
        config.validate();
        if (questions.empty()) throw ConfigError("no questions to annotate");
        for (const auto& q : questions) model.validate_question(q);

        const int doc_dim = config.feature_width + 2;
        const int span_dim = 2 * config.feature_width + 2;
        PolicyState policy_doc(doc_dim, config.policy.hidden_units, config.policy.dropout,
                               config.policy.minibatch, Rng(Rng::derive(config.seed, 3)));
        PolicyState policy_span(span_dim, config.policy.hidden_units, config.policy.dropout,
                                config.policy.minibatch, Rng(Rng::derive(config.seed, 4)));
        Rng model_rng(Rng::derive(config.seed, 1));
        Rng coin_rng(Rng::derive(config.seed, 2));
        Rng train_doc_rng(Rng::derive(config.seed, 5));
        Rng train_span_rng(Rng::derive(config.seed, 6));

        if (!config.policy_warm_start.empty() && baseline_uses_policy(config.baseline)) {
            for (auto& ex : load_warm_start(config.policy_warm_start)) {
                (ex.level == Level::Document ? policy_doc : policy_span)
                    .add_example(std::move(ex.features), ex.label);
            }
            policy_doc.train(config.policy.epochs, config.policy.learning_rate, train_doc_rng);
            policy_span.train(config.policy.epochs, config.policy.learning_rate, train_span_rng);
            // Seed labels initialize the networks only; updates from here on use run data.
            policy_doc.clear_pool();
            policy_span.clear_pool();
        }

        RunResult result;
        LoopContext ctx{model,    policy_doc, policy_span, config,
                        result.ledger, model_rng,  coin_rng,    1};

        double worst = 0.0;
        if (budget.has_value()) {
            worst = worst_case_question_cost(config, model);
            if (*budget < worst) {
                if (too_small_out != nullptr) *too_small_out = true;
                if (annotated_out != nullptr) *annotated_out = 0;
                return result;
            }
        }

        double spent = 0.0;
        std::size_t batch_start = 0;
        std::size_t i = 0;
        for (; i < questions.size(); ++i) {
            if (budget.has_value() && spent + worst > *budget) break;
            ctx.batch_index = static_cast<int>(i / static_cast<std::size_t>(config.batch_size)) + 1;
            AnnotationSample sample = annotate_question(ctx, questions[i]);
            spent += sample.doc_path.cost + sample.span_path.cost;
            result.samples.push_back(std::move(sample));

            const bool batch_done = (i + 1) % static_cast<std::size_t>(config.batch_size) == 0;
            const bool last = i + 1 == questions.size() ||
                              (budget.has_value() && spent + worst > *budget);
            if (batch_done || last) {
                if (baseline_uses_policy(config.baseline)) {
                    policy_doc.train(config.policy.epochs, config.policy.learning_rate, train_doc_rng);
                    policy_span.train(config.policy.epochs, config.policy.learning_rate, train_span_rng);
                }
                if (config.baseline != BaselineKind::NoQaUpdate) {
                    std::vector<AnnotationSample> batch(result.samples.begin() + batch_start,
                                                        result.samples.end());
                    model.train_update(batch);
                    batch_start = result.samples.size();
                }
            }
        }
        if (annotated_out != nullptr) *annotated_out = static_cast<int>(i);
        result.batches = derive_batch_stats(result.ledger);
        return result;
    }
};

}  // namespace

RunResult run_experiment(const RunConfig& config, const std::vector<Question>& questions,
                         QaModel& model) {
    LoopDriver driver{config, questions, model};
    return driver.run(std::nullopt, nullptr, nullptr);
}

RunResult run_experiment(const RunConfig& config, const std::vector<Question>& questions) {
    config.validate();
    if (config.mode == ModelMode::Lexical) {
        Corpus corpus = Corpus::ingest_file(config.lexical.corpus_path,
                                            {config.lexical.bigrams, config.lexical.stopwords});
        auto model = make_qa_model(config, &corpus);
        return run_experiment(config, questions, *model);
    }
    auto model = make_qa_model(config, nullptr);
    return run_experiment(config, questions, *model);
}

BudgetResult run_budget_experiment(const RunConfig& config, const std::vector<Question>& questions,
                                   QaModel& model) {
    if (!config.budget.has_value()) throw ConfigError("budget run requires a budget");
    BudgetResult result;
    LoopDriver driver{config, questions, model};
    result.run = driver.run(config.budget, &result.annotated, &result.budget_too_small);
    return result;
}

BudgetResult run_budget_experiment(const RunConfig& config, const std::vector<Question>& questions) {
    config.validate();
    if (config.mode == ModelMode::Lexical) {
        Corpus corpus = Corpus::ingest_file(config.lexical.corpus_path,
                                            {config.lexical.bigrams, config.lexical.stopwords});
        auto model = make_qa_model(config, &corpus);
        return run_budget_experiment(config, questions, *model);
    }
    auto model = make_qa_model(config, nullptr);
    return run_budget_experiment(config, questions, *model);
}

std::vector<BatchStats> derive_batch_stats(const Ledger& ledger) {
    std::vector<BatchStats> batches;
    int doc_hits = 0, span_hits = 0;
    auto flush_hits = [&](BatchStats& b) {
        const int doc_n = b.doc_man + b.doc_sem;
        const int span_n = b.span_man + b.span_sem;
        b.questions = std::max(doc_n, span_n);
        b.doc_hit_rate = doc_n > 0 ? static_cast<double>(doc_hits) / doc_n : 0.0;
        b.span_hit_rate = span_n > 0 ? static_cast<double>(span_hits) / span_n : 0.0;
        b.avg_cost = b.questions > 0 ? (b.doc_cost + b.span_cost) / b.questions : 0.0;
    };
    for (const auto& e : ledger.entries()) {
        if (batches.empty() || batches.back().batch_index != e.batch_index) {
            if (!batches.empty()) flush_hits(batches.back());
            batches.push_back(BatchStats{});
            batches.back().batch_index = e.batch_index;
            doc_hits = span_hits = 0;
        }
        BatchStats& b = batches.back();
        if (e.level == Level::Document) {
            (e.action == Action::Man ? b.doc_man : b.doc_sem) += 1;
            if (e.action == Action::Sem && e.sem_success.value_or(false)) ++b.doc_sem_success;
            b.doc_cost += e.cost;
            doc_hits += e.gold_in_topn ? 1 : 0;
        } else {
            (e.action == Action::Man ? b.span_man : b.span_sem) += 1;
            if (e.action == Action::Sem && e.sem_success.value_or(false)) ++b.span_sem_success;
            b.span_cost += e.cost;
            span_hits += e.gold_in_topn ? 1 : 0;
        }
    }
    if (!batches.empty()) flush_hits(batches.back());

    double avg_sum = 0.0;
    for (std::size_t i = 0; i < batches.size(); ++i) {
        avg_sum += batches[i].avg_cost;
        batches[i].running_mean = avg_sum / static_cast<double>(i + 1);
    }
    return batches;
}

}  // namespace qanno
