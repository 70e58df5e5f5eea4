#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "qanno/corpus.hpp"
#include "qanno/cost_model.hpp"
#include "qanno/rng.hpp"

namespace qanno {

struct AnnotationSample;  // annotation_loop.hpp

struct Question {
    std::string question_id;
    std::string text;
    std::string gold_doc_id;
    std::string gold_answer;
};

// One ranked candidate. Document candidates carry just doc_id and score; span
// candidates additionally carry the token window and its joined surface form.
struct Candidate {
    std::string doc_id;
    int start_token = 0;
    int end_token = 0;  // exclusive
    std::string surface_text;
    double score = 0.0;

    int token_length() const { return end_token - start_token; }
};

struct CandidateList {
    Level level = Level::Document;
    std::vector<Candidate> items;  // scores non-increasing, items distinct

    bool contains_doc(const std::string& doc_id) const;
    bool contains_surface(const std::string& surface) const;
};

// JSON-lines question records: question_id, text, gold_doc_id, gold_answer.
std::vector<Question> load_questions(const std::filesystem::path& path);

// Saturating hit-rate curve standing in for a QA model that improves as it is
// retrained: hit_prob(t) = h_max - (h_max - h0) * exp(-t / tau).
struct SyntheticCurve {
    double h0 = 0.1;
    double h_max = 0.9;
    double tau = 5000.0;

    double hit_prob(long long t) const;
    void validate() const;
};

class QaModel {
  public:
    virtual ~QaModel() = default;

    virtual CandidateList predict_docs(const Question& question, int n, Rng& rng) const = 0;
    virtual CandidateList predict_spans(const Question& question, const Document& document, int n,
                                        Rng& rng) const = 0;

    // Cumulative retraining on fully annotated samples; throws on partial annotations.
    virtual void train_update(const std::vector<AnnotationSample>& samples) = 0;

    // The document the span stage should run on; synthetic models fabricate a stub.
    virtual Document resolve_document(const Question& question, const std::string& doc_id) const = 0;

    // Rejects questions this model cannot annotate (missing gold fields, unknown
    // gold documents); the run loop calls this before any annotation starts.
    virtual void validate_question(const Question& question) const = 0;

    // True when the model guarantees the gold annotation appears in any top-n list,
    // which tightens the worst-case cost bound of the clairvoyant oracle baseline.
    virtual bool guaranteed_hit(Level level) const { (void)level; return false; }
};

// tf-idf retrieval plus a window-enumeration span scorer. Span windows of length
// 1..8 are scored by question-term idf overlap plus a trained answer prior,
// normalized by window length.
class LexicalQaModel : public QaModel {
  public:
    LexicalQaModel(const Corpus& corpus, double answer_prior_weight = 0.2);

    CandidateList predict_docs(const Question& question, int n, Rng& rng) const override;
    CandidateList predict_spans(const Question& question, const Document& document, int n,
                                Rng& rng) const override;
    void train_update(const std::vector<AnnotationSample>& samples) override;
    Document resolve_document(const Question& question, const std::string& doc_id) const override;
    void validate_question(const Question& question) const override;

    double answer_prior(const std::string& surface) const;  // ln(1 + count)

    static constexpr int kMaxWindow = 8;

  private:
    const Corpus* corpus_;
    double prior_weight_;
    std::unordered_map<std::string, long long> answer_counts_;
};

// Candidate generator driven by the synthetic hit-rate curves. When a draw
// succeeds the gold annotation is inserted at a truncated-geometric rank and the
// slot scores come from a higher, wider distribution than on failure, so policy
// features carry a learnable signal.
class SyntheticQaModel : public QaModel {
  public:
    SyntheticQaModel(SyntheticCurve doc_curve, SyntheticCurve span_curve);

    CandidateList predict_docs(const Question& question, int n, Rng& rng) const override;
    CandidateList predict_spans(const Question& question, const Document& document, int n,
                                Rng& rng) const override;
    void train_update(const std::vector<AnnotationSample>& samples) override;
    Document resolve_document(const Question& question, const std::string& doc_id) const override;
    void validate_question(const Question& question) const override;
    bool guaranteed_hit(Level level) const override;

    double hit_prob(Level level) const;
    long long training_samples(Level level) const;

  private:
    SyntheticCurve doc_curve_;
    SyntheticCurve span_curve_;
    long long t_doc_ = 0;
    long long t_span_ = 0;
};

// Fixed-width feature vector for the annotation policies. Document level
// (width + 2 dims): width self-normalized scores, ln(1 + top raw score), fraction
// of filled slots. Span level (2 * width + 2 dims): additionally the width span
// token lengths divided by the window cap. Missing slots are zero.
std::vector<double> extract_policy_features(const CandidateList& candidates, int width);

}  // namespace qanno
