#include "qanno/qa_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_set>

#include <json.hpp>

#include "qanno/annotation_loop.hpp"
#include "qanno/errors.hpp"

namespace qanno {

bool CandidateList::contains_doc(const std::string& doc_id) const {
    for (const auto& c : items) {
        if (c.doc_id == doc_id) return true;
    }
    return false;
}

bool CandidateList::contains_surface(const std::string& surface) const {
    for (const auto& c : items) {
        if (c.surface_text == surface) return true;
    }
    return false;
}

std::vector<Question> load_questions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open question file: " + path.string());
    }
    std::vector<Question> questions;
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
        Question q;
        for (auto [key, dst] : {std::pair{"question_id", &q.question_id}, {"text", &q.text},
                                {"gold_doc_id", &q.gold_doc_id}, {"gold_answer", &q.gold_answer}}) {
            auto it = record.find(key);
            if (it == record.end() || !it->is_string()) {
                throw IngestError(path.string(), line_no, std::string("missing string field '") + key + "'");
            }
            *dst = it->get<std::string>();
        }
        if (q.text.empty()) {
            throw IngestError(path.string(), line_no, "question text must be non-empty");
        }
        questions.push_back(std::move(q));
    }
    return questions;
}

double SyntheticCurve::hit_prob(long long t) const {
    return h_max - (h_max - h0) * std::exp(-static_cast<double>(t) / tau);
}

void SyntheticCurve::validate() const {
    if (h0 < 0.0 || h0 > 1.0 || h_max < 0.0 || h_max > 1.0 || h0 > h_max || !(tau > 0.0)) {
        throw ConfigError("synthetic curve requires 0 <= h0 <= h_max <= 1 and tau > 0");
    }
}

// ---------------------------------------------------------------------------
// Lexical model
// ---------------------------------------------------------------------------

LexicalQaModel::LexicalQaModel(const Corpus& corpus, double answer_prior_weight)
    : corpus_(&corpus), prior_weight_(answer_prior_weight) {}

CandidateList LexicalQaModel::predict_docs(const Question& question, int n, Rng&) const {
    if (n < 1) throw ConfigError("predict_docs requires n >= 1");
    CandidateList list;
    list.level = Level::Document;
    for (const auto& scored : corpus_->query_top_docs(question.text, n)) {
        Candidate c;
        c.doc_id = scored.doc_id;
        c.score = scored.score;
        list.items.push_back(std::move(c));
    }
    return list;
}

double LexicalQaModel::answer_prior(const std::string& surface) const {
    auto it = answer_counts_.find(surface);
    return it == answer_counts_.end() ? 0.0 : std::log(1.0 + static_cast<double>(it->second));
}

CandidateList LexicalQaModel::predict_spans(const Question& question, const Document& document,
                                            int n, Rng&) const {
    if (n < 1) throw ConfigError("predict_spans requires n >= 1");
    CandidateList list;
    list.level = Level::Span;
    const auto& tokens = document.tokens;
    if (tokens.empty()) return list;

    std::unordered_set<std::string> question_terms;
    for (auto& t : tokenize(question.text)) question_terms.insert(std::move(t));

    struct Window {
        int start, end;
        std::string surface;
        double score;
    };
    std::vector<Window> windows;
    const int len = static_cast<int>(tokens.size());
    for (int start = 0; start < len; ++start) {
        std::string surface;
        std::unordered_set<std::string> seen;
        double overlap = 0.0;
        for (int end = start + 1; end <= std::min(len, start + kMaxWindow); ++end) {
            const std::string& tok = tokens[end - 1];
            if (!surface.empty()) surface += ' ';
            surface += tok;
            if (question_terms.count(tok) && seen.insert(tok).second) {
                overlap += corpus_->idf(tok);
            }
            const double window_len = static_cast<double>(end - start);
            const double score = (overlap + prior_weight_ * answer_prior(surface)) / window_len;
            windows.push_back({start, end, surface, score});
        }
    }
    std::stable_sort(windows.begin(), windows.end(), [](const Window& a, const Window& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.start != b.start) return a.start < b.start;
        return a.end < b.end;
    });

    std::unordered_set<std::string> used_surfaces;
    for (const auto& w : windows) {
        if (static_cast<int>(list.items.size()) >= n) break;
        if (!used_surfaces.insert(w.surface).second) continue;
        Candidate c;
        c.doc_id = document.doc_id;
        c.start_token = w.start;
        c.end_token = w.end;
        c.surface_text = w.surface;
        c.score = w.score;
        list.items.push_back(std::move(c));
    }
    return list;
}

void LexicalQaModel::train_update(const std::vector<AnnotationSample>& samples) {
    for (const auto& s : samples) {
        if (s.annotated_doc_id.empty() || s.annotated_span.surface_text.empty()) {
            throw ConfigError("train_update requires fully annotated samples");
        }
    }
    for (const auto& s : samples) {
        ++answer_counts_[s.annotated_span.surface_text];
    }
}

Document LexicalQaModel::resolve_document(const Question& question, const std::string& doc_id) const {
    const Document* doc = corpus_->find(doc_id);
    if (doc == nullptr) {
        throw ConfigError("question " + question.question_id + " references unknown document " + doc_id);
    }
    return *doc;
}

void LexicalQaModel::validate_question(const Question& question) const {
    if (question.gold_doc_id.empty() || question.gold_answer.empty()) {
        throw ConfigError("question " + question.question_id + " lacks gold annotations");
    }
    if (corpus_->find(question.gold_doc_id) == nullptr) {
        throw ConfigError("question " + question.question_id + " references unknown document " +
                          question.gold_doc_id);
    }
}

// ---------------------------------------------------------------------------
// Synthetic model
// ---------------------------------------------------------------------------

SyntheticQaModel::SyntheticQaModel(SyntheticCurve doc_curve, SyntheticCurve span_curve)
    : doc_curve_(doc_curve), span_curve_(span_curve) {
    doc_curve_.validate();
    span_curve_.validate();
}

double SyntheticQaModel::hit_prob(Level level) const {
    return level == Level::Document ? doc_curve_.hit_prob(t_doc_) : span_curve_.hit_prob(t_span_);
}

long long SyntheticQaModel::training_samples(Level level) const {
    return level == Level::Document ? t_doc_ : t_span_;
}

bool SyntheticQaModel::guaranteed_hit(Level level) const {
    const SyntheticCurve& c = level == Level::Document ? doc_curve_ : span_curve_;
    return c.h0 >= 1.0 && c.h_max >= 1.0;
}

namespace {

// P(rank = r) proportional to 0.5^r over 1..n.
int truncated_geometric_rank(int n, Rng& rng) {
    double total = 0.0;
    for (int r = 1; r <= n; ++r) total += std::pow(0.5, r);
    double u = rng.uniform() * total;
    for (int r = 1; r <= n; ++r) {
        u -= std::pow(0.5, r);
        if (u < 0.0) return r;
    }
    return n;
}

// Slot scores sorted descending. Success draws from U(0.5, 1) with one draw
// boosted by +0.5, so the top score and the top gap are stochastically larger
// than the failure profile drawn from U(0, 0.7).
std::vector<double> synthetic_scores(int n, bool hit, Rng& rng) {
    std::vector<double> scores(static_cast<std::size_t>(n));
    for (auto& s : scores) s = hit ? rng.uniform(0.5, 1.0) : rng.uniform(0.0, 0.7);
    if (hit) scores[0] += 0.5;
    std::sort(scores.begin(), scores.end(), std::greater<>());
    return scores;
}

std::string distractor_id(int i, const std::string& gold) {
    std::string id = "neg_" + std::to_string(i);
    if (id == gold) id += "_alt";
    return id;
}

}  // namespace

CandidateList SyntheticQaModel::predict_docs(const Question& question, int n, Rng& rng) const {
    if (n < 1) throw ConfigError("predict_docs requires n >= 1");
    if (question.gold_doc_id.empty()) {
        throw ConfigError("synthetic prediction requires a gold document annotation");
    }
    const bool hit = rng.bernoulli(doc_curve_.hit_prob(t_doc_));
    const auto scores = synthetic_scores(n, hit, rng);
    const int gold_rank = hit ? truncated_geometric_rank(n, rng) : 0;

    CandidateList list;
    list.level = Level::Document;
    for (int rank = 1; rank <= n; ++rank) {
        Candidate c;
        c.doc_id = (rank == gold_rank) ? question.gold_doc_id : distractor_id(rank, question.gold_doc_id);
        c.score = scores[static_cast<std::size_t>(rank - 1)];
        list.items.push_back(std::move(c));
    }
    return list;
}

CandidateList SyntheticQaModel::predict_spans(const Question& question, const Document& document,
                                              int n, Rng& rng) const {
    if (n < 1) throw ConfigError("predict_spans requires n >= 1");
    if (question.gold_answer.empty()) {
        throw ConfigError("synthetic prediction requires a gold answer annotation");
    }
    const bool hit = rng.bernoulli(span_curve_.hit_prob(t_span_));
    const auto scores = synthetic_scores(n, hit, rng);
    const int gold_rank = hit ? truncated_geometric_rank(n, rng) : 0;

    const auto gold_tokens = tokenize(question.gold_answer);
    std::string gold_surface;
    for (const auto& t : gold_tokens) {
        if (!gold_surface.empty()) gold_surface += ' ';
        gold_surface += t;
    }

    CandidateList list;
    list.level = Level::Span;
    for (int rank = 1; rank <= n; ++rank) {
        Candidate c;
        c.doc_id = document.doc_id;
        c.score = scores[static_cast<std::size_t>(rank - 1)];
        if (rank == gold_rank) {
            c.start_token = 0;
            c.end_token = static_cast<int>(gold_tokens.size());
            c.surface_text = gold_surface;
        } else {
            const int span_len = rng.uniform_int(1, 8);
            c.start_token = 0;
            c.end_token = span_len;
            c.surface_text = "neg" + std::to_string(rank);
            for (int i = 1; i < span_len; ++i) c.surface_text += " pad";
        }
        list.items.push_back(std::move(c));
    }
    return list;
}

void SyntheticQaModel::train_update(const std::vector<AnnotationSample>& samples) {
    for (const auto& s : samples) {
        if (s.annotated_doc_id.empty() || s.annotated_span.surface_text.empty()) {
            throw ConfigError("train_update requires fully annotated samples");
        }
    }
    t_doc_ += static_cast<long long>(samples.size());
    t_span_ += static_cast<long long>(samples.size());
}

Document SyntheticQaModel::resolve_document(const Question& question, const std::string& doc_id) const {
    Document doc;
    doc.doc_id = doc_id;
    doc.title = question.question_id;
    return doc;
}

void SyntheticQaModel::validate_question(const Question& question) const {
    if (question.gold_doc_id.empty() || question.gold_answer.empty()) {
        throw ConfigError("question " + question.question_id + " lacks gold annotations");
    }
}

// ---------------------------------------------------------------------------
// Policy features
// ---------------------------------------------------------------------------

std::vector<double> extract_policy_features(const CandidateList& candidates, int width) {
    const std::size_t w = static_cast<std::size_t>(width);
    const bool span_level = candidates.level == Level::Span;
    std::vector<double> features(span_level ? 2 * w + 2 : w + 2, 0.0);

    const std::size_t filled = std::min(candidates.items.size(), w);
    const double top = candidates.items.empty() ? 0.0 : candidates.items.front().score;
    for (std::size_t i = 0; i < filled; ++i) {
        features[i] = candidates.items[i].score / (top + 1e-8);
    }
    if (span_level) {
        for (std::size_t i = 0; i < filled; ++i) {
            features[w + i] = candidates.items[i].token_length() / 8.0;
        }
    }
    const std::size_t tail = span_level ? 2 * w : w;
    features[tail] = std::log(1.0 + top);
    features[tail + 1] = static_cast<double>(filled) / static_cast<double>(w);
    return features;
}

}  // namespace qanno
