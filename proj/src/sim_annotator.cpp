#include "qanno/sim_annotator.hpp"

#include "qanno/errors.hpp"

namespace qanno {

std::string gold_answer_form(const Question& question) {
    std::string joined;
    for (const auto& t : tokenize(question.gold_answer)) {
        if (!joined.empty()) joined += ' ';
        joined += t;
    }
    return joined;
}

std::string manual_annotate_document(const Question& question) {
    if (question.gold_doc_id.empty()) {
        throw ConfigError("question " + question.question_id + " lacks a gold document annotation");
    }
    return question.gold_doc_id;
}

Candidate manual_annotate_span(const Question& question, const Document& document) {
    if (question.gold_answer.empty()) {
        throw ConfigError("question " + question.question_id + " lacks a gold answer annotation");
    }
    const auto answer_tokens = tokenize(question.gold_answer);
    Candidate span;
    span.doc_id = document.doc_id;
    span.surface_text = gold_answer_form(question);
    span.score = 0.0;

    // First token window of the document matching the answer, when there is one.
    const auto& tokens = document.tokens;
    const std::size_t m = answer_tokens.size();
    if (m > 0 && tokens.size() >= m) {
        for (std::size_t start = 0; start + m <= tokens.size(); ++start) {
            if (std::equal(answer_tokens.begin(), answer_tokens.end(), tokens.begin() + start)) {
                span.start_token = static_cast<int>(start);
                span.end_token = static_cast<int>(start + m);
                return span;
            }
        }
    }
    // Synthetic stub documents carry no text; the span stands on its own.
    span.start_token = 0;
    span.end_token = static_cast<int>(m);
    return span;
}

FeedbackResult sem_feedback(const CandidateList& candidates, const Question& question) {
    FeedbackResult result;
    result.inspected = static_cast<int>(candidates.items.size());
    if (candidates.level == Level::Document) {
        for (const auto& c : candidates.items) {
            if (c.doc_id == question.gold_doc_id) {
                result.accepted = c;
                break;
            }
        }
    } else {
        const std::string gold = gold_answer_form(question);
        for (const auto& c : candidates.items) {
            if (c.surface_text == gold) {
                result.accepted = c;
                break;
            }
        }
    }
    return result;
}

}  // namespace qanno
