#pragma once

#include <optional>

#include "qanno/qa_model.hpp"

namespace qanno {

struct FeedbackResult {
    std::optional<Candidate> accepted;  // highest-ranked exact match, when any
    int inspected = 0;                  // candidates shown
};

// Manual scheme: the simulated annotator searches and returns the gold annotation.
// Throws ConfigError when the question lacks the gold field.
std::string manual_annotate_document(const Question& question);

// Gold answer located inside the annotated document; when the document does not
// contain the answer as a token window (synthetic stubs), a standalone span with
// the answer's canonical token form is produced.
Candidate manual_annotate_span(const Question& question, const Document& document);

// Canonical comparison form for answer strings: tokens joined by single spaces.
std::string gold_answer_form(const Question& question);

// Semi-supervised scheme: binary feedback on candidates. Documents match by
// doc_id, spans by exact surface text against the gold answer's canonical form.
// Ties go to the highest-ranked match; no match means the scheme failed.
FeedbackResult sem_feedback(const CandidateList& candidates, const Question& question);

}  // namespace qanno
