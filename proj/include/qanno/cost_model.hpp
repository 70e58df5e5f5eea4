#pragma once

#include <optional>
#include <string>
#include <vector>

namespace qanno {

enum class Level { Document, Span };

// Annotation scheme. Man = full manual annotation, Sem = binary feedback on
// model-suggested candidates with a manual fallback when every candidate is rejected.
enum class Action { Man = 0, Sem = 1 };

const char* to_string(Level level);
const char* to_string(Action action);

// Per-level prices: c0 is one manual annotation, c1 is one round of candidate
// feedback. All strictly positive; c1 may exceed c0 (the decision threshold then
// sits above 1 and candidate feedback is simply never selected).
struct CostMatrix {
    double c0_doc = 1.0;
    double c1_doc = 1.0 / 3.0;
    double c0_span = 1.0;
    double c1_span = 1.0 / 3.0;

    double c0(Level level) const { return level == Level::Document ? c0_doc : c0_span; }
    double c1(Level level) const { return level == Level::Document ? c1_doc : c1_span; }

    void validate() const;  // throws ConfigError unless all four entries are > 0

    // Reported Mechanical Turk compensations: $5.9 manual vs $3.2 feedback per span.
    static CostMatrix mturk_preset();
};

// Realized cost of one annotation step. Man always costs c0. Sem costs c1 when a
// candidate is accepted and c0 + c1 when all are rejected and the manual procedure
// has to run anyway. sem_success is ignored for Man.
double annotation_cost(Level level, Action action, bool sem_success, const CostMatrix& costs);

// Optimal decision threshold derived from a 2x2 misclassification-cost matrix
// c(selected, optimal):
//
//   beta = (c(1,0) - c(0,0)) / (c(1,0) - c(0,0) + c(0,1) - c(1,1))
//
// Throws ConfigError when the denominator vanishes (degenerate cost matrix).
double threshold_beta(double c_mm, double c_ms, double c_sm, double c_ss);

// Same threshold instantiated with the annotation cost matrix of one level;
// simplifies algebraically to c1/c0.
double threshold_beta(Level level, const CostMatrix& costs);

// Expected cost R(a|x) = sum_a' p(a'|x) c(a,a') given the probability that Sem is
// the optimal scheme. R(Man) = c0 independent of p; R(Sem) = c1 + (1-p) * c0.
double expected_risk(double p_sem_optimal, Action action, Level level, const CostMatrix& costs);

struct LedgerEntry {
    std::string question_id;
    int batch_index = 0;
    Level level = Level::Document;
    Action action = Action::Man;
    std::optional<bool> sem_success;  // empty for Man
    double cost = 0.0;
    bool gold_in_topn = false;  // whether the candidate list shown contained the gold annotation
};

// Append-only record of every per-question, per-level cost. Its sum is the
// quantity the whole framework minimizes.
class Ledger {
  public:
    void append(LedgerEntry entry);

    double total(Level level) const;
    double overall_total() const { return total(Level::Document) + total(Level::Span); }

    const std::vector<LedgerEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

  private:
    std::vector<LedgerEntry> entries_;
};

}  // namespace qanno
