#include "qanno/cost_model.hpp"

#include <cmath>

#include "qanno/errors.hpp"

namespace qanno {

const char* to_string(Level level) {
    return level == Level::Document ? "document" : "span";
}

const char* to_string(Action action) {
    return action == Action::Man ? "MAN" : "SEM";
}

void CostMatrix::validate() const {
    for (double c : {c0_doc, c1_doc, c0_span, c1_span}) {
        if (!(c > 0.0) || !std::isfinite(c)) {
            throw ConfigError("cost matrix entries must be strictly positive finite reals");
        }
    }
}

CostMatrix CostMatrix::mturk_preset() {
    const double ratio = 3.2 / 5.9;
    return CostMatrix{1.0, ratio, 1.0, ratio};
}

double annotation_cost(Level level, Action action, bool sem_success, const CostMatrix& costs) {
    if (action == Action::Man) {
        return costs.c0(level);
    }
    return sem_success ? costs.c1(level) : costs.c0(level) + costs.c1(level);
}

double threshold_beta(double c_mm, double c_ms, double c_sm, double c_ss) {
    const double denom = (c_sm - c_mm) + (c_ms - c_ss);
    if (denom == 0.0) {
        throw ConfigError("degenerate cost matrix");
    }
    return (c_sm - c_mm) / denom;
}

double threshold_beta(Level level, const CostMatrix& costs) {
    // The annotation cost matrix (Man rows constant at c0, Sem rows c0+c1 / c1)
    // collapses the general formula to c1/c0. Computing the simplified form avoids
    // the cancellation in (c0+c1)-c0; tests cross-check it against the general one.
    return costs.c1(level) / costs.c0(level);
}

double expected_risk(double p_sem_optimal, Action action, Level level, const CostMatrix& costs) {
    const double p = p_sem_optimal;
    const double c0 = costs.c0(level);
    const double c1 = costs.c1(level);
    if (action == Action::Man) {
        return (1.0 - p) * c0 + p * c0;
    }
    return (1.0 - p) * (c0 + c1) + p * c1;
}

void Ledger::append(LedgerEntry entry) {
    entries_.push_back(std::move(entry));
}

double Ledger::total(Level level) const {
    double sum = 0.0;
    for (const auto& e : entries_) {
        if (e.level == level) sum += e.cost;
    }
    return sum;
}

}  // namespace qanno
