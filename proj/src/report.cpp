#include "qanno/report.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "qanno/errors.hpp"

namespace qanno {

std::string format_real(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

namespace {

using nlohmann::ordered_json;

class StagedFile {
  public:
    explicit StagedFile(std::filesystem::path target)
        : target_(std::move(target)), tmp_(target_.string() + ".tmp"), out_(tmp_, std::ios::binary) {
        if (!out_) throw IoError("cannot write " + target_.string());
    }
    std::ofstream& stream() { return out_; }
    void commit() {
        out_.flush();
        if (!out_) throw IoError("failed writing " + target_.string());
        out_.close();
        std::filesystem::rename(tmp_, target_);
        committed_ = true;
    }
    ~StagedFile() {
        if (!committed_) {
            out_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_, ec);
        }
    }

  private:
    std::filesystem::path target_;
    std::filesystem::path tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

void write_batches_rows(std::ostream& out, const std::vector<BatchStats>& batches) {
    out << "batch_index,questions,doc_man,doc_sem,doc_sem_success,doc_cost,"
           "span_man,span_sem,span_sem_success,span_cost,avg_cost,running_mean,"
           "doc_hit_rate,span_hit_rate\n";
    for (const auto& b : batches) {
        out << b.batch_index << ',' << b.questions << ',' << b.doc_man << ',' << b.doc_sem << ','
            << b.doc_sem_success << ',' << format_real(b.doc_cost) << ',' << b.span_man << ','
            << b.span_sem << ',' << b.span_sem_success << ',' << format_real(b.span_cost) << ','
            << format_real(b.avg_cost) << ',' << format_real(b.running_mean) << ','
            << format_real(b.doc_hit_rate) << ',' << format_real(b.span_hit_rate) << '\n';
    }
}

void write_summary_rows(std::ostream& out, const Ledger& ledger, const CostMatrix& costs) {
    std::size_t doc_n = 0, span_n = 0;
    for (const auto& e : ledger.entries()) {
        (e.level == Level::Document ? doc_n : span_n) += 1;
    }
    const double doc_total = ledger.total(Level::Document);
    const double span_total = ledger.total(Level::Span);
    const double doc_manual = static_cast<double>(doc_n) * costs.c0_doc;
    const double span_manual = static_cast<double>(span_n) * costs.c0_span;

    auto savings = [](double manual_equivalent, double actual) {
        if (manual_equivalent == 0.0) return 0.0;
        return (manual_equivalent - actual) / manual_equivalent * 100.0;
    };
    out << "level,total_cost,manual_equivalent_cost,savings_percent\n";
    out << "document," << format_real(doc_total) << ',' << format_real(doc_manual) << ','
        << format_real(savings(doc_manual, doc_total)) << '\n';
    out << "span," << format_real(span_total) << ',' << format_real(span_manual) << ','
        << format_real(savings(span_manual, span_total)) << '\n';
    out << "overall," << format_real(doc_total + span_total) << ','
        << format_real(doc_manual + span_manual) << ','
        << format_real(savings(doc_manual + span_manual, doc_total + span_total)) << '\n';
}

ordered_json path_to_json(const PathRecord& path) {
    ordered_json obj;
    obj["action"] = to_string(path.action);
    obj["sem_success"] = path.sem_success.has_value() ? ordered_json(*path.sem_success) : ordered_json();
    obj["cost"] = path.cost;
    obj["gold_in_topn"] = path.gold_in_topn;
    return obj;
}

}  // namespace

void write_batches_csv(const std::filesystem::path& path, const std::vector<BatchStats>& batches) {
    StagedFile file(path);
    write_batches_rows(file.stream(), batches);
    file.commit();
}

void write_summary_csv(const std::filesystem::path& path, const Ledger& ledger,
                       const CostMatrix& costs) {
    StagedFile file(path);
    write_summary_rows(file.stream(), ledger, costs);
    file.commit();
}

namespace {

void write_annotation_rows(std::ostream& out, const std::vector<AnnotationSample>& samples,
                           LevelScope scope) {
    for (const auto& s : samples) {
        ordered_json record;
        record["question_id"] = s.question.question_id;
        record["text"] = s.question.text;
        record["gold_doc_id"] = s.question.gold_doc_id;
        record["gold_answer"] = s.question.gold_answer;
        record["annotated_doc_id"] = s.annotated_doc_id;
        ordered_json span;
        span["doc_id"] = s.annotated_span.doc_id;
        span["start_token"] = s.annotated_span.start_token;
        span["end_token"] = s.annotated_span.end_token;
        span["surface_text"] = s.annotated_span.surface_text;
        record["annotated_span"] = span;
        record["document"] = scope == LevelScope::Both ? path_to_json(s.doc_path) : ordered_json();
        record["span"] = path_to_json(s.span_path);
        out << record.dump() << '\n';
    }
}

void write_ledger_rows(std::ostream& out, const Ledger& ledger, const RunConfig& config);

}  // namespace

void write_annotations_jsonl(const std::filesystem::path& path,
                             const std::vector<AnnotationSample>& samples, LevelScope scope) {
    StagedFile file(path);
    write_annotation_rows(file.stream(), samples, scope);
    file.commit();
}

void save_ledger(const std::filesystem::path& path, const Ledger& ledger, const RunConfig& config) {
    StagedFile file(path);
    write_ledger_rows(file.stream(), ledger, config);
    file.commit();
}

namespace {

void write_ledger_rows(std::ostream& out, const Ledger& ledger, const RunConfig& config) {
    ordered_json header;
    header["type"] = "header";
    header["format"] = "qanno-ledger-v1";
    header["costs"] = {{"c0_doc", config.costs.c0_doc},
                       {"c1_doc", config.costs.c1_doc},
                       {"c0_span", config.costs.c0_span},
                       {"c1_span", config.costs.c1_span}};
    header["levels"] = config.scope == LevelScope::Both ? "both" : "span_only";
    header["baseline"] = to_string(config.baseline);
    header["batch_size"] = config.batch_size;
    header["n"] = config.n;
    header["seed"] = config.seed;
    out << header.dump() << '\n';
    for (const auto& e : ledger.entries()) {
        ordered_json record;
        record["question_id"] = e.question_id;
        record["batch"] = e.batch_index;
        record["level"] = to_string(e.level);
        record["action"] = to_string(e.action);
        record["sem_success"] = e.sem_success.has_value() ? ordered_json(*e.sem_success) : ordered_json();
        record["cost"] = e.cost;
        record["hit"] = e.gold_in_topn;
        out << record.dump() << '\n';
    }
}

}  // namespace

SavedLedger load_ledger(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ledger file: " + path.string());
    SavedLedger saved;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw IngestError(path.string(), line_no, std::string("malformed record: ") + e.what());
        }
        if (!header_seen) {
            if (record.value("type", "") != "header" ||
                record.value("format", "") != "qanno-ledger-v1") {
                throw ConfigError("not a qanno ledger file: " + path.string());
            }
            const auto& costs = record.at("costs");
            saved.costs.c0_doc = costs.at("c0_doc").get<double>();
            saved.costs.c1_doc = costs.at("c1_doc").get<double>();
            saved.costs.c0_span = costs.at("c0_span").get<double>();
            saved.costs.c1_span = costs.at("c1_span").get<double>();
            saved.scope = record.value("levels", "both") == "span_only" ? LevelScope::SpanOnly
                                                                        : LevelScope::Both;
            header_seen = true;
            continue;
        }
        LedgerEntry entry;
        entry.question_id = record.at("question_id").get<std::string>();
        entry.batch_index = record.at("batch").get<int>();
        entry.level = record.at("level").get<std::string>() == "document" ? Level::Document : Level::Span;
        entry.action = record.at("action").get<std::string>() == "SEM" ? Action::Sem : Action::Man;
        if (!record.at("sem_success").is_null()) entry.sem_success = record.at("sem_success").get<bool>();
        entry.cost = record.at("cost").get<double>();
        entry.gold_in_topn = record.at("hit").get<bool>();
        saved.ledger.append(std::move(entry));
    }
    if (!header_seen) throw ConfigError("ledger file has no header: " + path.string());
    return saved;
}

void emit_report(const RunResult& result, const RunConfig& config,
                 const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir.string());

    StagedFile batches(out_dir / "batches.csv");
    write_batches_rows(batches.stream(), result.batches);
    StagedFile summary(out_dir / "summary.csv");
    write_summary_rows(summary.stream(), result.ledger, config.costs);
    batches.commit();
    summary.commit();
    write_annotations_jsonl(out_dir / "annotations.jsonl", result.samples, config.scope);
    save_ledger(out_dir / "ledger.jsonl", result.ledger, config);
}

void emit_from_saved_ledger(const std::filesystem::path& ledger_path,
                            const std::filesystem::path& out_dir) {
    const SavedLedger saved = load_ledger(ledger_path);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir.string());
    write_batches_csv(out_dir / "batches.csv", derive_batch_stats(saved.ledger));
    write_summary_csv(out_dir / "summary.csv", saved.ledger, saved.costs);
}

namespace {

std::string ratio_dir_name(double ratio, int rep, int repetitions) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "ratio_%g", ratio);
    std::string name = buf;
    if (repetitions > 1) name += "_rep" + std::to_string(rep + 1);
    return name;
}

// Number of questions a budget-guarded run would have started, replayed from the
// realized per-question costs. Updates happen at batch boundaries, so the prefix
// of an unconstrained run is identical to the budget-constrained run.
int replay_budget_count(const RunConfig& config, const RunResult& result, double budget) {
    auto model = make_qa_model(config, nullptr);
    const double worst = worst_case_question_cost(config, *model);
    if (budget < worst) return 0;
    double spent = 0.0;
    int count = 0;
    for (const auto& s : result.samples) {
        if (spent + worst > budget) break;
        spent += s.doc_path.cost + s.span_path.cost;
        ++count;
    }
    return count;
}

}  // namespace

SweepResult run_sweep(const RunConfig& base, const SweepSpec& spec,
                      const std::vector<Question>& questions, int jobs,
                      const std::optional<std::filesystem::path>& out_dir) {
    spec.validate();
    if (base.mode != ModelMode::Synthetic) {
        throw ConfigError("cost-ratio sweeps are defined for the synthetic model");
    }
    if (questions.empty()) throw ConfigError("no questions to annotate");

    struct Point {
        double ratio;
        int rep;
    };
    std::vector<Point> points;
    for (double ratio : spec.ratios) {
        for (int rep = 0; rep < spec.repetitions; ++rep) points.push_back({ratio, rep});
    }
    std::vector<double> avg_cost(points.size(), 0.0);
    std::vector<double> annotated(points.size(), 0.0);

    const int levels = base.scope == LevelScope::Both ? 2 : 1;
    const double manual_equivalent = static_cast<double>(questions.size()) * levels;

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t idx = next.fetch_add(1); idx < points.size(); idx = next.fetch_add(1)) {
            RunConfig config = base;
            config.costs.c0_doc = 1.0;
            config.costs.c0_span = 1.0;  // sweeps fix the manual price to one unit
            config.costs.c1_doc = points[idx].ratio;
            config.costs.c1_span = points[idx].ratio;
            config.seed = base.seed + static_cast<std::uint64_t>(points[idx].rep);
            const RunResult result = run_experiment(config, questions);
            avg_cost[idx] = result.ledger.overall_total() / static_cast<double>(questions.size());
            const double budget = base.budget.value_or(0.5 * manual_equivalent);
            annotated[idx] = replay_budget_count(config, result, budget);
            if (out_dir.has_value()) {
                emit_report(result, config,
                            *out_dir / ratio_dir_name(points[idx].ratio, points[idx].rep,
                                                      spec.repetitions));
            }
        }
    };
    const int thread_count = std::max(1, std::min<int>(jobs, static_cast<int>(points.size())));
    if (thread_count == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < thread_count; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    SweepResult sweep;
    std::size_t idx = 0;
    for (double ratio : spec.ratios) {
        SweepRow row;
        row.ratio = ratio;
        for (int rep = 0; rep < spec.repetitions; ++rep, ++idx) {
            row.avg_cost_per_sample += avg_cost[idx];
            row.annotated_under_budget += annotated[idx];
        }
        row.avg_cost_per_sample /= spec.repetitions;
        row.annotated_under_budget /= spec.repetitions;
        sweep.rows.push_back(row);
    }
    if (out_dir.has_value()) {
        write_sweep_csv(*out_dir / "sweep.csv", sweep);
    }
    return sweep;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& sweep) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    StagedFile file(path);
    file.stream() << "ratio,avg_cost_per_sample,annotated_under_budget\n";
    for (const auto& row : sweep.rows) {
        file.stream() << format_real(row.ratio) << ',' << format_real(row.avg_cost_per_sample) << ','
                      << format_real(row.annotated_under_budget) << '\n';
    }
    file.commit();
}

}  // namespace qanno
