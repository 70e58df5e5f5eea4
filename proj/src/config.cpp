#include "qanno/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "qanno/errors.hpp"

namespace qanno {

namespace {

using nlohmann::json;

json parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    json config;
    try {
        in >> config;
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
    if (!config.is_object()) throw ConfigError("config must be a single JSON object");
    return config;
}

// Unknown keys are rejected rather than ignored; a silently misspelled cost or
// seed would corrupt every comparison downstream.
void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError("unknown config key '" + it.key() + "' in " + where);
        }
    }
}

double get_positive(const json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const double v = obj[key].get<double>();
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(key) + " must be > 0");
    return v;
}

SyntheticCurve parse_curve(const json& obj, const std::string& where) {
    check_keys(obj, {"h0", "h_max", "tau"}, where);
    SyntheticCurve curve;
    curve.h0 = obj.value("h0", curve.h0);
    curve.h_max = obj.value("h_max", curve.h_max);
    curve.tau = obj.value("tau", curve.tau);
    curve.validate();
    return curve;
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
    const json config = parse_config_file(path);
    check_keys(config,
               {"mode", "baseline", "levels", "n", "feature_width", "batch_size", "seed", "costs",
                "cost_preset", "budget", "questions", "question_count", "corpus", "synthetic",
                "policy", "lexical", "policy_warm_start", "sweep"},
               "config");

    RunConfig run;
    const std::string mode = config.value("mode", "synthetic");
    if (mode == "lexical") {
        run.mode = ModelMode::Lexical;
    } else if (mode == "synthetic") {
        run.mode = ModelMode::Synthetic;
    } else {
        throw ConfigError("mode must be 'lexical' or 'synthetic'");
    }
    run.baseline = parse_baseline(config.value("baseline", "framework"));

    const std::string levels = config.value("levels", "both");
    if (levels == "both") {
        run.scope = LevelScope::Both;
    } else if (levels == "span_only") {
        run.scope = LevelScope::SpanOnly;
    } else {
        throw ConfigError("levels must be 'both' or 'span_only'");
    }

    run.n = config.value("n", 5);
    run.feature_width = config.value("feature_width", 2 * run.n);
    run.batch_size = config.value("batch_size", 1000);
    run.seed = config.value("seed", 0ULL);

    if (config.contains("costs") && config.contains("cost_preset")) {
        throw ConfigError("give either costs or cost_preset, not both");
    }
    if (config.contains("cost_preset")) {
        const std::string preset = config["cost_preset"].get<std::string>();
        if (preset != "mturk") throw ConfigError("unknown cost_preset: " + preset);
        run.costs = CostMatrix::mturk_preset();
    } else if (config.contains("costs")) {
        const json& costs = config["costs"];
        check_keys(costs, {"c0_doc", "c1_doc", "c0_span", "c1_span"}, "costs");
        run.costs.c0_doc = get_positive(costs, "c0_doc", run.costs.c0_doc);
        run.costs.c1_doc = get_positive(costs, "c1_doc", run.costs.c1_doc);
        run.costs.c0_span = get_positive(costs, "c0_span", run.costs.c0_span);
        run.costs.c1_span = get_positive(costs, "c1_span", run.costs.c1_span);
    }

    if (config.contains("budget")) run.budget = get_positive(config, "budget", 0.0);
    if (config.contains("questions")) run.questions_path = config["questions"].get<std::string>();
    if (config.contains("corpus")) run.lexical.corpus_path = config["corpus"].get<std::string>();
    if (config.contains("policy_warm_start")) {
        run.policy_warm_start = config["policy_warm_start"].get<std::string>();
    }

    if (config.contains("synthetic")) {
        const json& synth = config["synthetic"];
        check_keys(synth, {"doc", "span", "question_count"}, "synthetic");
        if (synth.contains("doc")) run.synthetic.doc = parse_curve(synth["doc"], "synthetic.doc");
        if (synth.contains("span")) run.synthetic.span = parse_curve(synth["span"], "synthetic.span");
        run.synthetic.question_count = synth.value("question_count", 0);
    }
    if (config.contains("question_count")) {
        run.synthetic.question_count = config["question_count"].get<int>();
    }

    if (config.contains("policy")) {
        const json& pol = config["policy"];
        check_keys(pol, {"hidden_units", "dropout", "learning_rate", "epochs", "minibatch"}, "policy");
        run.policy.hidden_units = pol.value("hidden_units", run.policy.hidden_units);
        run.policy.dropout = pol.value("dropout", run.policy.dropout);
        run.policy.learning_rate = pol.value("learning_rate", run.policy.learning_rate);
        run.policy.epochs = pol.value("epochs", run.policy.epochs);
        run.policy.minibatch = pol.value("minibatch", run.policy.minibatch);
    }

    if (config.contains("lexical")) {
        const json& lex = config["lexical"];
        check_keys(lex, {"bigrams", "stopwords", "answer_prior_weight"}, "lexical");
        run.lexical.bigrams = lex.value("bigrams", false);
        if (lex.contains("stopwords")) {
            for (const auto& w : lex["stopwords"]) run.lexical.stopwords.push_back(w.get<std::string>());
        }
        run.lexical.answer_prior_weight = lex.value("answer_prior_weight", 0.2);
    }

    run.validate();
    return run;
}

std::vector<double> SweepSpec::ratio_range(double start, double stop, double step) {
    if (!(step > 0.0)) throw ConfigError("ratio step must be > 0");
    std::vector<double> ratios;
    for (double r = start; r <= stop + 1e-9; r += step) {
        ratios.push_back(r);
    }
    return ratios;
}

void SweepSpec::validate() const {
    if (ratios.empty()) throw ConfigError("sweep needs at least one ratio");
    double prev = 0.0;
    for (double r : ratios) {
        if (!(r > 0.0) || !(r < 1.0)) throw ConfigError("sweep ratios must lie in (0, 1)");
        if (r <= prev) throw ConfigError("sweep ratios must be strictly increasing");
        prev = r;
    }
    if (repetitions < 1) throw ConfigError("sweep repetitions must be >= 1");
}

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
    const json config = parse_config_file(path);
    SweepSpec spec;
    spec.ratios = SweepSpec::ratio_range(0.05, 0.95, 0.05);
    if (config.contains("sweep")) {
        const json& sweep = config["sweep"];
        check_keys(sweep, {"ratios", "start", "stop", "step", "repetitions"}, "sweep");
        if (sweep.contains("ratios") &&
            (sweep.contains("start") || sweep.contains("stop") || sweep.contains("step"))) {
            throw ConfigError("give either sweep.ratios or start/stop/step, not both");
        }
        if (sweep.contains("ratios")) {
            spec.ratios.clear();
            for (const auto& r : sweep["ratios"]) spec.ratios.push_back(r.get<double>());
        } else if (sweep.contains("start") || sweep.contains("stop") || sweep.contains("step")) {
            spec.ratios = SweepSpec::ratio_range(sweep.value("start", 0.05), sweep.value("stop", 0.95),
                                                 sweep.value("step", 0.05));
        }
        spec.repetitions = sweep.value("repetitions", 1);
    }
    spec.validate();
    return spec;
}

}  // namespace qanno
