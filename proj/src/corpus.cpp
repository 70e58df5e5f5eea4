#include "qanno/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "qanno/errors.hpp"

namespace qanno {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

namespace {

std::string require_string_field(const nlohmann::json& record, const char* key,
                                 const std::filesystem::path& path, std::size_t line) {
    auto it = record.find(key);
    if (it == record.end() || !it->is_string()) {
        throw IngestError(path.string(), line, std::string("missing string field '") + key + "'");
    }
    return it->get<std::string>();
}

}  // namespace

Corpus Corpus::ingest_file(const std::filesystem::path& path, CorpusOptions options) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open corpus file: " + path.string());
    }
    std::vector<Document> records;
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
        if (!record.is_object()) {
            throw IngestError(path.string(), line_no, "record is not an object");
        }
        Document doc;
        doc.doc_id = require_string_field(record, "doc_id", path, line_no);
        doc.title = require_string_field(record, "title", path, line_no);
        doc.text = require_string_field(record, "text", path, line_no);
        records.push_back(std::move(doc));
    }
    return ingest_records(std::move(records), std::move(options));
}

Corpus Corpus::ingest_records(std::vector<Document> records, CorpusOptions options) {
    Corpus corpus;
    corpus.options_ = std::move(options);
    corpus.stopwords_.insert(corpus.options_.stopwords.begin(), corpus.options_.stopwords.end());
    for (auto& doc : records) {
        doc.tokens = tokenize(doc.text);
        auto [it, inserted] = corpus.documents_.emplace(doc.doc_id, std::move(doc));
        if (!inserted) {
            throw IngestError("corpus", 0, "duplicate doc_id: " + it->first);
        }
    }
    corpus.build_index();
    return corpus;
}

bool Corpus::is_stopword(std::string_view term) const {
    return stopwords_.count(std::string(term)) > 0;
}

std::vector<std::string> Corpus::index_terms(const std::vector<std::string>& tokens) const {
    std::vector<std::string> terms;
    terms.reserve(tokens.size() * (options_.bigrams ? 2 : 1));
    for (const auto& t : tokens) {
        if (!is_stopword(t)) terms.push_back(t);
    }
    if (options_.bigrams) {
        for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
            if (is_stopword(tokens[i]) || is_stopword(tokens[i + 1])) continue;
            terms.push_back(tokens[i] + "_" + tokens[i + 1]);
        }
    }
    return terms;
}

void Corpus::build_index() {
    for (const auto& [doc_id, doc] : documents_) {
        std::map<std::string, int> counts;  // ordered so postings are appended deterministically
        for (auto& term : index_terms(doc.tokens)) {
            ++counts[term];
        }
        for (const auto& [term, tf] : counts) {
            index_[term].emplace_back(doc_id, tf);
            ++doc_freq_[term];
        }
    }
    for (const auto& [doc_id, doc] : documents_) {
        std::map<std::string, int> counts;
        for (auto& term : index_terms(doc.tokens)) {
            ++counts[term];
        }
        double sq = 0.0;
        for (const auto& [term, tf] : counts) {
            const double w = tf * idf(term);
            sq += w * w;
        }
        doc_norm_[doc_id] = std::sqrt(sq);
    }
}

const Document* Corpus::find(std::string_view doc_id) const {
    auto it = documents_.find(std::string(doc_id));
    return it == documents_.end() ? nullptr : &it->second;
}

double Corpus::idf(std::string_view term) const {
    if (is_stopword(term)) return 0.0;
    auto it = doc_freq_.find(std::string(term));
    const int df = it == doc_freq_.end() ? 0 : it->second;
    return std::log((static_cast<double>(doc_count()) + 1.0) / (df + 1.0)) + 1.0;
}

std::vector<ScoredDoc> Corpus::query_top_docs(std::string_view query, int n) const {
    if (n < 1) throw ConfigError("query_top_docs requires n >= 1");
    if (documents_.empty()) throw ConfigError("query_top_docs on empty corpus");

    std::map<std::string, int> query_tf;
    for (auto& term : index_terms(tokenize(query))) {
        ++query_tf[term];
    }
    double query_sq = 0.0;
    for (const auto& [term, tf] : query_tf) {
        const double w = tf * idf(term);
        query_sq += w * w;
    }
    const double query_norm = std::sqrt(query_sq);
    if (query_norm == 0.0) return {};

    std::map<std::string, double> dot;  // doc_id -> accumulated dot product
    for (const auto& [term, tf] : query_tf) {
        auto postings = index_.find(term);
        if (postings == index_.end()) continue;
        const double w_query = tf * idf(term);
        for (const auto& [doc_id, doc_tf] : postings->second) {
            dot[doc_id] += w_query * doc_tf * idf(term);
        }
    }

    std::vector<ScoredDoc> scored;
    scored.reserve(dot.size());
    for (const auto& [doc_id, d] : dot) {
        const double norm = doc_norm_.at(doc_id);
        if (norm == 0.0) continue;
        const double score = d / (query_norm * norm);
        if (score > 0.0) scored.push_back({doc_id, score});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (scored.size() > static_cast<std::size_t>(n)) scored.resize(static_cast<std::size_t>(n));
    return scored;
}

}  // namespace qanno
