#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace qanno {

// Lowercases and splits on any non-alphanumeric character; empty tokens dropped.
std::vector<std::string> tokenize(std::string_view text);

struct Document {
    std::string doc_id;
    std::string title;
    std::string text;
    std::vector<std::string> tokens;  // always tokenize(text)
};

struct CorpusOptions {
    bool bigrams = false;                 // index token bigrams ("a_b") alongside unigrams
    std::vector<std::string> stopwords;   // removed from the index and from query terms
};

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
};

// Immutable after ingestion; any number of threads may query concurrently.
class Corpus {
  public:
    // One JSON object per line with string fields doc_id, title, text.
    // Throws IngestError on malformed lines or duplicate ids, IoError if unreadable.
    static Corpus ingest_file(const std::filesystem::path& path, CorpusOptions options = {});

    // Same ingestion from in-memory records (tokens fields are recomputed).
    static Corpus ingest_records(std::vector<Document> records, CorpusOptions options = {});

    std::size_t doc_count() const { return documents_.size(); }
    const Document* find(std::string_view doc_id) const;
    const std::map<std::string, Document>& documents() const { return documents_; }

    // Smoothed idf, ln((N+1)/(df+1)) + 1; stopwords score 0.
    double idf(std::string_view term) const;

    // Top-n documents by cosine similarity between tf-idf vectors of query and
    // document (raw term counts as tf). Zero-score documents are omitted; ties are
    // broken by ascending doc_id.
    std::vector<ScoredDoc> query_top_docs(std::string_view query, int n) const;

    const CorpusOptions& options() const { return options_; }

  private:
    Corpus() = default;
    void build_index();
    bool is_stopword(std::string_view term) const;
    std::vector<std::string> index_terms(const std::vector<std::string>& tokens) const;

    std::map<std::string, Document> documents_;  // ordered: deterministic iteration
    std::unordered_map<std::string, std::vector<std::pair<std::string, int>>> index_;  // term -> (doc_id, tf)
    std::unordered_map<std::string, int> doc_freq_;
    std::unordered_map<std::string, double> doc_norm_;  // doc_id -> |tf-idf vector|
    std::unordered_set<std::string> stopwords_;
    CorpusOptions options_;
};

}  // namespace qanno
