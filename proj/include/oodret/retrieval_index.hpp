#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "oodret/error.hpp"
#include "oodret/tracker.hpp"

namespace oodret {

enum class QuerySource { raw_vector, vocabulary_term };

struct QueryEmbedding {
  std::vector<float> values;
  QuerySource source = QuerySource::raw_vector;
  std::string term;  // set for vocabulary queries
};

struct QueryResult {
  std::string sequence_id;
  double score = 0.0;  // best per-crop cosine similarity
  std::size_t best_crop = 0;
  CropRef best_crop_ref;
  std::size_t rank = 0;  // 1-based
  std::vector<double> crop_scores;  // per-crop similarity trace, filled on request
};

/// g.f / (|g| |f|), clamped to [-1, 1].
double cosine_similarity(std::span<const float> g, std::span<const float> f);

/// Exact in-memory index over per-crop embeddings. Concurrent queries share
/// a reader lock; ingest takes the writer lock, so a query never sees a
/// partially ingested sequence.
class RetrievalIndex {
 public:
  RetrievalIndex() = default;
  RetrievalIndex(const RetrievalIndex& other);
  RetrievalIndex& operator=(const RetrievalIndex& other);

  /// Stores every crop vector of `seq`. The first ingest fixes the
  /// dimension; re-ingesting a sequence id replaces the old entry.
  void ingest(SequenceRecord seq);

  std::size_t dimension() const;
  std::size_t size() const;  // sequences
  std::size_t vector_count() const;
  std::vector<std::string> sequence_ids() const;
  std::optional<SequenceRecord> sequence(const std::string& id) const;

  struct SequenceScore {
    double score = 0.0;
    std::size_t best_crop = 0;
  };
  SequenceScore sequence_score(const std::string& id, const QueryEmbedding& query) const;
  std::vector<double> crop_similarities(const std::string& id, const QueryEmbedding& query) const;

  /// Sequences with score >= tau, by descending score then sequence id,
  /// truncated to top_k when given.
  std::vector<QueryResult> query(const QueryEmbedding& query, double tau, std::optional<std::size_t> top_k = {},
                                 bool with_traces = false) const;

  /// Similarity of every stored vector in storage order (sequence by
  /// sequence, crops in order).
  std::vector<double> scan(const QueryEmbedding& query) const;

  nlohmann::json provenance;

  void write(std::ostream& out) const;
  static RetrievalIndex read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static RetrievalIndex load(const std::filesystem::path& path);

 private:
  void check_query(const QueryEmbedding& query) const;
  std::vector<double> scan_locked(const QueryEmbedding& query) const;
  void rebuild_offsets();

  mutable std::shared_mutex mutex_;
  std::size_t dim_ = 0;
  std::vector<float> block_;      // vector_count x dim
  std::vector<double> norms_;
  std::vector<std::uint32_t> owner_;     // sequence position per vector
  std::vector<std::uint32_t> crop_pos_;  // crop position per vector
  std::vector<SequenceRecord> sequences_;  // embeddings moved into block_
  std::vector<std::size_t> first_vector_;
  std::map<std::string, std::size_t> by_id_;
};

/// Text-query stand-in: term -> precomputed embedding.
class Vocabulary {
 public:
  void add(const std::string& term, std::vector<float> embedding);
  QueryEmbedding resolve(const std::string& term) const;
  std::vector<std::string> terms() const;
  std::size_t dimension() const noexcept { return dim_; }
  bool empty() const noexcept { return terms_.empty(); }

  /// Up to `count` known terms nearest to `term` by edit distance.
  std::vector<std::string> suggestions(const std::string& term, std::size_t count = 5) const;

  static Vocabulary from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::vector<float>> terms_;
  std::size_t dim_ = 0;
};

class UnknownTermError : public Error {
 public:
  UnknownTermError(const std::string& term, std::vector<std::string> suggestions);
  const std::vector<std::string>& suggestions() const noexcept { return suggestions_; }

 private:
  std::vector<std::string> suggestions_;
};

std::size_t edit_distance(const std::string& a, const std::string& b);
std::string fold_case(std::string text);

nlohmann::json to_json(const QueryResult& result, bool with_traces);
nlohmann::json query_results_to_json(const std::vector<QueryResult>& results, double tau, bool with_traces);

}  // namespace oodret
