#include "oodret/retrieval_index.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include "le_io.hpp"
#include "oodret/kernels.hpp"
#include "oodret/rle.hpp"

namespace oodret {

using nlohmann::json;

namespace {

constexpr char kSnapshotMagic[4] = {'O', 'O', 'D', 'I'};
constexpr std::uint8_t kSnapshotVersion = 1;

double vector_norm(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * x;
  return std::sqrt(sum);
}

void check_finite(std::span<const float> v, const std::string& what) {
  for (float x : v) {
    if (!std::isfinite(x)) throw Error(Errc::invalid_argument, what + " has a non-finite entry");
  }
}

}  // namespace

double cosine_similarity(std::span<const float> g, std::span<const float> f) {
  if (g.size() != f.size()) {
    throw Error(Errc::dimension_mismatch, "cosine similarity of vectors with dimensions " +
                                              std::to_string(g.size()) + " and " + std::to_string(f.size()));
  }
  const double ng = vector_norm(g);
  const double nf = vector_norm(f);
  if (ng == 0.0 || nf == 0.0) throw Error(Errc::zero_vector, "cosine similarity of a zero vector");
  double dot = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) dot += static_cast<double>(g[j]) * f[j];
  return std::clamp(dot / (ng * nf), -1.0, 1.0);
}

RetrievalIndex::RetrievalIndex(const RetrievalIndex& other) {
  std::shared_lock lock(other.mutex_);
  provenance = other.provenance;
  dim_ = other.dim_;
  block_ = other.block_;
  norms_ = other.norms_;
  owner_ = other.owner_;
  crop_pos_ = other.crop_pos_;
  sequences_ = other.sequences_;
  first_vector_ = other.first_vector_;
  by_id_ = other.by_id_;
}

RetrievalIndex& RetrievalIndex::operator=(const RetrievalIndex& other) {
  if (this == &other) return *this;
  RetrievalIndex copy(other);
  std::unique_lock lock(mutex_);
  provenance = std::move(copy.provenance);
  dim_ = copy.dim_;
  block_ = std::move(copy.block_);
  norms_ = std::move(copy.norms_);
  owner_ = std::move(copy.owner_);
  crop_pos_ = std::move(copy.crop_pos_);
  sequences_ = std::move(copy.sequences_);
  first_vector_ = std::move(copy.first_vector_);
  by_id_ = std::move(copy.by_id_);
  return *this;
}

void RetrievalIndex::ingest(SequenceRecord seq) {
  if (seq.embeddings.empty()) {
    throw Error(Errc::missing_embeddings, "sequence " + seq.sequence_id + " has no embeddings");
  }
  if (seq.embeddings.size() != seq.crops.size()) {
    throw Error(Errc::missing_embeddings, "sequence " + seq.sequence_id + " has " +
                                              std::to_string(seq.embeddings.size()) + " embeddings for " +
                                              std::to_string(seq.crops.size()) + " crops");
  }
  const std::size_t d = seq.embeddings.front().size();
  std::vector<double> norms;
  for (const auto& e : seq.embeddings) {
    if (e.size() != d) throw Error(Errc::dimension_mismatch, "sequence " + seq.sequence_id + " mixes dimensions");
    check_finite(e, "embedding of " + seq.sequence_id);
    const double n = vector_norm(e);
    if (n == 0.0) throw Error(Errc::zero_vector, "sequence " + seq.sequence_id + " has a zero embedding");
    norms.push_back(n);
  }

  std::unique_lock lock(mutex_);
  const bool fresh = sequences_.empty();
  if (!fresh && d != dim_) {
    throw Error(Errc::dimension_mismatch, "index dimension is " + std::to_string(dim_) + ", sequence " +
                                              seq.sequence_id + " has dimension " + std::to_string(d));
  }
  if (d == 0) throw Error(Errc::dimension_mismatch, "embeddings must have dimension >= 1");
  if (fresh) dim_ = d;

  auto embeddings = std::move(seq.embeddings);
  seq.embeddings.clear();
  const auto existing = by_id_.find(seq.sequence_id);
  if (existing == by_id_.end()) {
    const auto pos = static_cast<std::uint32_t>(sequences_.size());
    for (std::size_t c = 0; c < embeddings.size(); ++c) {
      block_.insert(block_.end(), embeddings[c].begin(), embeddings[c].end());
      norms_.push_back(norms[c]);
      owner_.push_back(pos);
      crop_pos_.push_back(static_cast<std::uint32_t>(c));
    }
    by_id_.emplace(seq.sequence_id, sequences_.size());
    sequences_.push_back(std::move(seq));
  } else {
    // Replace in place: rebuild the vector block with the new crops spliced in.
    const std::size_t pos = existing->second;
    std::vector<float> block;
    std::vector<double> vnorms;
    std::vector<std::uint32_t> owner, crop_pos;
    block.reserve(block_.size());
    for (std::size_t v = 0; v < norms_.size();) {
      if (owner_[v] != pos) {
        block.insert(block.end(), block_.begin() + static_cast<std::ptrdiff_t>(v * dim_),
                     block_.begin() + static_cast<std::ptrdiff_t>((v + 1) * dim_));
        vnorms.push_back(norms_[v]);
        owner.push_back(owner_[v]);
        crop_pos.push_back(crop_pos_[v]);
        ++v;
        continue;
      }
      while (v < norms_.size() && owner_[v] == pos) ++v;
      for (std::size_t c = 0; c < embeddings.size(); ++c) {
        block.insert(block.end(), embeddings[c].begin(), embeddings[c].end());
        vnorms.push_back(norms[c]);
        owner.push_back(static_cast<std::uint32_t>(pos));
        crop_pos.push_back(static_cast<std::uint32_t>(c));
      }
    }
    block_ = std::move(block);
    norms_ = std::move(vnorms);
    owner_ = std::move(owner);
    crop_pos_ = std::move(crop_pos);
    sequences_[pos] = std::move(seq);
  }
  rebuild_offsets();
}

void RetrievalIndex::rebuild_offsets() {
  first_vector_.assign(sequences_.size() + 1, norms_.size());
  for (std::size_t v = norms_.size(); v-- > 0;) first_vector_[owner_[v]] = v;
  // Sequences are stored contiguously, so the end of one is the start of the next.
}

std::size_t RetrievalIndex::dimension() const {
  std::shared_lock lock(mutex_);
  return dim_;
}

std::size_t RetrievalIndex::size() const {
  std::shared_lock lock(mutex_);
  return sequences_.size();
}

std::size_t RetrievalIndex::vector_count() const {
  std::shared_lock lock(mutex_);
  return norms_.size();
}

std::vector<std::string> RetrievalIndex::sequence_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& s : sequences_) ids.push_back(s.sequence_id);
  return ids;
}

std::optional<SequenceRecord> RetrievalIndex::sequence(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  SequenceRecord rec = sequences_[it->second];
  const std::size_t first = first_vector_[it->second];
  for (std::size_t c = 0; c < rec.crops.size(); ++c) {
    const float* row = block_.data() + (first + c) * dim_;
    rec.embeddings.emplace_back(row, row + dim_);
  }
  return rec;
}

void RetrievalIndex::check_query(const QueryEmbedding& query) const {
  check_finite(query.values, "query embedding");
  if (vector_norm(query.values) == 0.0) throw Error(Errc::zero_vector, "query embedding is the zero vector");
  if (!sequences_.empty() && query.values.size() != dim_) {
    throw Error(Errc::dimension_mismatch, "query has dimension " + std::to_string(query.values.size()) +
                                              ", index has dimension " + std::to_string(dim_));
  }
}

std::vector<double> RetrievalIndex::scan_locked(const QueryEmbedding& query) const {
  check_query(query);
  std::vector<double> sims(norms_.size());
  if (!sims.empty()) {
    kernels::parallel::cosine_scan(block_, norms_, dim_, query.values, vector_norm(query.values), sims);
  }
  return sims;
}

std::vector<double> RetrievalIndex::scan(const QueryEmbedding& query) const {
  std::shared_lock lock(mutex_);
  return scan_locked(query);
}

std::vector<double> RetrievalIndex::crop_similarities(const std::string& id, const QueryEmbedding& query) const {
  std::shared_lock lock(mutex_);
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) throw Error(Errc::unknown_sequence, "unknown sequence '" + id + "'");
  check_query(query);
  const std::size_t first = first_vector_[it->second];
  const std::size_t count = sequences_[it->second].crops.size();
  std::vector<double> sims(count);
  kernels::parallel::cosine_scan(std::span<const float>(block_).subspan(first * dim_, count * dim_),
                                 std::span<const double>(norms_).subspan(first, count), dim_, query.values,
                                 vector_norm(query.values), sims);
  return sims;
}

RetrievalIndex::SequenceScore RetrievalIndex::sequence_score(const std::string& id,
                                                             const QueryEmbedding& query) const {
  const auto sims = crop_similarities(id, query);
  const auto best = std::max_element(sims.begin(), sims.end());  // first maximum = earliest crop
  return {*best, static_cast<std::size_t>(best - sims.begin())};
}

std::vector<QueryResult> RetrievalIndex::query(const QueryEmbedding& query, double tau,
                                               std::optional<std::size_t> top_k, bool with_traces) const {
  if (!(tau >= -1.0 && tau <= 1.0)) {
    throw Error(Errc::invalid_argument, "tau must lie in [-1, 1], got " + std::to_string(tau));
  }
  std::shared_lock lock(mutex_);
  if (sequences_.empty()) return {};
  const auto sims = scan_locked(query);
  std::vector<QueryResult> results;
  for (std::size_t s = 0; s < sequences_.size(); ++s) {
    const std::size_t first = first_vector_[s];
    const std::size_t count = sequences_[s].crops.size();
    std::size_t best = 0;
    for (std::size_t c = 1; c < count; ++c) {
      if (sims[first + c] > sims[first + best]) best = c;
    }
    const double score = sims[first + best];
    if (score < tau) continue;
    QueryResult r;
    r.sequence_id = sequences_[s].sequence_id;
    r.score = score;
    r.best_crop = best;
    r.best_crop_ref = sequences_[s].crops[best];
    if (with_traces) {
      r.crop_scores.assign(sims.begin() + static_cast<std::ptrdiff_t>(first),
                           sims.begin() + static_cast<std::ptrdiff_t>(first + count));
    }
    results.push_back(std::move(r));
  }
  std::sort(results.begin(), results.end(), [](const QueryResult& a, const QueryResult& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.sequence_id < b.sequence_id;
  });
  if (top_k && results.size() > *top_k) results.resize(*top_k);
  for (std::size_t i = 0; i < results.size(); ++i) results[i].rank = i + 1;
  return results;
}

// Snapshot layout (little-endian):
//   "OODI" u8 version u8[3] zero
//   u32 dim, u64 vector_count, u32 sequence_count, u64 metadata_bytes
//   metadata JSON (sequence records without embeddings, provenance)
//   f32[vector_count * dim] vector block
//   (u32 sequence, u32 crop)[vector_count] back-reference table
void RetrievalIndex::write(std::ostream& out) const {
  std::shared_lock lock(mutex_);
  json seqs = json::array();
  for (const auto& s : sequences_) seqs.push_back(to_json(s, false));
  const json meta = {{"sequences", std::move(seqs)}, {"provenance", provenance}};
  const std::string meta_text = meta.dump();

  out.write(kSnapshotMagic, 4);
  le::put<std::uint8_t>(out, kSnapshotVersion);
  for (int i = 0; i < 3; ++i) le::put<std::uint8_t>(out, 0);
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  le::put<std::uint64_t>(out, norms_.size());
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(sequences_.size()));
  le::put<std::uint64_t>(out, meta_text.size());
  out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
  le::put_array(out, block_.data(), block_.size());
  for (std::size_t v = 0; v < norms_.size(); ++v) {
    le::put<std::uint32_t>(out, owner_[v]);
    le::put<std::uint32_t>(out, crop_pos_[v]);
  }
  if (!out) throw Error(Errc::io_error, "failed writing index snapshot");
}

RetrievalIndex RetrievalIndex::read(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4) throw Error(Errc::truncated, "index snapshot truncated in header");
  if (!std::equal(magic, magic + 4, kSnapshotMagic)) throw Error(Errc::bad_magic, "not an index snapshot");
  const auto version = le::get<std::uint8_t>(in, "version");
  if (version != kSnapshotVersion) {
    throw Error(Errc::bad_version, "unsupported index snapshot version " + std::to_string(version));
  }
  for (int i = 0; i < 3; ++i) le::get<std::uint8_t>(in, "header padding");
  const auto dim = le::get<std::uint32_t>(in, "dimension");
  const auto count = le::get<std::uint64_t>(in, "vector count");
  const auto seq_count = le::get<std::uint32_t>(in, "sequence count");
  const auto meta_bytes = le::get<std::uint64_t>(in, "metadata length");
  if (meta_bytes > (1ull << 34) || count > (1ull << 34)) throw Error(Errc::truncated, "implausible snapshot sizes");
  std::string meta_text(meta_bytes, '\0');
  le::get_array(in, meta_text.data(), meta_text.size(), "metadata");
  json meta;
  try {
    meta = json::parse(meta_text);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("index snapshot metadata: ") + e.what());
  }

  RetrievalIndex index;
  index.dim_ = dim;
  index.provenance = meta.value("provenance", json());
  for (const auto& s : meta.at("sequences")) index.sequences_.push_back(sequence_from_json(s));
  if (index.sequences_.size() != seq_count) throw Error(Errc::parse_error, "snapshot sequence count mismatch");
  index.block_.resize(count * dim);
  le::get_array(in, index.block_.data(), index.block_.size(), "vector block");
  index.owner_.resize(count);
  index.crop_pos_.resize(count);
  for (std::size_t v = 0; v < count; ++v) {
    index.owner_[v] = le::get<std::uint32_t>(in, "back-reference table");
    index.crop_pos_[v] = le::get<std::uint32_t>(in, "back-reference table");
  }
  in.peek();
  if (!in.eof()) throw Error(Errc::parse_error, "trailing bytes after index snapshot");

  // Back-references must describe each sequence's crops contiguously, in order.
  std::size_t v = 0;
  for (std::uint32_t s = 0; s < seq_count; ++s) {
    for (std::size_t c = 0; c < index.sequences_[s].crops.size(); ++c, ++v) {
      if (v >= count || index.owner_[v] != s || index.crop_pos_[v] != c) {
        throw Error(Errc::parse_error, "snapshot back-reference table is inconsistent");
      }
    }
  }
  if (v != count) throw Error(Errc::parse_error, "snapshot has vectors without sequences");
  index.norms_.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    index.norms_[i] = vector_norm(std::span<const float>(index.block_).subspan(i * dim, dim));
    if (index.norms_[i] == 0.0) throw Error(Errc::zero_vector, "snapshot contains a zero vector");
  }
  for (std::size_t s = 0; s < index.sequences_.size(); ++s) {
    index.by_id_.emplace(index.sequences_[s].sequence_id, s);
  }
  index.rebuild_offsets();
  return index;
}

void RetrievalIndex::save(const std::filesystem::path& path) const {
  // Write-then-rename so readers never observe a half-written snapshot.
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot open " + tmp + " for writing");
    write(out);
  }
  std::filesystem::rename(tmp, path);
}

RetrievalIndex RetrievalIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_file, "cannot open index snapshot " + path.string());
  return read(in);
}

// ---------------------------------------------------------------------------

std::string fold_case(std::string text) {
  for (auto& ch : text) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return text;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

UnknownTermError::UnknownTermError(const std::string& term, std::vector<std::string> suggestions)
    : Error(Errc::unknown_term,
            [&] {
              std::string msg = "unknown query term '" + term + "'";
              if (!suggestions.empty()) {
                msg += "; nearest known terms:";
                for (std::size_t i = 0; i < suggestions.size(); ++i) msg += (i ? ", " : " ") + suggestions[i];
              }
              return msg;
            }()),
      suggestions_(std::move(suggestions)) {}

void Vocabulary::add(const std::string& term, std::vector<float> embedding) {
  if (embedding.empty()) throw Error(Errc::dimension_mismatch, "vocabulary term '" + term + "' has no embedding");
  check_finite(embedding, "vocabulary term '" + term + "'");
  if (vector_norm(embedding) == 0.0) throw Error(Errc::zero_vector, "vocabulary term '" + term + "' is zero");
  if (!terms_.empty() && embedding.size() != dim_) {
    throw Error(Errc::dimension_mismatch, "vocabulary term '" + term + "' has dimension " +
                                              std::to_string(embedding.size()) + ", expected " +
                                              std::to_string(dim_));
  }
  dim_ = embedding.size();
  terms_[fold_case(term)] = std::move(embedding);
}

QueryEmbedding Vocabulary::resolve(const std::string& term) const {
  const auto key = fold_case(term);
  const auto it = terms_.find(key);
  if (it == terms_.end()) throw UnknownTermError(term, suggestions(key));
  return {it->second, QuerySource::vocabulary_term, it->first};
}

std::vector<std::string> Vocabulary::terms() const {
  std::vector<std::string> out;
  for (const auto& [t, _] : terms_) out.push_back(t);
  return out;
}

std::vector<std::string> Vocabulary::suggestions(const std::string& term, std::size_t count) const {
  const auto key = fold_case(term);
  std::vector<std::pair<std::size_t, std::string>> ranked;
  for (const auto& [t, _] : terms_) ranked.emplace_back(edit_distance(key, t), t);
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < count; ++i) out.push_back(ranked[i].second);
  return out;
}

Vocabulary Vocabulary::from_json(const json& doc) {
  Vocabulary vocab;
  try {
    for (const auto& entry : doc.at("terms")) {
      vocab.add(entry.at("term").get<std::string>(), entry.at("embedding").get<std::vector<float>>());
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("vocabulary JSON: ") + e.what());
  }
  return vocab;
}

json Vocabulary::to_json() const {
  json terms = json::array();
  for (const auto& [t, v] : terms_) terms.push_back({{"term", t}, {"embedding", v}});
  return {{"dimension", dim_}, {"terms", std::move(terms)}};
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, "cannot open vocabulary " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, "vocabulary " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

json to_json(const QueryResult& result, bool with_traces) {
  json out = {{"rank", result.rank},
              {"sequence_id", result.sequence_id},
              {"score", result.score},
              {"best_crop", result.best_crop},
              {"best_crop_ref", to_json(result.best_crop_ref)}};
  if (with_traces) out["crop_scores"] = result.crop_scores;
  return out;
}

json query_results_to_json(const std::vector<QueryResult>& results, double tau, bool with_traces) {
  json items = json::array();
  for (const auto& r : results) items.push_back(to_json(r, with_traces));
  return {{"tau", tau}, {"count", results.size()}, {"results", std::move(items)}};
}

}  // namespace oodret
