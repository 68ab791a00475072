#pragma once

// BM25 inverted index over notes or evidence units, two-stage note->unit
// retrieval with diversity constraints, and budgeted evidence packing with
// seeded dropout.
//
// BM25 variant pinned by this artifact: Okapi tf saturation with the
// non-negative IDF form ln((N - df + 0.5) / (df + 0.5) + 1), k1=1.2, b=0.75.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "veridpo/corpus.hpp"
#include "veridpo/parallel.hpp"

namespace veridpo::retrieval {

enum class IndexLevel { NoteLevel, UnitLevel };

struct IndexDoc {
    std::string id;       // note_id or unit_id
    std::string note_id;  // owning note (== id at note level)
    std::int64_t time = 0;
    std::string text;  // normalized at build time
};

struct Posting {
    std::int32_t doc = 0;  // index into docs, ascending within a term
    std::int32_t tf = 0;
};

struct InvertedIndex {
    IndexLevel level = IndexLevel::UnitLevel;
    std::vector<IndexDoc> docs;  // build order preserved
    std::vector<int> doc_lengths;
    std::unordered_map<std::string, std::vector<Posting>> postings;
    double avg_doc_len = 0.0;
    int doc_count = 0;

    // -1 when absent. The lookup is populated at build/load time; the index
    // is immutable afterwards, so concurrent reads are safe.
    int doc_index(const std::string& id) const;

private:
    friend InvertedIndex build_index(std::span<const IndexDoc>, IndexLevel);
    friend InvertedIndex load_index(const std::string&);
    std::unordered_map<std::string, int> id_lookup_;
};

struct RetrievalParams {
    int top_n_notes = 35;
    int top_k_units = 50;
    double k1 = 1.2;
    double b = 0.75;
    int cap_per_note = 10;
    bool dedup = true;

    void validate() const;  // throws std::invalid_argument
};

struct RetrievalHit {
    std::string unit_id;
    std::string note_id;
    double score = 0.0;
    int rank = 0;
};

struct PackedItem {
    std::string text;
    std::string unit_id;
    double score = 0.0;
    std::int64_t time = 0;
};

struct PackedEvidence {
    std::vector<PackedItem> items;  // (score desc, time asc, unit_id asc); <= 50
    int token_budget = 0;
    std::vector<std::string> dropped_ids;  // removed by dropout, admission order
};

InvertedIndex build_index(std::span<const IndexDoc> docs, IndexLevel level);

// Convenience builders; unit index doc order matches the unit span order.
InvertedIndex build_note_index(std::span<const corpus::Note> notes);
InvertedIndex build_unit_index(std::span<const corpus::EvidenceUnit> units);

// Okapi BM25 for one document; unknown terms contribute 0. Repeated query
// terms contribute once per occurrence in `query_terms`.
double bm25_score(const InvertedIndex& index, std::span<const std::string> query_terms,
                  int doc, double k1 = 1.2, double b = 0.75);

// Stage 1: rank notes, keep top_n_notes (score desc, note_id asc).
// Stage 2: rank units restricted to those notes, walk in (score desc,
// unit_id asc) order applying dedup on normalized text and cap_per_note,
// return at most top_k_units hits with contiguous ranks.
// `units` must be the span the unit index was built from.
std::vector<RetrievalHit> retrieve_two_stage(const std::string& claim,
                                             const InvertedIndex& note_index,
                                             const InvertedIndex& unit_index,
                                             std::span<const corpus::EvidenceUnit> units,
                                             const RetrievalParams& params);

// Independent per-claim retrievals; results identical across modes.
std::vector<std::vector<RetrievalHit>> retrieve_batch(
    std::span<const std::string> claims, const InvertedIndex& note_index,
    const InvertedIndex& unit_index, std::span<const corpus::EvidenceUnit> units,
    const RetrievalParams& params, ExecMode mode = ExecMode::Parallel);

// Items truncated to per_item_token_cap tokens, admitted in (score desc,
// time asc, unit_id asc) order until the token budget or the 50-item cap is
// exhausted; admitted items then dropped independently with dropout_rate
// using the seeded generator. Deterministic given seed.
PackedEvidence pack_evidence(std::span<const RetrievalHit> hits,
                             std::span<const corpus::EvidenceUnit> units,
                             const InvertedIndex& unit_index, int token_budget,
                             double dropout_rate, std::uint64_t rng_seed,
                             int per_item_token_cap = 64);

// Versioned line-record serialization; round-trip exact (scores from a
// loaded index equal the original bitwise).
void save_index(const InvertedIndex& index, const std::string& path);
InvertedIndex load_index(const std::string& path);

}  // namespace veridpo::retrieval
