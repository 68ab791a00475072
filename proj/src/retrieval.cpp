#include "veridpo/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "veridpo/rng.hpp"
#include "veridpo/text.hpp"
#include "veridpo/util.hpp"

namespace veridpo::retrieval {

using json = nlohmann::json;

void RetrievalParams::validate() const {
    if (top_n_notes < 1) throw std::invalid_argument("top_n_notes must be >= 1");
    if (top_k_units < 1) throw std::invalid_argument("top_k_units must be >= 1");
    if (!(k1 > 0.0)) throw std::invalid_argument("k1 must be > 0");
    if (b < 0.0 || b > 1.0) throw std::invalid_argument("b must be in [0,1]");
    if (cap_per_note < 1) throw std::invalid_argument("cap_per_note must be >= 1");
}

int InvertedIndex::doc_index(const std::string& id) const {
    auto it = id_lookup_.find(id);
    return it == id_lookup_.end() ? -1 : it->second;
}

InvertedIndex build_index(std::span<const IndexDoc> docs, IndexLevel level) {
    if (docs.empty()) throw std::invalid_argument("cannot build index over zero documents");
    InvertedIndex index;
    index.level = level;
    index.docs.assign(docs.begin(), docs.end());
    index.doc_count = static_cast<int>(docs.size());
    index.doc_lengths.resize(docs.size());

    long long total_len = 0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        auto& doc = index.docs[d];
        doc.text = text::normalize(doc.text);
        auto tokens = text::tokenize(doc.text);
        index.doc_lengths[d] = static_cast<int>(tokens.size());
        total_len += static_cast<long long>(tokens.size());
        std::map<std::string, int> tf;  // sorted so posting lists build deterministically
        for (auto& t : tokens) ++tf[t];
        for (auto& [term, count] : tf) {
            index.postings[term].push_back(
                {static_cast<std::int32_t>(d), static_cast<std::int32_t>(count)});
        }
    }
    index.avg_doc_len = static_cast<double>(total_len) / static_cast<double>(index.doc_count);
    for (std::size_t i = 0; i < index.docs.size(); ++i) {
        index.id_lookup_.emplace(index.docs[i].id, static_cast<int>(i));
    }
    return index;
}

InvertedIndex build_note_index(std::span<const corpus::Note> notes) {
    std::vector<IndexDoc> docs;
    docs.reserve(notes.size());
    for (const auto& n : notes) docs.push_back({n.note_id, n.note_id, n.chart_time, n.text});
    return build_index(docs, IndexLevel::NoteLevel);
}

InvertedIndex build_unit_index(std::span<const corpus::EvidenceUnit> units) {
    std::vector<IndexDoc> docs;
    docs.reserve(units.size());
    for (const auto& u : units) docs.push_back({u.unit_id, u.note_id, u.time, u.text});
    return build_index(docs, IndexLevel::UnitLevel);
}

namespace {

inline double idf(int doc_count, std::size_t df) {
    const double n = static_cast<double>(doc_count);
    const double d = static_cast<double>(df);
    return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
}

inline double tf_factor(double tf, double k1, double b, double len, double avg_len) {
    return tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg_len));
}

// One accumulator pass over the postings: every doc gets its score, term
// contributions added in query order (bitwise identical to bm25_score).
std::vector<double> score_all(const InvertedIndex& index,
                              std::span<const std::string> query_terms, double k1, double b) {
    std::vector<double> scores(static_cast<std::size_t>(index.doc_count), 0.0);
    for (const auto& term : query_terms) {
        auto it = index.postings.find(term);
        if (it == index.postings.end()) continue;
        const double w = idf(index.doc_count, it->second.size());
        for (const auto& p : it->second) {
            const auto d = static_cast<std::size_t>(p.doc);
            scores[d] += w * tf_factor(static_cast<double>(p.tf), k1, b,
                                       static_cast<double>(index.doc_lengths[d]),
                                       index.avg_doc_len);
        }
    }
    return scores;
}

}  // namespace

double bm25_score(const InvertedIndex& index, std::span<const std::string> query_terms,
                  int doc, double k1, double b) {
    if (doc < 0 || doc >= index.doc_count) throw std::out_of_range("doc not in index");
    const double len = static_cast<double>(index.doc_lengths[static_cast<std::size_t>(doc)]);
    double score = 0.0;
    for (const auto& term : query_terms) {
        auto it = index.postings.find(term);
        if (it == index.postings.end()) continue;
        const auto& plist = it->second;
        auto p = std::lower_bound(plist.begin(), plist.end(), doc,
                                  [](const Posting& a, int d) { return a.doc < d; });
        if (p == plist.end() || p->doc != doc) continue;
        score += idf(index.doc_count, plist.size()) *
                 tf_factor(static_cast<double>(p->tf), k1, b, len, index.avg_doc_len);
    }
    return score;
}

std::vector<RetrievalHit> retrieve_two_stage(const std::string& claim,
                                             const InvertedIndex& note_index,
                                             const InvertedIndex& unit_index,
                                             std::span<const corpus::EvidenceUnit> units,
                                             const RetrievalParams& params) {
    params.validate();
    if (units.size() != static_cast<std::size_t>(unit_index.doc_count)) {
        throw std::invalid_argument("unit span does not match unit index");
    }
    const auto query = text::tokenize(text::normalize(claim));

    // Stage 1: top-N notes, zero-score notes included in the ranking.
    auto note_scores = score_all(note_index, query, params.k1, params.b);
    std::vector<int> note_order(note_scores.size());
    for (std::size_t i = 0; i < note_order.size(); ++i) note_order[i] = static_cast<int>(i);
    std::sort(note_order.begin(), note_order.end(), [&](int a, int b2) {
        const auto sa = note_scores[static_cast<std::size_t>(a)];
        const auto sb = note_scores[static_cast<std::size_t>(b2)];
        if (sa != sb) return sa > sb;
        return note_index.docs[static_cast<std::size_t>(a)].id <
               note_index.docs[static_cast<std::size_t>(b2)].id;
    });
    std::unordered_set<std::string> selected_notes;
    for (std::size_t i = 0; i < note_order.size() && i < static_cast<std::size_t>(params.top_n_notes); ++i) {
        selected_notes.insert(note_index.docs[static_cast<std::size_t>(note_order[i])].id);
    }

    // Stage 2: rank units restricted to the selected notes.
    auto unit_scores = score_all(unit_index, query, params.k1, params.b);
    std::vector<int> candidates;
    candidates.reserve(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        if (selected_notes.count(units[i].note_id)) candidates.push_back(static_cast<int>(i));
    }
    std::sort(candidates.begin(), candidates.end(), [&](int a, int b2) {
        const auto sa = unit_scores[static_cast<std::size_t>(a)];
        const auto sb = unit_scores[static_cast<std::size_t>(b2)];
        if (sa != sb) return sa > sb;
        return units[static_cast<std::size_t>(a)].unit_id <
               units[static_cast<std::size_t>(b2)].unit_id;
    });

    std::vector<RetrievalHit> hits;
    std::unordered_set<std::uint64_t> seen_text;
    std::unordered_map<std::string, int> per_note;
    for (int c : candidates) {
        if (hits.size() >= static_cast<std::size_t>(params.top_k_units)) break;
        const auto& u = units[static_cast<std::size_t>(c)];
        if (params.dedup && !seen_text.insert(fnv1a64(u.text)).second) continue;
        if (params.cap_per_note > 0) {
            int& used = per_note[u.note_id];
            if (used >= params.cap_per_note) continue;
            ++used;
        }
        hits.push_back({u.unit_id, u.note_id, unit_scores[static_cast<std::size_t>(c)],
                        static_cast<int>(hits.size())});
    }
    return hits;
}

std::vector<std::vector<RetrievalHit>> retrieve_batch(
    std::span<const std::string> claims, const InvertedIndex& note_index,
    const InvertedIndex& unit_index, std::span<const corpus::EvidenceUnit> units,
    const RetrievalParams& params, ExecMode mode) {
    std::vector<std::vector<RetrievalHit>> out(claims.size());
    parallel_for(claims.size(), mode, [&](std::size_t i) {
        out[i] = retrieve_two_stage(claims[i], note_index, unit_index, units, params);
    });
    return out;
}

PackedEvidence pack_evidence(std::span<const RetrievalHit> hits,
                             std::span<const corpus::EvidenceUnit> units,
                             const InvertedIndex& unit_index, int token_budget,
                             double dropout_rate, std::uint64_t rng_seed,
                             int per_item_token_cap) {
    if (token_budget <= 0) throw std::invalid_argument("token_budget must be > 0");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw std::invalid_argument("dropout_rate must be in [0,1)");
    }
    PackedEvidence out;
    out.token_budget = token_budget;

    struct Entry {
        PackedItem item;
        int tokens = 0;
    };
    std::vector<Entry> entries;
    entries.reserve(hits.size());
    for (const auto& h : hits) {
        int d = unit_index.doc_index(h.unit_id);
        if (d < 0) continue;
        const auto& u = units[static_cast<std::size_t>(d)];
        Entry e;
        e.item.text = text::truncate_words(u.text, static_cast<std::size_t>(per_item_token_cap));
        e.item.unit_id = u.unit_id;
        e.item.score = h.score;
        e.item.time = u.time;
        e.tokens = static_cast<int>(text::token_count(e.item.text));
        entries.push_back(std::move(e));
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.item.score != b.item.score) return a.item.score > b.item.score;
        if (a.item.time != b.item.time) return a.item.time < b.item.time;
        return a.item.unit_id < b.item.unit_id;
    });

    constexpr std::size_t kMaxItems = 50;
    std::vector<PackedItem> admitted;
    int used = 0;
    for (auto& e : entries) {
        if (admitted.size() >= kMaxItems) break;
        if (used + e.tokens > token_budget) break;
        used += e.tokens;
        admitted.push_back(std::move(e.item));
    }

    if (dropout_rate > 0.0) {
        SplitMix64 rng(rng_seed);
        for (auto& item : admitted) {
            if (rng.u01() < dropout_rate) {
                out.dropped_ids.push_back(item.unit_id);
            } else {
                out.items.push_back(std::move(item));
            }
        }
    } else {
        out.items = std::move(admitted);
    }
    return out;
}

void save_index(const InvertedIndex& index, const std::string& path) {
    std::ofstream outf(path, std::ios::binary);
    if (!outf) throw std::runtime_error("cannot write " + path);
    json header{{"format", "veridpo.index.v1"},
                {"level", index.level == IndexLevel::NoteLevel ? "note" : "unit"},
                {"doc_count", index.doc_count}};
    outf << header.dump() << '\n';
    for (std::size_t d = 0; d < index.docs.size(); ++d) {
        const auto& doc = index.docs[d];
        json rec{{"doc", d},       {"id", doc.id},     {"note_id", doc.note_id},
                 {"time", doc.time}, {"text", doc.text}, {"len", index.doc_lengths[d]}};
        outf << rec.dump() << '\n';
    }
    std::vector<const std::string*> terms;
    terms.reserve(index.postings.size());
    for (const auto& [term, _] : index.postings) terms.push_back(&term);
    std::sort(terms.begin(), terms.end(),
              [](const std::string* a, const std::string* b) { return *a < *b; });
    for (const auto* term : terms) {
        const auto& plist = index.postings.at(*term);
        json arr = json::array();
        for (const auto& p : plist) arr.push_back({p.doc, p.tf});
        json rec{{"term", *term}, {"p", arr}};
        outf << rec.dump() << '\n';
    }
}

InvertedIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty index file " + path);
    json header = json::parse(line);
    if (header.value("format", "") != "veridpo.index.v1") {
        throw std::runtime_error("unrecognized index format in " + path);
    }
    InvertedIndex index;
    index.level = header.value("level", "unit") == "note" ? IndexLevel::NoteLevel
                                                          : IndexLevel::UnitLevel;
    index.doc_count = header.at("doc_count").get<int>();
    index.docs.resize(static_cast<std::size_t>(index.doc_count));
    index.doc_lengths.resize(static_cast<std::size_t>(index.doc_count));
    long long total_len = 0;
    while (std::getline(in, line)) {
        if (is_blank(line)) continue;
        json rec = json::parse(line);
        if (rec.contains("doc")) {
            auto d = rec.at("doc").get<std::size_t>();
            index.docs[d].id = rec.at("id").get<std::string>();
            index.docs[d].note_id = rec.at("note_id").get<std::string>();
            index.docs[d].time = rec.at("time").get<std::int64_t>();
            index.docs[d].text = rec.at("text").get<std::string>();
            index.doc_lengths[d] = rec.at("len").get<int>();
            total_len += index.doc_lengths[d];
        } else if (rec.contains("term")) {
            auto& plist = index.postings[rec.at("term").get<std::string>()];
            for (const auto& pair : rec.at("p")) {
                plist.push_back({pair.at(0).get<std::int32_t>(), pair.at(1).get<std::int32_t>()});
            }
        }
    }
    // Same summation order as build_index, so the mean is bit-identical.
    index.avg_doc_len = static_cast<double>(total_len) / static_cast<double>(index.doc_count);
    for (std::size_t i = 0; i < index.docs.size(); ++i) {
        index.id_lookup_.emplace(index.docs[i].id, static_cast<int>(i));
    }
    return index;
}

}  // namespace veridpo::retrieval
