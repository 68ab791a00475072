#include "veridpo/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "veridpo/text.hpp"
#include "veridpo/util.hpp"

namespace veridpo::corpus {

using json = nlohmann::json;

namespace {

std::string require_string(const json& rec, const char* key) {
    if (!rec.contains(key) || !rec[key].is_string() || rec[key].get<std::string>().empty()) {
        throw std::runtime_error(std::string("missing or empty field '") + key + "'");
    }
    return rec[key].get<std::string>();
}

std::int64_t parse_time(const json& rec) {
    if (!rec.contains("chart_time") || rec["chart_time"].is_null()) return 0;
    const auto& v = rec["chart_time"];
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        std::size_t used = 0;
        std::int64_t t = 0;
        try {
            t = std::stoll(s, &used);
        } catch (const std::exception&) {
            throw std::runtime_error("unparseable chart_time '" + s + "'");
        }
        if (used != s.size()) throw std::runtime_error("unparseable chart_time '" + s + "'");
        return t;
    }
    throw std::runtime_error("chart_time must be integer or string");
}

}  // namespace

IngestResult ingest_notes(std::istream& source) {
    IngestResult result;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(source, line)) {
        ++lineno;
        if (is_blank(line)) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            result.errors.push_back({lineno, "line " + std::to_string(lineno) + ": invalid JSON record"});
            continue;
        }
        if (rec.contains("record") && rec["record"] == "header") continue;
        Note note;
        try {
            note.note_id = require_string(rec, "note_id");
            note.subject_id = require_string(rec, "subject_id");
            note.text = require_string(rec, "text");
            note.chart_time = parse_time(rec);
        } catch (const std::exception& e) {
            result.errors.push_back({lineno, "line " + std::to_string(lineno) + ": " + e.what()});
            continue;
        }
        if (rec.contains("admission_id") && rec["admission_id"].is_string()) {
            note.admission_id = rec["admission_id"].get<std::string>();
        }
        if (rec.contains("category") && rec["category"].is_string()) {
            note.category = rec["category"].get<std::string>();
        }
        if (!seen_ids.insert(note.note_id).second) {
            throw std::runtime_error("duplicate note_id '" + note.note_id + "' at line " +
                                     std::to_string(lineno));
        }
        result.notes.push_back(std::move(note));
    }
    std::sort(result.notes.begin(), result.notes.end(), [](const Note& a, const Note& b) {
        if (a.subject_id != b.subject_id) return a.subject_id < b.subject_id;
        if (a.chart_time != b.chart_time) return a.chart_time < b.chart_time;
        return a.note_id < b.note_id;
    });
    return result;
}

IngestResult ingest_notes_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return ingest_notes(in);
}

ExclusionList load_exclusions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    ExclusionList out;
    std::string line;
    while (std::getline(in, line)) {
        auto id = trim(line);
        if (!id.empty()) out.excluded_note_ids.insert(id);
    }
    return out;
}

std::vector<Note> exclude_provenance(const std::vector<Note>& notes,
                                     const ExclusionList& exclusion) {
    std::vector<Note> out;
    out.reserve(notes.size());
    for (const auto& n : notes) {
        if (!exclusion.excluded_note_ids.count(n.note_id)) out.push_back(n);
    }
    return out;
}

std::vector<std::string> coarse_units(const std::string& note_text) {
    std::vector<std::string> units;
    std::string current;
    for (auto line : split_lines(note_text)) {
        if (is_blank(line)) {
            if (!current.empty()) {
                units.push_back(current);
                current.clear();
            }
            continue;
        }
        if (!current.empty()) current.push_back('\n');
        current.append(line);
    }
    if (!current.empty()) units.push_back(current);
    return units;
}

bool information_dense(const std::string& normalized_span) {
    bool digit = false, alpha = false;
    for (unsigned char c : normalized_span) {
        digit = digit || (c >= '0' && c <= '9');
        alpha = alpha || (c >= 'a' && c <= 'z');
        if (digit && alpha) return true;
    }
    return false;
}

std::vector<EvidenceUnit> segment_note(const Note& note, const SegmentationConfig& config) {
    std::vector<std::string> spans;
    for (const auto& coarse : coarse_units(note.text)) {
        for (auto [b, e] : text::sentence_spans(coarse)) {
            std::string normalized = text::normalize(std::string_view(coarse).substr(b, e - b));
            if (normalized.empty()) continue;
            bool keep = static_cast<int>(normalized.size()) >= config.min_span_chars ||
                        information_dense(normalized);
            if (!keep) continue;
            const std::size_t max_len = static_cast<std::size_t>(config.max_span_chars);
            if (normalized.size() <= max_len) {
                spans.push_back(std::move(normalized));
            } else {
                for (std::size_t off = 0; off < normalized.size(); off += max_len) {
                    spans.push_back(normalized.substr(off, max_len));
                }
            }
        }
    }

    std::vector<EvidenceUnit> units;
    units.reserve(spans.size());
    int idx = 0;
    for (auto& s : spans) {
        EvidenceUnit u;
        u.note_id = note.note_id;
        u.subject_id = note.subject_id;
        u.span_index = idx;
        u.char_len = static_cast<int>(s.size());
        u.time = note.chart_time;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "#%05d", idx);
        u.unit_id = note.note_id + buf;
        u.text = std::move(s);
        units.push_back(std::move(u));
        ++idx;
    }
    return units;
}

}  // namespace veridpo::corpus
