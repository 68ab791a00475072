#pragma once

// Note ingestion, provenance exclusion, and segmentation of notes into
// normalized evidence units.

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace veridpo::corpus {

struct Note {
    std::string note_id;
    std::string subject_id;
    std::string admission_id;  // optional, empty when absent
    std::string category;
    std::int64_t chart_time = 0;  // seconds; absent timestamps ingest as 0
    std::string text;
};

struct EvidenceUnit {
    std::string unit_id;
    std::string note_id;
    std::string subject_id;
    int span_index = 0;  // order within note
    std::string text;    // normalized
    int char_len = 0;    // == text.size()
    std::int64_t time = 0;  // inherited from note
};

struct ExclusionList {
    std::set<std::string> excluded_note_ids;
};

struct SegmentationConfig {
    int min_span_chars = 15;
    int max_span_chars = 400;
};

struct IngestError {
    std::size_t line = 0;  // 1-based line in the source stream
    std::string message;
};

struct IngestResult {
    std::vector<Note> notes;  // sorted by (subject_id, chart_time, note_id)
    std::vector<IngestError> errors;  // malformed records, skipped
};

// Reads one JSON object per line: {note_id, subject_id, text, [admission_id],
// [category], [chart_time]}. Malformed records become per-line errors and are
// skipped; a duplicate note_id is a hard error (throws).
IngestResult ingest_notes(std::istream& source);
IngestResult ingest_notes_file(const std::string& path);

// Plain-text file of note ids, one per line; blanks ignored.
ExclusionList load_exclusions(const std::string& path);

// Keeps exactly the notes whose id is not excluded; order preserved.
std::vector<Note> exclude_provenance(const std::vector<Note>& notes,
                                     const ExclusionList& exclusion);

// Coarse units: blank-line-separated blocks, newline structure preserved.
// Exposed for the reconstruction invariant test.
std::vector<std::string> coarse_units(const std::string& note_text);

// Coarse split -> sentence-like spans -> normalize -> retain spans with
// char_len >= min_span_chars or matching the information-dense rule (at
// least one digit and one alphabetic character) -> cut overlong spans into
// max_span_chars-sized segments. Deterministic.
std::vector<EvidenceUnit> segment_note(const Note& note, const SegmentationConfig& config);

bool information_dense(const std::string& normalized_span);

}  // namespace veridpo::corpus
