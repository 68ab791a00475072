#pragma once

// Candidate summary cleaning, sentence-level claim segmentation, and the
// validity / duplication / meta-text filters.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace veridpo::claims {

struct Claim {
    std::string claim_id;
    std::string text;  // normalized
    std::pair<std::size_t, std::size_t> source_char_span;  // into the cleaned candidate
};

struct ClaimFilterConfig {
    int min_tokens = 3;
    int min_chars = 15;
    double min_alnum_frac = 0.4;
    // Regex patterns, matched case-insensitively; defaults are line-anchored.
    std::vector<std::string> template_patterns = {R"(^n/a$)", R"(^none$)", R"(^-+$)"};
    std::vector<std::string> meta_patterns = {R"(^\s*summary\s*:)", R"(^\s*note\s*:)",
                                              R"(^\s*as an ai)", R"(^\s*#)"};
};

// Removes lines matching any meta pattern, strips bullet/markup prefixes,
// normalizes whitespace per line (newlines between lines are kept so claim
// boundaries survive). Deterministic; may return "".
std::string clean_candidate(const std::string& raw, const ClaimFilterConfig& config);

// Sentence split of the cleaned text; spans index into `cleaned`, claim text
// is the normalized span. Splitter has no abbreviation handling:
// "Dr. Smith saw pt." segments into 2 claims.
std::vector<Claim> segment_claims(const std::string& cleaned);

bool is_valid_claim(const Claim& claim, const ClaimFilterConfig& config);

// (|claims| - |distinct normalized texts|) / |claims|; 0 for an empty list.
double dup_fraction(const std::vector<Claim>& claims);

// Number of lines matching at least one meta pattern. Run this on the raw
// candidate: cleaning removes those lines, so the count is taken before.
int count_meta_hits(const std::string& raw_text, const ClaimFilterConfig& config);

}  // namespace veridpo::claims
