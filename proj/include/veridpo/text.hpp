#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace veridpo::text {

// Light normalization applied to every evidence unit and claim before
// tokenization: lowercase ASCII, fold common typographic Unicode (NBSP,
// curly quotes, dashes, ellipsis, fullwidth ASCII, fi/fl ligatures),
// collapse whitespace runs to single spaces, strip ends. Idempotent.
// Full NFKC is out of scope; the folded subset covers what shows up in
// ASCII-dominant clinical text.
std::string normalize(std::string_view raw);

// Whitespace split of already-normalized text.
std::vector<std::string> tokenize(std::string_view normalized);

// Number of whitespace tokens without materializing them.
std::size_t token_count(std::string_view s);

// First `max_words` whitespace tokens, single-space joined.
std::string truncate_words(std::string_view s, std::size_t max_words);

// Sentence-like spans (begin, end) over `s`, trimmed, empty spans dropped.
// Boundaries: newline always ends a span; '.', '!', '?' end a span when
// followed by whitespace or end of text (trailing run of terminators stays
// with the span). No abbreviation handling: "Dr. Smith saw pt." yields two
// spans.
std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(std::string_view s);

}  // namespace veridpo::text
