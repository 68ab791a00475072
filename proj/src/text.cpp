#include "veridpo/text.hpp"

#include <cctype>

namespace veridpo::text {

namespace {

inline bool is_ws(char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}

// Folds a small table of common typographic code points to ASCII.
// Returns bytes consumed from `in` at `i` and appends the replacement to `out`;
// returns 0 if no fold applies.
std::size_t fold_unicode(std::string_view in, std::size_t i, std::string& out) {
    auto b = [&](std::size_t k) { return static_cast<unsigned char>(in[i + k]); };
    std::size_t left = in.size() - i;

    if (left >= 2 && b(0) == 0xC2 && b(1) == 0xA0) {  // NBSP
        out.push_back(' ');
        return 2;
    }
    if (left >= 3 && b(0) == 0xE2 && b(1) == 0x80) {
        switch (b(2)) {
            case 0x98: case 0x99: out.push_back('\''); return 3;  // curly single quotes
            case 0x9C: case 0x9D: out.push_back('"'); return 3;   // curly double quotes
            case 0x93: case 0x94: out.push_back('-'); return 3;   // en/em dash
            case 0xA6: out += "..."; return 3;                    // ellipsis
            default: break;
        }
    }
    if (left >= 3 && b(0) == 0xEF && b(1) == 0xAC) {  // fi / fl ligatures
        if (b(2) == 0x81) { out += "fi"; return 3; }
        if (b(2) == 0x82) { out += "fl"; return 3; }
    }
    // Fullwidth ASCII block U+FF01..U+FF5E -> 0x21..0x7E
    if (left >= 3 && b(0) == 0xEF && (b(1) == 0xBC || b(1) == 0xBD)) {
        unsigned cp = 0xFF00u + ((b(1) == 0xBC) ? (b(2) - 0x80u) : (b(2) - 0x80u + 0x40u));
        if (cp >= 0xFF01 && cp <= 0xFF5E) {
            out.push_back(static_cast<char>(cp - 0xFF00 + 0x20));
            return 3;
        }
    }
    return 0;
}

}  // namespace

std::string normalize(std::string_view raw) {
    std::string folded;
    folded.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size();) {
        if (auto n = fold_unicode(raw, i, folded); n > 0) {
            i += n;
            continue;
        }
        folded.push_back(raw[i++]);
    }

    std::string out;
    out.reserve(folded.size());
    bool pending_space = false;
    for (char c : folded) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (is_ws(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view normalized) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < normalized.size()) {
        while (i < normalized.size() && is_ws(normalized[i])) ++i;
        std::size_t start = i;
        while (i < normalized.size() && !is_ws(normalized[i])) ++i;
        if (i > start) out.emplace_back(normalized.substr(start, i - start));
    }
    return out;
}

std::size_t token_count(std::string_view s) {
    std::size_t n = 0, i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_ws(s[i])) ++i;
        if (i < s.size()) ++n;
        while (i < s.size() && !is_ws(s[i])) ++i;
    }
    return n;
}

std::string truncate_words(std::string_view s, std::size_t max_words) {
    std::string out;
    std::size_t n = 0, i = 0;
    while (i < s.size() && n < max_words) {
        while (i < s.size() && is_ws(s[i])) ++i;
        std::size_t start = i;
        while (i < s.size() && !is_ws(s[i])) ++i;
        if (i > start) {
            if (n > 0) out.push_back(' ');
            out.append(s.substr(start, i - start));
            ++n;
        }
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(std::string_view s) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    auto push = [&](std::size_t b, std::size_t e) {
        while (b < e && is_ws(s[b])) ++b;
        while (e > b && is_ws(s[e - 1])) --e;
        if (e > b) out.emplace_back(b, e);
    };
    std::size_t begin = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '\n') {
            push(begin, i);
            begin = i + 1;
            continue;
        }
        if (c == '.' || c == '!' || c == '?') {
            // Swallow a run of terminators, then break if at whitespace/EOL.
            std::size_t j = i;
            while (j + 1 < s.size() && (s[j + 1] == '.' || s[j + 1] == '!' || s[j + 1] == '?')) ++j;
            if (j + 1 >= s.size() || is_ws(s[j + 1])) {
                push(begin, j + 1);
                begin = j + 1;
            }
            i = j;
        }
    }
    push(begin, s.size());
    return out;
}

}  // namespace veridpo::text
