#include "veridpo/claims.hpp"

#include <regex>
#include <unordered_set>

#include "veridpo/text.hpp"
#include "veridpo/util.hpp"

namespace veridpo::claims {

namespace {

std::vector<std::regex> compile(const std::vector<std::string>& patterns) {
    std::vector<std::regex> out;
    out.reserve(patterns.size());
    for (const auto& p : patterns) {
        out.emplace_back(p, std::regex::icase | std::regex::ECMAScript);
    }
    return out;
}

bool any_match(const std::string& s, const std::vector<std::regex>& patterns) {
    for (const auto& re : patterns) {
        if (std::regex_search(s, re)) return true;
    }
    return false;
}

// "- item", "* item", "1. item", "## header" prefixes.
std::string_view strip_markup(std::string_view line) {
    auto s = trim_view(line);
    while (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == '#')) {
        s.remove_prefix(1);
        s = trim_view(s);
    }
    std::size_t i = 0;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')') && i + 1 < s.size() &&
        s[i + 1] == ' ') {
        s.remove_prefix(i + 1);
        s = trim_view(s);
    }
    return s;
}

}  // namespace

std::string clean_candidate(const std::string& raw, const ClaimFilterConfig& config) {
    const auto meta = compile(config.meta_patterns);
    std::string out;
    for (auto line : split_lines(raw)) {
        std::string owned(line);
        if (is_blank(owned)) continue;
        if (any_match(owned, meta)) continue;
        auto stripped = strip_markup(owned);
        // Collapse intra-line whitespace but keep the original case: claims
        // normalize later, spans must still index into this text.
        std::string compact;
        bool pending = false;
        for (char c : stripped) {
            if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
                pending = !compact.empty();
                continue;
            }
            if (pending) {
                compact.push_back(' ');
                pending = false;
            }
            compact.push_back(c);
        }
        if (compact.empty()) continue;
        if (!out.empty()) out.push_back('\n');
        out += compact;
    }
    return out;
}

std::vector<Claim> segment_claims(const std::string& cleaned) {
    std::vector<Claim> out;
    for (auto [b, e] : text::sentence_spans(cleaned)) {
        Claim c;
        c.claim_id = "c" + std::to_string(out.size());
        c.text = text::normalize(std::string_view(cleaned).substr(b, e - b));
        c.source_char_span = {b, e};
        if (!c.text.empty()) out.push_back(std::move(c));
    }
    return out;
}

bool is_valid_claim(const Claim& claim, const ClaimFilterConfig& config) {
    const auto& t = claim.text;
    if (static_cast<int>(t.size()) < config.min_chars) return false;
    if (static_cast<int>(text::token_count(t)) < config.min_tokens) return false;
    std::size_t alnum = 0;
    for (unsigned char c : t) {
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) ++alnum;
    }
    const double frac = t.empty() ? 0.0 : static_cast<double>(alnum) / static_cast<double>(t.size());
    if (frac < config.min_alnum_frac) return false;
    if (any_match(t, compile(config.template_patterns))) return false;
    return true;
}

double dup_fraction(const std::vector<Claim>& claims) {
    if (claims.empty()) return 0.0;
    std::unordered_set<std::string> distinct;
    for (const auto& c : claims) distinct.insert(c.text);
    return static_cast<double>(claims.size() - distinct.size()) /
           static_cast<double>(claims.size());
}

int count_meta_hits(const std::string& raw_text, const ClaimFilterConfig& config) {
    const auto meta = compile(config.meta_patterns);
    int hits = 0;
    for (auto line : split_lines(raw_text)) {
        std::string owned(line);
        if (!owned.empty() && any_match(owned, meta)) ++hits;
    }
    return hits;
}

}  // namespace veridpo::claims
