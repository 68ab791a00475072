#include "veridpo/eval.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

#include "veridpo/jsonl.hpp"

namespace veridpo::eval {

using json = nlohmann::json;

std::optional<double> ns_rate(const mining::SummaryStats& stats) {
    if (stats.n_used == 0) return std::nullopt;
    return static_cast<double>(stats.n_b) / static_cast<double>(stats.n_used);
}

std::optional<double> ns_rate(long n_ns, long n_total) {
    if (n_total == 0) return std::nullopt;
    return static_cast<double>(n_ns) / static_cast<double>(n_total);
}

ValidityResult validity_check(const mining::SummaryStats& stats, const ValidityConfig& config) {
    ValidityResult r;
    bool base_valid = true;
    if (stats.chars < config.min_chars_after_clean) {
        base_valid = false;
        r.reasons.push_back("too short after cleaning");
    }
    if (stats.n_claims_valid < config.min_claims) {
        base_valid = false;
        r.reasons.push_back("too few claims");
    }
    if (config.meta_forbidden && stats.meta_hits > 0) {
        base_valid = false;
        r.reasons.push_back("contains meta text");
    }
    const bool dup_strict_ok = stats.dup_frac <= config.dup_strict;
    const bool dup_relaxed_ok = stats.dup_frac <= config.dup_relaxed;
    if (!dup_strict_ok) r.reasons.push_back("duplicate fraction above strict threshold");
    if (!dup_relaxed_ok) r.reasons.push_back("duplicate fraction above relaxed threshold");
    r.strict_valid = base_valid && dup_strict_ok;
    r.relaxed_valid = base_valid && dup_relaxed_ok;
    return r;
}

RunAggregates aggregate_run(std::span<const mining::SummaryStats> per_prompt,
                            const ValidityConfig& validity) {
    RunAggregates agg;
    agg.n_prompts = static_cast<int>(per_prompt.size());
    if (per_prompt.empty()) return agg;

    long n_valid = 0;
    double sum_chars = 0.0, sum_claims = 0.0, sum_nb = 0.0;
    long pooled_b = 0, pooled_used = 0;
    double macro_sum = 0.0;
    long macro_n = 0;
    for (const auto& s : per_prompt) {
        const auto v = validity_check(s, validity);
        if (!v.relaxed_valid) continue;
        ++n_valid;
        sum_chars += s.chars;
        sum_claims += s.n_used;
        sum_nb += s.n_b;
        pooled_b += s.n_b;
        pooled_used += s.n_used;
        if (auto r = ns_rate(s)) {
            macro_sum += *r;
            ++macro_n;
        }
    }
    agg.valid_frac = static_cast<double>(n_valid) / static_cast<double>(per_prompt.size());
    if (n_valid > 0) {
        agg.mean_chars = sum_chars / static_cast<double>(n_valid);
        agg.mean_claims = sum_claims / static_cast<double>(n_valid);
        agg.mean_n_b = sum_nb / static_cast<double>(n_valid);
    }
    agg.ns_rate_micro = ns_rate(pooled_b, pooled_used);
    if (macro_n > 0) agg.ns_rate_macro = macro_sum / static_cast<double>(macro_n);
    return agg;
}

GateResult degeneration_gate(const RunAggregates& run, const RunAggregates& baseline,
                             const SelectionGate& gate) {
    if (run.n_prompts != baseline.n_prompts) {
        throw std::invalid_argument("degeneration_gate: prompt sets differ");
    }
    GateResult r;
    r.valid_ok = run.valid_frac >= gate.min_valid_frac;
    r.valid_margin = run.valid_frac - gate.min_valid_frac;
    r.char_ratio = baseline.mean_chars > 0.0 ? run.mean_chars / baseline.mean_chars : 1.0;
    r.chars_ok = run.mean_chars >= gate.min_char_ratio * baseline.mean_chars;
    r.claim_margin = run.mean_claims - (baseline.mean_claims - gate.max_claim_deficit);
    r.claims_ok = run.mean_claims >= baseline.mean_claims - gate.max_claim_deficit;
    r.pass = r.valid_ok && r.chars_ok && r.claims_ok;
    return r;
}

DiagnosticsReport mining_diagnostics(std::span<const mining::PreferencePair> pairs) {
    if (pairs.empty()) throw std::invalid_argument("mining_diagnostics: no pairs");
    DiagnosticsReport r;
    r.n_pairs = static_cast<int>(pairs.size());
    double sum_bc = 0.0, sum_br = 0.0, sum_dchars = 0.0, sum_dn = 0.0;
    for (const auto& p : pairs) {
        sum_bc += p.chosen.stats.n_b;
        sum_br += p.rejected.stats.n_b;
        sum_dchars += p.chosen.stats.chars - p.rejected.stats.chars;
        sum_dn += p.chosen.stats.n_used - p.rejected.stats.n_used;
    }
    const double n = static_cast<double>(pairs.size());
    r.mean_b_chosen = sum_bc / n;
    r.mean_b_rejected = sum_br / n;
    r.delta_b = r.mean_b_rejected - r.mean_b_chosen;
    r.delta_chars = sum_dchars / n;
    r.delta_n_used = sum_dn / n;
    return r;
}

std::vector<StabilityRow> stability_sweep(std::span<const mining::PromptPool> pools,
                                          const mining::MiningConfig& base,
                                          std::span<const double> delta_grid,
                                          std::span<const double> bias_grid) {
    std::vector<StabilityRow> rows;
    auto run_setting = [&](double delta, double bias, const std::string& label) {
        mining::MiningConfig cfg = base;
        cfg.scoring.delta = delta;
        cfg.scoring.bias_prec = bias;
        auto pairs = mining::select_pairs_from_pool(pools, cfg);
        StabilityRow row;
        row.setting = label;
        row.delta = delta;
        row.bias_prec = bias;
        row.n_pairs = static_cast<int>(pairs.size());
        if (!pairs.empty()) row.report = mining_diagnostics(pairs);
        rows.push_back(std::move(row));
    };
    for (double d : delta_grid) {
        run_setting(d, base.scoring.bias_prec, "delta=" + std::to_string(d));
    }
    for (double b : bias_grid) {
        run_setting(base.scoring.delta, b, "bias_prec=" + std::to_string(b));
    }
    return rows;
}

JudgeAggregate judge_aggregate(std::span<const JudgeLabel> labels, double hc_conf) {
    JudgeAggregate agg;
    for (const auto& l : labels) {
        switch (l.label) {
            case JudgeCode::S: ++agg.n_s; break;
            case JudgeCode::NS:
                ++agg.n_ns;
                if (l.confidence >= hc_conf) ++agg.n_hcns;
                break;
            case JudgeCode::NA: ++agg.n_na; break;
        }
    }
    agg.ns_rate = ns_rate(agg.n_ns, agg.n_s + agg.n_ns + agg.n_na);
    return agg;
}

std::vector<JudgeLabel> load_judge_labels(const std::string& path) {
    std::vector<JudgeLabel> out;
    jsonl::for_each_strict(path, [&](std::size_t lineno, const json& rec) {
        JudgeLabel l;
        const std::string code = rec.at("label").get<std::string>();
        if (code == "S") {
            l.label = JudgeCode::S;
        } else if (code == "NS") {
            l.label = JudgeCode::NS;
        } else if (code == "NA") {
            l.label = JudgeCode::NA;
        } else {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": unknown judge label '" + code + "'");
        }
        l.confidence = rec.value("confidence", 0.0);
        if (l.confidence < 0.0 || l.confidence > 1.0) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": confidence out of [0,1]");
        }
        if (rec.contains("evidence_ids")) {
            for (const auto& id : rec["evidence_ids"]) {
                l.evidence_ids.push_back(id.get<std::string>());
            }
        }
        out.push_back(std::move(l));
    });
    return out;
}

std::string format_table(const std::vector<std::vector<std::string>>& rows) {
    if (rows.empty()) return "";
    std::vector<std::size_t> widths;
    for (const auto& row : rows) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (std::size_t c = 0; c < row.size(); ++c) {
            widths[c] = std::max(widths[c], row[c].size());
        }
    }
    std::string out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            out += rows[r][c];
            if (c + 1 < rows[r].size()) {
                out.append(widths[c] - rows[r][c].size() + 2, ' ');
            }
        }
        out.push_back('\n');
        if (r == 0) {
            for (std::size_t c = 0; c < widths.size(); ++c) {
                out.append(widths[c], '-');
                if (c + 1 < widths.size()) out.append(2, ' ');
            }
            out.push_back('\n');
        }
    }
    return out;
}

}  // namespace veridpo::eval
