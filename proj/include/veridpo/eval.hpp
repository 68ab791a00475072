#pragma once

// Hallucination and validity metrics, anti-degeneration gates, mining
// diagnostics (ablation + stability), and external-judge label aggregation.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "veridpo/mining.hpp"

namespace veridpo::eval {

// NS-rate = n_b / n_used; absent when n_used == 0 (excluded from means).
std::optional<double> ns_rate(const mining::SummaryStats& stats);
std::optional<double> ns_rate(long n_ns, long n_total);

struct ValidityConfig {
    int min_chars_after_clean = 200;
    int min_claims = 4;
    double dup_strict = 0.25;
    double dup_relaxed = 0.35;
    bool meta_forbidden = true;
};

struct ValidityResult {
    bool strict_valid = false;
    bool relaxed_valid = false;
    std::vector<std::string> reasons;  // every failed rule
};

// Base-invalid when too short after cleaning, too few claims, or meta text
// present (when forbidden); strict/relaxed then apply the duplication
// thresholds. strict_valid implies relaxed_valid.
ValidityResult validity_check(const mining::SummaryStats& stats, const ValidityConfig& config);

struct RunAggregates {
    int n_prompts = 0;
    double valid_frac = 0.0;  // relaxed-valid fraction
    double mean_chars = 0.0;  // over the relaxed-valid subset
    double mean_claims = 0.0;  // mean n_used over the relaxed-valid subset
    std::optional<double> ns_rate_micro;  // pooled n_b / pooled n_used
    std::optional<double> ns_rate_macro;  // mean of per-candidate rates
    double mean_n_b = 0.0;
};

// One stats record per prompt (single candidate each); aggregates computed
// on the relaxed-valid subset except valid_frac.
RunAggregates aggregate_run(std::span<const mining::SummaryStats> per_prompt,
                            const ValidityConfig& validity);

struct SelectionGate {
    double min_valid_frac = 0.80;
    double min_char_ratio = 0.95;      // vs baseline mean chars
    double max_claim_deficit = 0.5;    // vs baseline mean claims
};

struct GateResult {
    bool pass = false;
    bool valid_ok = false;
    bool chars_ok = false;
    bool claims_ok = false;
    double valid_margin = 0.0;   // valid_frac - min_valid_frac
    double char_ratio = 0.0;     // mean_chars / baseline mean_chars
    double claim_margin = 0.0;   // mean_claims - (baseline - deficit)
};

// Anti-degeneration gate; throws when the two runs cover different prompt
// sets (prompt counts must match).
GateResult degeneration_gate(const RunAggregates& run, const RunAggregates& baseline,
                             const SelectionGate& gate);

struct DiagnosticsReport {
    int n_pairs = 0;
    double mean_b_chosen = 0.0;
    double mean_b_rejected = 0.0;
    double delta_b = 0.0;       // mean_b_rejected - mean_b_chosen
    double delta_chars = 0.0;   // mean(chosen - rejected)
    double delta_n_used = 0.0;  // mean(chosen - rejected)
};

DiagnosticsReport mining_diagnostics(std::span<const mining::PreferencePair> pairs);

struct StabilityRow {
    std::string setting;  // e.g. "delta=0.6" or "bias_prec=-0.34"
    double delta = 0.0;
    double bias_prec = 0.0;
    int n_pairs = 0;
    DiagnosticsReport report;
};

// Re-decodes a fixed candidate pool under each grid point, varying only the
// swept knob, and reports per-setting diagnostics.
std::vector<StabilityRow> stability_sweep(std::span<const mining::PromptPool> pools,
                                          const mining::MiningConfig& base,
                                          std::span<const double> delta_grid,
                                          std::span<const double> bias_grid);

enum class JudgeCode { S, NS, NA };

struct JudgeLabel {
    JudgeCode label = JudgeCode::S;
    double confidence = 0.0;  // in [0,1]
    std::vector<std::string> evidence_ids;
};

struct JudgeAggregate {
    long n_s = 0;
    long n_ns = 0;
    long n_na = 0;
    long n_hcns = 0;  // NS with confidence >= hc_conf
    std::optional<double> ns_rate;  // n_ns / (n_s + n_ns + n_na)
};

JudgeAggregate judge_aggregate(std::span<const JudgeLabel> labels, double hc_conf = 0.8);

// Line-delimited {candidate_id, claim_id, label, confidence, evidence_ids}.
std::vector<JudgeLabel> load_judge_labels(const std::string& path);

// Aligned-column text table; first row is the header.
std::string format_table(const std::vector<std::vector<std::string>>& rows);

}  // namespace veridpo::eval
