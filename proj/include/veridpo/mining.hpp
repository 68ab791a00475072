#pragma once

// Evidence-window prompts, claim-by-claim candidate scoring, the
// summary-level utility, and constrained (chosen, rejected) preference-pair
// selection with the ablation strategies.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "veridpo/claims.hpp"
#include "veridpo/corpus.hpp"
#include "veridpo/parallel.hpp"
#include "veridpo/retrieval.hpp"
#include "veridpo/verifier.hpp"

namespace veridpo::mining {

struct PromptWindow {
    std::string subject_id;
    int window_index = 0;
    std::vector<std::string> unit_ids;  // time-ordered
    std::string prompt_text;

    std::string prompt_id() const {
        return subject_id + "/w" + std::to_string(window_index);
    }
};

struct SummaryStats {
    int n_a = 0;
    int n_b = 0;
    int n_c = 0;
    int n_used = 0;  // == n_a + n_b + n_c
    int n_hcns = 0;
    double dup_frac = 0.0;
    int meta_hits = 0;
    int chars = 0;  // cleaned candidate length
    int n_claims_segmented = 0;
    int n_claims_valid = 0;  // after validity filter + dedup, before the cap
    int n_skipped = 0;       // verifier failures, excluded from n_used
};

// Default weights for the summary-level utility
// U = la*n_a - lb*n_b - lc*n_c + lcov*min(n, n0) - ldup*(dup_frac*n) - lmeta*meta_hits.
struct UtilityWeights {
    double lambda_a = 1.0;
    double lambda_b = 3.0;
    double lambda_c = 0.5;
    double lambda_cov = 0.25;
    int n0 = 12;
    double lambda_dup = 2.0;
    double lambda_meta = 2.0;
};

double utility(const SummaryStats& stats, const UtilityWeights& w);

// Default thresholds for the pair constraints:
// (i)   U_chosen - U_rejected >= tau_u   (strict_gap switches to >)
// (ii)  |n_used,chosen - n_used,rejected| <= tau_n
// (iii) chosen has n_hcns <= tau_hcns and n_b <= tau_b
// (iv)  rejected has n_hcns >= 1
struct PairConstraints {
    double tau_u = 2.0;
    int tau_n = 6;
    int tau_hcns = 1;
    int tau_b = 2;
    bool strict_gap = false;
};

enum class Strategy { Full, Random, NoHCNS, NoLengthCoverage };

Strategy strategy_from_name(const std::string& name);
std::string strategy_name(Strategy s);

struct ScoredText {
    std::string text;
    SummaryStats stats;
    double utility_value = 0.0;
};

struct PreferencePair {
    std::string prompt_id;
    std::string prompt_text;
    ScoredText chosen;
    ScoredText rejected;
    double utility_gap = 0.0;
    Strategy strategy = Strategy::Full;
    std::string config_hash;
};

struct WindowConfig {
    int prompts_per_subject = 30;
    int window_size = 18;
    int stride = 8;
    int jitter_range = 2;  // positions
    int unit_word_cap = 220;
};

// Window starts at i*stride + jitter_i (clamped); short tails of at least
// window_size/2 units are kept, shorter ones skipped. Deterministic given
// seed. A corpus shorter than window_size/2 yields zero windows.
std::vector<PromptWindow> build_windows(std::span<const corpus::EvidenceUnit> units,
                                        const WindowConfig& config, std::uint64_t seed);

// One subject's retrieval state.
struct SubjectCorpus {
    std::string subject_id;
    std::vector<corpus::Note> notes;
    std::vector<corpus::EvidenceUnit> units;  // (time, note, span) ordered
    retrieval::InvertedIndex note_index;
    retrieval::InvertedIndex unit_index;
};

SubjectCorpus build_subject_corpus(std::vector<corpus::Note> notes,
                                   const corpus::SegmentationConfig& seg);

// Groups excluded-filtered notes by subject (sorted by subject id).
std::vector<SubjectCorpus> build_subject_corpora(const std::vector<corpus::Note>& notes,
                                                 const corpus::SegmentationConfig& seg,
                                                 ExecMode mode = ExecMode::Parallel);

struct ScoringConfig {
    double bias_prec = -0.34;
    double bias_recall = 1.10;
    double delta = 0.8;
    int scoring_cap = 24;
    int top_k_evidence = 50;
    verifier::DeltaConvention delta_convention = verifier::DeltaConvention::BiasAdjusted;
    claims::ClaimFilterConfig filter;
    retrieval::RetrievalParams retrieval;
};

// Bias-independent scoring record: one verifier call per surviving claim,
// logits cached so stats can be re-derived under any (bias, delta).
struct ScoredCandidate {
    std::string text;
    int chars = 0;
    double dup_frac = 0.0;
    int meta_hits = 0;
    int n_claims_segmented = 0;
    int n_claims_valid = 0;
    int n_skipped = 0;
    std::vector<verifier::VerifierLogits> claim_logits;
    std::vector<std::string> claim_texts;  // aligned with claim_logits
};

ScoredCandidate score_candidate_cached(const std::string& candidate_text,
                                       const SubjectCorpus& subject,
                                       const verifier::VerifierClient& client,
                                       const ScoringConfig& config);

SummaryStats summarize(const ScoredCandidate& scored, double bias_prec, double delta,
                       verifier::DeltaConvention convention =
                           verifier::DeltaConvention::BiasAdjusted);

// Convenience wrapper: score then decode under (bias_prec, delta).
SummaryStats score_candidate(const std::string& candidate_text, const SubjectCorpus& subject,
                             const verifier::VerifierClient& client,
                             const ScoringConfig& config);

struct CandidateView {
    const std::string* text = nullptr;
    SummaryStats stats;
    double utility_value = 0.0;
};

// Pair selection over one prompt's candidates. Strategies:
//   Full             extremal-utility selection under constraints i-iv
//   Random           uniform ordered pair, no constraints (rng required)
//   NoHCNS           drops the HCNS side of iii and all of iv
//   NoLengthCoverage utility with lambda_cov=lambda_dup=lambda_meta=0, ii dropped
// Returns empty when no pair qualifies; never pairs a candidate with itself.
std::optional<PreferencePair> select_pair(std::span<const CandidateView> candidates,
                                          const PairConstraints& constraints,
                                          Strategy strategy, const UtilityWeights& weights,
                                          std::uint64_t rng_seed = 0);

class GeneratorClient {
public:
    virtual ~GeneratorClient() = default;
    // k sampled candidate texts for one prompt; decoding knobs passed through.
    virtual std::vector<std::string> generate(const PromptWindow& window, int k,
                                              double temperature, double top_p,
                                              std::uint64_t seed) const = 0;
};

struct MiningConfig {
    WindowConfig window;
    ScoringConfig scoring;
    UtilityWeights weights;
    PairConstraints constraints;
    Strategy strategy = Strategy::Full;
    int candidates_per_prompt = 8;
    double temperature = 0.8;
    double top_p = 0.95;
    bool recall_prefilter = true;  // skip prompts with zero B decodes under bias_recall
    std::uint64_t seed = 0;
    std::string config_hash;
    corpus::SegmentationConfig segmentation;
};

struct PromptPool {
    PromptWindow window;
    std::vector<ScoredCandidate> candidates;
    bool skipped_by_prefilter = false;
    bool failed = false;  // generator/verifier outage; prompt skipped, run continues
    std::string failure;
};

// Mirrors the mining summary table: pair count, contradiction separation,
// and the mean utility gap, recomputed on this run's data.
struct MiningSummary {
    int n_subjects = 0;
    int n_prompts = 0;
    int n_prompts_skipped = 0;
    int candidates_per_prompt = 0;
    int n_pairs = 0;
    double frac_chosen_fewer_b = 0.0;
    double mean_b_chosen = 0.0;
    double mean_b_rejected = 0.0;
    double mean_utility_gap = 0.0;
    double bias_prec = 0.0;
    double bias_recall = 0.0;
    double delta = 0.0;
};

struct MiningResult {
    std::vector<PreferencePair> pairs;  // sorted by (subject, window)
    MiningSummary summary;
    std::vector<PromptPool> pools;  // kept for diagnostics / stability sweeps
};

// Scores every (prompt, candidate) once; prompts are independent work items,
// output is identical across execution modes.
std::vector<PromptPool> build_pool(std::span<const SubjectCorpus> subjects,
                                   const GeneratorClient& generator,
                                   const verifier::VerifierClient& verifier_client,
                                   const MiningConfig& config,
                                   ExecMode mode = ExecMode::Parallel);

std::vector<PreferencePair> select_pairs_from_pool(std::span<const PromptPool> pools,
                                                   const MiningConfig& config);

MiningSummary summarize_mining(std::span<const PreferencePair> pairs,
                               std::span<const PromptPool> pools,
                               const MiningConfig& config, int n_subjects);

MiningResult mine_split(std::span<const SubjectCorpus> subjects,
                        const GeneratorClient& generator,
                        const verifier::VerifierClient& verifier_client,
                        const MiningConfig& config, ExecMode mode = ExecMode::Parallel);

// Dev-split selection of bias_prec: coarse-to-fine sweep maximizing HCNS
// precision against true labels subject to a minimum HCNS yield.
struct BiasPrecSelection {
    double bias_prec = 0.0;
    double hcns_precision = 0.0;
    int hcns_yield = 0;
    bool yield_met = false;
};

BiasPrecSelection select_bias_prec(std::span<const verifier::LabeledLogits> dev,
                                   double lo, double hi, double delta, int min_yield,
                                   verifier::DeltaConvention convention =
                                       verifier::DeltaConvention::BiasAdjusted);

void save_pairs(std::span<const PreferencePair> pairs, const std::string& path,
                const std::string& config_hash);
std::vector<PreferencePair> load_pairs(const std::string& path);

// Scored claims as line records {candidate_id, claim_id, text}.
void export_claims(std::span<const PromptPool> pools, const std::string& path,
                   const std::string& config_hash);

void save_mining_summary(const MiningSummary& summary, const std::string& path,
                         const std::string& config_hash);

}  // namespace veridpo::mining
