#pragma once

// Deterministic synthetic world: templated clinical-style facts rendered
// into time-stamped notes, candidate summaries with planted Supported /
// Not Supported / Not Addressed claims, and a ground-truth-backed oracle
// verifier. Everything is a pure function of the seeds, which is what makes
// exact-count and byte-identity checks possible.

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "veridpo/corpus.hpp"
#include "veridpo/mining.hpp"
#include "veridpo/verifier.hpp"

namespace veridpo::synth {

struct Fact {
    std::string note_line;    // rendered into exactly one note
    std::string claim_true;   // paraphrase-by-template -> Supported
    std::string claim_false;  // antonym/negation substitution -> Not Supported
};

struct SyntheticSubject {
    std::string subject_id;
    std::vector<Fact> facts;        // rendered in this subject's notes
    std::vector<Fact> distractors;  // rendered in no note -> Not Addressed
    std::vector<corpus::Note> notes;
};

struct SyntheticWorld {
    std::vector<SyntheticSubject> subjects;
    std::uint64_t seed = 0;

    // normalized claim key -> planted label; global across subjects
    // (fact rendering guarantees key uniqueness world-wide).
    std::unordered_map<std::string, verifier::Verdict> truth;

    const SyntheticSubject* find_subject(const std::string& subject_id) const;
};

struct WorldConfig {
    int n_subjects = 5;
    int notes_per_subject = 10;
    int facts_per_note = 5;
    int distractors_per_subject = 10;
    std::uint64_t seed = 7;
};

// Normalized lookup key for a claim: normalize + strip trailing terminators.
std::string truth_key(const std::string& claim_text);

SyntheticWorld gen_world(const WorldConfig& config);
SyntheticWorld gen_world(int n_subjects, int notes_per_subject, std::uint64_t seed);

struct CorruptionSpec {
    double p_contradict = 0.25;
    double p_unaddressed = 0.10;
    int claims_per_candidate = 14;      // upper bound on claims per candidate
    int claims_min_per_candidate = 8;   // candidates vary in length within [min, max]
    int candidates_per_prompt = 8;

    void validate() const;
};

struct SynthCandidate {
    std::string text;
    std::vector<verifier::Verdict> claim_labels;  // aligned with claim order
    int n_planted_b = 0;
    int n_planted_c = 0;
};

// Candidates for one prompt; claims sampled from the subject's facts without
// replacement within a candidate, corrupted per spec, ground truth recorded.
std::vector<SynthCandidate> gen_candidates(const SyntheticWorld& world,
                                           const std::string& subject_id,
                                           const CorruptionSpec& spec, std::uint64_t seed);

// Ground-truth-backed verifier: logits with margin in [margin_lo, margin_hi]
// toward the true label; with probability noise_rate the target flips to a
// wrong label. Pure function of (claim, seed): noise and margin come from a
// hash of the claim text, so repeated scoring is consistent.
class OracleVerifier final : public veridpo::verifier::VerifierClient {
public:
    OracleVerifier(std::shared_ptr<const SyntheticWorld> world, double noise_rate,
                   std::uint64_t seed, double margin_lo = 1.2, double margin_hi = 2.5);

    veridpo::verifier::VerifierLogits score(
        const std::string& claim, std::span<const std::string> evidence) const override;

private:
    std::shared_ptr<const SyntheticWorld> world_;
    double noise_rate_;
    std::uint64_t seed_;
    double margin_lo_;
    double margin_hi_;
};

// Candidate generator backed by the world; temperature and top_p are
// accepted for interface parity with a sampling LLM client and ignored.
class SynthGenerator final : public mining::GeneratorClient {
public:
    SynthGenerator(std::shared_ptr<const SyntheticWorld> world, CorruptionSpec spec);

    std::vector<std::string> generate(const mining::PromptWindow& window, int k,
                                      double temperature, double top_p,
                                      std::uint64_t seed) const override;

private:
    std::shared_ptr<const SyntheticWorld> world_;
    CorruptionSpec spec_;
};

// World serialization; the truth map is rebuilt from the facts on load.
void save_world(const SyntheticWorld& world, const std::string& path);
SyntheticWorld load_world(const std::string& path);

// Notes in the corpus ingestion format, so the CLI pipeline runs unchanged.
void export_notes_jsonl(const SyntheticWorld& world, const std::string& path,
                        const std::string& config_hash);

}  // namespace veridpo::synth
