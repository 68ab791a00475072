#pragma once

// DPO preference score and logistic loss, analytic gradients for the toy
// policy, toy-policy optimization against a frozen reference, and the
// verifier-guided best-of-K reranking baseline.

#include <cstdint>
#include <span>
#include <vector>

#include "veridpo/mining.hpp"

namespace veridpo::dpo {

struct PairLogProbs {
    double lp_pol_pos = 0.0;
    double lp_pol_neg = 0.0;
    double lp_ref_pos = 0.0;
    double lp_ref_neg = 0.0;
};

struct DpoConfig {
    double beta = 0.1;
    void validate() const;  // beta > 0
};

// s = beta * [(lp_pol_pos - lp_pol_neg) - (lp_ref_pos - lp_ref_neg)]
double dpo_score(const PairLogProbs& lp, double beta);

// Numerically stable -ln(sigmoid(x)); exact ln 2 at 0, ~|x| for large -x.
double neg_log_sigmoid(double x);

// Mean over pairs of -ln(sigmoid(s)); throws on an empty batch. Per-pair
// terms may be computed in parallel; the reduction is ordered, so the result
// is identical across execution modes.
double dpo_loss(std::span<const PairLogProbs> batch, double beta,
                ExecMode mode = ExecMode::Serial);

// Finite response vocabulary per prompt; log-prob of a response is the
// log-softmax of its parameter within the prompt row.
struct ToyPolicy {
    std::vector<std::vector<double>> params;  // [prompt][response]

    double log_prob(std::size_t prompt, std::size_t response) const;
};

struct ToyPair {
    std::size_t prompt = 0;
    std::size_t pos = 0;
    std::size_t neg = 0;
};

PairLogProbs pair_log_probs(const ToyPolicy& policy, const ToyPolicy& reference,
                            const ToyPair& pair, double /*beta-independent*/ = 0.0);

// Gradient of the mean DPO loss w.r.t. the toy-policy parameters; same shape
// as policy.params. dL/ds = -sigmoid(-s)/N, chained through beta and the
// log-softmax.
std::vector<std::vector<double>> dpo_grad(std::span<const ToyPair> pairs, double beta,
                                          const ToyPolicy& policy, const ToyPolicy& reference,
                                          ExecMode mode = ExecMode::Serial);

struct DpoTrainConfig {
    double beta = 0.1;
    int steps = 500;
    double learning_rate = 0.5;
    std::uint64_t seed = 0;  // reserved; zero init + full batch is deterministic
};

struct TraceRow {
    int step = 0;
    double loss = 0.0;
    double mean_margin = 0.0;  // mean s over the training pairs
};

struct DpoTrainResult {
    ToyPolicy policy;
    ToyPolicy reference;  // frozen copy of the initial policy
    std::vector<TraceRow> trace;
    double final_loss = 0.0;
    double final_mean_margin = 0.0;
    double frac_positive_margin = 0.0;
};

// Gradient descent on dpo_loss with the reference frozen at the initial
// policy. vocab_sizes[p] is the response count of prompt p. Throws on
// divergence or out-of-range pair indices.
DpoTrainResult train_toy_dpo(std::span<const ToyPair> pairs,
                             std::span<const std::size_t> vocab_sizes,
                             const DpoTrainConfig& config);

// argmax summary utility; ties by (fewer n_b, more chars, lower index).
// Throws on empty input.
std::size_t best_of_k(std::span<const mining::SummaryStats> candidates,
                      const mining::UtilityWeights& weights);

}  // namespace veridpo::dpo
