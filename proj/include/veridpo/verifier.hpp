#pragma once

// Three-class claim verification: biased decoding, HCNS detection, metrics,
// bias-sweep calibration, the class-weighted/smoothed/focal classification
// loss, and a desk-scale trainable linear verifier behind the pluggable
// scorer interface.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace veridpo::verifier {

enum class Verdict : int { Supported = 0, NotSupported = 1, NotAddressed = 2 };

inline char verdict_code(Verdict v) { return "ABC"[static_cast<int>(v)]; }
Verdict verdict_from_code(char c);  // 'A'/'B'/'C', throws otherwise

struct VerifierLogits {
    double l_a = 0.0;
    double l_b = 0.0;
    double l_c = 0.0;
};

// Whether the HCNS margin uses the bias-adjusted or the raw Not Supported
// logit. The definition is ambiguous between the two; this artifact defaults
// to bias-adjusted and keeps the switch.
enum class DeltaConvention { BiasAdjusted, RawLogit };

struct BiasedDecision {
    Verdict verdict = Verdict::Supported;
    double margin = 0.0;  // per DeltaConvention
    double bias_applied = 0.0;
};

// argmax over (l_a, l_b + bias_b, l_c); ties resolve in label order A < B < C.
// Throws std::invalid_argument on non-finite logits.
BiasedDecision decode(const VerifierLogits& logits, double bias_b,
                      DeltaConvention convention = DeltaConvention::BiasAdjusted);

// decode(logits, bias_prec) == B and margin strictly above delta.
bool is_hcns(const VerifierLogits& logits, double bias_prec, double delta,
             DeltaConvention convention = DeltaConvention::BiasAdjusted);

struct ClassMetrics {
    std::array<double, 3> precision{};
    std::array<double, 3> recall{};
    std::array<double, 3> f1{};
    double macro_f1 = 0.0;
    double accuracy = 0.0;

    double recall_ns() const { return recall[static_cast<int>(Verdict::NotSupported)]; }
};

// Standard per-class P/R/F1 with the 0-convention for empty denominators.
// Throws on an empty list.
ClassMetrics compute_metrics(std::span<const std::pair<Verdict, Verdict>> truth_pred);

struct LabeledLogits {
    VerifierLogits logits;
    Verdict truth = Verdict::Supported;
};

struct BiasSweepPoint {
    double bias = 0.0;
    double j = 0.0;  // macro_f1 + lambda * recall_ns
    double macro_f1 = 0.0;
    double recall_ns = 0.0;
};

struct BiasSweepResult {
    double best_bias = 0.0;  // argmax J; ties resolve to the smallest bias
    std::vector<BiasSweepPoint> curve;  // ascending bias order
};

BiasSweepResult sweep_bias(std::span<const LabeledLogits> dev_set,
                           std::span<const double> grid, double lambda = 0.10);

// Inclusive grid lo..hi in fixed steps (lo + i*step, while <= hi + step/2).
std::vector<double> make_grid(double lo, double hi, double step);

struct VerifierLossConfig {
    std::array<double, 3> class_weights{1.0, 1.0, 1.0};
    double temper_exponent = 1.0;   // tau, used by class_weights_from_counts
    double label_smoothing = 0.0;   // epsilon in [0,1)
    double focal_gamma = 0.0;       // gamma >= 0

    void validate() const;
};

// p = softmax(logits); q = (1-eps)*onehot + eps/3;
// loss = w_y * (1 - p_y)^gamma * sum_c -q_c ln p_c.
// Plain cross-entropy at (eps=0, gamma=0, w=1). Throws on non-finite result.
double classification_loss(const VerifierLogits& logits, Verdict truth,
                           const VerifierLossConfig& config);

// w_c proportional to (total/count_c)^tau, normalized to mean 1.
// Zero counts throw; smooth upstream.
std::array<double, 3> class_weights_from_counts(const std::array<long, 3>& counts, double tau);

// Pluggable scorer. Implementations must be pure given inputs (the remote
// scorer is idempotent per request id instead).
class VerifierClient {
public:
    virtual ~VerifierClient() = default;
    virtual VerifierLogits score(const std::string& claim,
                                 std::span<const std::string> evidence) const = 0;
};

// Heuristic scorer from token overlap and negation markers; makes the
// pipeline runnable without any model.
class LexicalOracle final : public VerifierClient {
public:
    VerifierLogits score(const std::string& claim,
                         std::span<const std::string> evidence) const override;
};

struct VerifierInstance {
    std::string claim;
    std::vector<std::string> evidence;
    Verdict truth = Verdict::Supported;
};

// Linear model over hashed bag-of-words features of the claim plus
// claim-evidence overlap indicators.
class ToyLinearVerifier final : public VerifierClient {
public:
    ToyLinearVerifier() = default;
    ToyLinearVerifier(int feature_dim, std::vector<double> weights);

    VerifierLogits score(const std::string& claim,
                         std::span<const std::string> evidence) const override;

    std::vector<double> featurize(const std::string& claim,
                                  std::span<const std::string> evidence) const;

    int feature_dim() const { return feature_dim_; }
    const std::vector<double>& weights() const { return weights_; }
    std::vector<double>& mutable_weights() { return weights_; }

private:
    int feature_dim_ = 0;
    std::vector<double> weights_;  // 3 * feature_dim, row-major by class
};

// Loss and analytic gradient for one instance of the linear verifier;
// gradient layout matches the weight vector. Exposed for the
// finite-difference oracle tests.
double loss_and_grad(std::span<const double> weights, int feature_dim,
                     std::span<const double> features, Verdict truth,
                     const VerifierLossConfig& config, std::span<double> grad_out);

struct ToyTrainConfig {
    int feature_dim = 256;
    double learning_rate = 0.5;
    int steps = 300;
    std::uint64_t seed = 0;  // reserved; training is full-batch deterministic
};

// Full-batch gradient descent on the mean classification loss. Requires at
// least two classes in `instances`; throws on divergence (non-finite loss).
ToyLinearVerifier train_toy_verifier(std::span<const VerifierInstance> instances,
                                     const VerifierLossConfig& loss_config,
                                     const ToyTrainConfig& train_config);

}  // namespace veridpo::verifier
