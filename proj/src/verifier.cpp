#include "veridpo/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "veridpo/text.hpp"
#include "veridpo/util.hpp"

namespace veridpo::verifier {

Verdict verdict_from_code(char c) {
    switch (c) {
        case 'A': return Verdict::Supported;
        case 'B': return Verdict::NotSupported;
        case 'C': return Verdict::NotAddressed;
        default: throw std::invalid_argument(std::string("unknown verdict code '") + c + "'");
    }
}

BiasedDecision decode(const VerifierLogits& logits, double bias_b, DeltaConvention convention) {
    if (!std::isfinite(logits.l_a) || !std::isfinite(logits.l_b) || !std::isfinite(logits.l_c) ||
        !std::isfinite(bias_b)) {
        throw std::invalid_argument("non-finite logit");
    }
    const double adj_b = logits.l_b + bias_b;
    const double v[3] = {logits.l_a, adj_b, logits.l_c};
    int best = 0;
    for (int i = 1; i < 3; ++i) {
        if (v[i] > v[best]) best = i;  // strict: ties keep the earlier label
    }
    BiasedDecision d;
    d.verdict = static_cast<Verdict>(best);
    d.bias_applied = bias_b;
    const double b_for_margin = convention == DeltaConvention::BiasAdjusted ? adj_b : logits.l_b;
    d.margin = b_for_margin - std::max(logits.l_a, logits.l_c);
    return d;
}

bool is_hcns(const VerifierLogits& logits, double bias_prec, double delta,
             DeltaConvention convention) {
    if (delta < 0.0) throw std::invalid_argument("delta must be >= 0");
    const auto d = decode(logits, bias_prec, convention);
    return d.verdict == Verdict::NotSupported && d.margin > delta;
}

ClassMetrics compute_metrics(std::span<const std::pair<Verdict, Verdict>> truth_pred) {
    if (truth_pred.empty()) throw std::invalid_argument("compute_metrics: empty input");
    long confusion[3][3] = {};
    long correct = 0;
    for (const auto& [truth, pred] : truth_pred) {
        ++confusion[static_cast<int>(truth)][static_cast<int>(pred)];
        if (truth == pred) ++correct;
    }
    ClassMetrics m;
    for (int c = 0; c < 3; ++c) {
        long tp = confusion[c][c];
        long predicted = confusion[0][c] + confusion[1][c] + confusion[2][c];
        long actual = confusion[c][0] + confusion[c][1] + confusion[c][2];
        m.precision[c] = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        m.recall[c] = actual > 0 ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
        const double pr = m.precision[c] + m.recall[c];
        m.f1[c] = pr > 0.0 ? 2.0 * m.precision[c] * m.recall[c] / pr : 0.0;
    }
    m.macro_f1 = (m.f1[0] + m.f1[1] + m.f1[2]) / 3.0;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(truth_pred.size());
    return m;
}

std::vector<double> make_grid(double lo, double hi, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("grid step must be > 0");
    std::vector<double> grid;
    for (int i = 0;; ++i) {
        const double b = lo + step * i;
        if (b > hi + step / 2.0) break;
        grid.push_back(b);
    }
    return grid;
}

BiasSweepResult sweep_bias(std::span<const LabeledLogits> dev_set,
                           std::span<const double> grid, double lambda) {
    if (dev_set.empty()) throw std::invalid_argument("sweep_bias: empty dev set");
    if (grid.empty()) throw std::invalid_argument("sweep_bias: empty grid");
    std::vector<double> biases(grid.begin(), grid.end());
    std::sort(biases.begin(), biases.end());

    BiasSweepResult result;
    std::vector<std::pair<Verdict, Verdict>> pairs(dev_set.size());
    for (double b : biases) {
        for (std::size_t i = 0; i < dev_set.size(); ++i) {
            pairs[i] = {dev_set[i].truth, decode(dev_set[i].logits, b).verdict};
        }
        const auto m = compute_metrics(pairs);
        BiasSweepPoint pt;
        pt.bias = b;
        pt.macro_f1 = m.macro_f1;
        pt.recall_ns = m.recall_ns();
        pt.j = m.macro_f1 + lambda * m.recall_ns();
        result.curve.push_back(pt);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < result.curve.size(); ++i) {
        if (result.curve[i].j > result.curve[best].j) best = i;  // strict: smallest bias wins ties
    }
    result.best_bias = result.curve[best].bias;
    return result;
}

void VerifierLossConfig::validate() const {
    for (double w : class_weights) {
        if (!(w > 0.0)) throw std::invalid_argument("class weights must be > 0");
    }
    if (temper_exponent < 0.0 || temper_exponent > 1.0) {
        throw std::invalid_argument("temper exponent must be in [0,1]");
    }
    if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
        throw std::invalid_argument("label smoothing must be in [0,1)");
    }
    if (focal_gamma < 0.0) throw std::invalid_argument("focal gamma must be >= 0");
}

namespace {

struct Softmax {
    std::array<double, 3> p;
    std::array<double, 3> log_p;
};

Softmax softmax3(const VerifierLogits& logits) {
    const double z[3] = {logits.l_a, logits.l_b, logits.l_c};
    const double zmax = std::max({z[0], z[1], z[2]});
    double sum = 0.0;
    Softmax s;
    for (int i = 0; i < 3; ++i) sum += std::exp(z[i] - zmax);
    const double log_sum = std::log(sum);
    for (int i = 0; i < 3; ++i) {
        s.log_p[i] = z[i] - zmax - log_sum;
        s.p[i] = std::exp(s.log_p[i]);
    }
    return s;
}

}  // namespace

double classification_loss(const VerifierLogits& logits, Verdict truth,
                           const VerifierLossConfig& config) {
    config.validate();
    const auto s = softmax3(logits);
    const int y = static_cast<int>(truth);
    const double eps = config.label_smoothing;
    double ce = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double q = (1.0 - eps) * (c == y ? 1.0 : 0.0) + eps / 3.0;
        ce -= q * s.log_p[c];
    }
    const double focal = config.focal_gamma == 0.0
                             ? 1.0
                             : std::pow(1.0 - s.p[y], config.focal_gamma);
    const double loss = config.class_weights[static_cast<std::size_t>(y)] * focal * ce;
    if (!std::isfinite(loss)) throw std::runtime_error("classification loss is non-finite");
    return loss;
}

std::array<double, 3> class_weights_from_counts(const std::array<long, 3>& counts, double tau) {
    long total = 0;
    for (long c : counts) {
        if (c < 1) throw std::invalid_argument("class counts must be >= 1 (smooth first)");
        total += c;
    }
    std::array<double, 3> raw{};
    for (int i = 0; i < 3; ++i) {
        raw[i] = std::pow(static_cast<double>(total) / static_cast<double>(counts[i]), tau);
    }
    const double mean = (raw[0] + raw[1] + raw[2]) / 3.0;
    for (auto& w : raw) w /= mean;
    return raw;
}

VerifierLogits LexicalOracle::score(const std::string& claim,
                                    std::span<const std::string> evidence) const {
    static const std::unordered_set<std::string> kNegation = {
        "no", "not", "denies", "denied", "without", "never", "negative"};

    auto claim_tokens = text::tokenize(text::normalize(claim));
    std::set<std::string> claim_set(claim_tokens.begin(), claim_tokens.end());
    bool claim_neg = false;
    for (const auto& t : claim_tokens) claim_neg = claim_neg || kNegation.count(t) > 0;

    double best_overlap = 0.0;
    bool best_neg = false;
    for (const auto& ev : evidence) {
        auto ev_tokens = text::tokenize(text::normalize(ev));
        std::unordered_set<std::string> ev_set(ev_tokens.begin(), ev_tokens.end());
        std::size_t inter = 0;
        bool neg = false;
        for (const auto& t : claim_set) inter += ev_set.count(t);
        for (const auto& t : ev_tokens) neg = neg || kNegation.count(t) > 0;
        const double o = claim_set.empty()
                             ? 0.0
                             : static_cast<double>(inter) / static_cast<double>(claim_set.size());
        if (o > best_overlap) {
            best_overlap = o;
            best_neg = neg;
        }
    }

    const bool polarity_mismatch = best_overlap > 0.35 && claim_neg != best_neg;
    VerifierLogits logits;
    logits.l_a = 2.5 * best_overlap - 0.5 - (polarity_mismatch ? 1.5 : 0.0);
    logits.l_b = polarity_mismatch ? 2.0 * best_overlap + 0.5 : -1.0;
    logits.l_c = 0.5 - 2.0 * best_overlap;
    return logits;
}

ToyLinearVerifier::ToyLinearVerifier(int feature_dim, std::vector<double> weights)
    : feature_dim_(feature_dim), weights_(std::move(weights)) {
    if (feature_dim_ < 2) throw std::invalid_argument("feature_dim must be >= 2");
    if (weights_.size() != static_cast<std::size_t>(3 * feature_dim_)) {
        throw std::invalid_argument("weight vector must have 3*feature_dim entries");
    }
}

std::vector<double> ToyLinearVerifier::featurize(const std::string& claim,
                                                 std::span<const std::string> evidence) const {
    std::vector<double> f(static_cast<std::size_t>(feature_dim_), 0.0);
    const std::size_t hash_dims = static_cast<std::size_t>(feature_dim_) - 1;
    std::unordered_set<std::string> ev_tokens;
    for (const auto& ev : evidence) {
        for (auto& t : text::tokenize(text::normalize(ev))) ev_tokens.insert(std::move(t));
    }
    for (const auto& t : text::tokenize(text::normalize(claim))) {
        f[fnv1a64(t) % hash_dims] += 1.0;
        if (ev_tokens.count(t)) f[fnv1a64(t + "#ov") % hash_dims] += 1.0;
    }
    f.back() = 1.0;  // bias feature
    return f;
}

VerifierLogits ToyLinearVerifier::score(const std::string& claim,
                                        std::span<const std::string> evidence) const {
    const auto f = featurize(claim, evidence);
    double z[3] = {0.0, 0.0, 0.0};
    for (int c = 0; c < 3; ++c) {
        const double* row = weights_.data() + static_cast<std::size_t>(c) * f.size();
        for (std::size_t j = 0; j < f.size(); ++j) z[c] += row[j] * f[j];
    }
    return {z[0], z[1], z[2]};
}

double loss_and_grad(std::span<const double> weights, int feature_dim,
                     std::span<const double> features, Verdict truth,
                     const VerifierLossConfig& config, std::span<double> grad_out) {
    const std::size_t dim = static_cast<std::size_t>(feature_dim);
    VerifierLogits logits;
    double z[3] = {0.0, 0.0, 0.0};
    for (int c = 0; c < 3; ++c) {
        const double* row = weights.data() + static_cast<std::size_t>(c) * dim;
        for (std::size_t j = 0; j < dim; ++j) z[c] += row[j] * features[j];
    }
    logits = {z[0], z[1], z[2]};

    const auto s = softmax3(logits);
    const int y = static_cast<int>(truth);
    const double eps = config.label_smoothing;
    const double gamma = config.focal_gamma;
    const double wy = config.class_weights[static_cast<std::size_t>(y)];
    double ce = 0.0;
    std::array<double, 3> q{};
    for (int c = 0; c < 3; ++c) {
        q[c] = (1.0 - eps) * (c == y ? 1.0 : 0.0) + eps / 3.0;
        ce -= q[c] * s.log_p[c];
    }
    const double one_minus_py = 1.0 - s.p[y];
    const double focal = gamma == 0.0 ? 1.0 : std::pow(one_minus_py, gamma);
    const double loss = wy * focal * ce;

    // d loss / d z_k = w_y * [ focal*(p_k - q_k)
    //                          - ce*gamma*(1-p_y)^(gamma-1) * p_y * (1[k==y] - p_k) ]
    for (int k = 0; k < 3; ++k) {
        double g = focal * (s.p[k] - q[k]);
        if (gamma > 0.0) {
            g -= ce * gamma * std::pow(one_minus_py, gamma - 1.0) * s.p[y] *
                 ((k == y ? 1.0 : 0.0) - s.p[k]);
        }
        g *= wy;
        double* row = grad_out.data() + static_cast<std::size_t>(k) * dim;
        for (std::size_t j = 0; j < dim; ++j) row[j] += g * features[j];
    }
    return loss;
}

ToyLinearVerifier train_toy_verifier(std::span<const VerifierInstance> instances,
                                     const VerifierLossConfig& loss_config,
                                     const ToyTrainConfig& train_config) {
    loss_config.validate();
    std::set<Verdict> classes;
    for (const auto& inst : instances) classes.insert(inst.truth);
    if (classes.size() < 2) {
        throw std::invalid_argument("train_toy_verifier needs at least two classes");
    }

    const int dim = train_config.feature_dim;
    ToyLinearVerifier model(dim, std::vector<double>(static_cast<std::size_t>(3 * dim), 0.0));
    std::vector<std::vector<double>> feats;
    feats.reserve(instances.size());
    for (const auto& inst : instances) feats.push_back(model.featurize(inst.claim, inst.evidence));

    std::vector<double> grad(static_cast<std::size_t>(3 * dim), 0.0);
    const double inv_n = 1.0 / static_cast<double>(instances.size());
    for (int step = 0; step < train_config.steps; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (std::size_t i = 0; i < instances.size(); ++i) {
            loss += loss_and_grad(model.weights(), dim, feats[i], instances[i].truth,
                                  loss_config, grad);
        }
        loss *= inv_n;
        if (!std::isfinite(loss)) throw std::runtime_error("toy verifier training diverged");
        auto& w = model.mutable_weights();
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] -= train_config.learning_rate * grad[j] * inv_n;
        }
    }
    return model;
}

}  // namespace veridpo::verifier
