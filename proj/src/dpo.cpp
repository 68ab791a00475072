#include "veridpo/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace veridpo::dpo {

void DpoConfig::validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
}

double dpo_score(const PairLogProbs& lp, double beta) {
    return beta * ((lp.lp_pol_pos - lp.lp_pol_neg) - (lp.lp_ref_pos - lp.lp_ref_neg));
}

double neg_log_sigmoid(double x) {
    // -ln sigma(x) = ln(1 + e^-x); for x < 0 rewrite as -x + ln(1 + e^x).
    if (x >= 0.0) return std::log1p(std::exp(-x));
    return -x + std::log1p(std::exp(x));
}

double dpo_loss(std::span<const PairLogProbs> batch, double beta, ExecMode mode) {
    if (batch.empty()) throw std::invalid_argument("dpo_loss: empty batch");
    std::vector<double> terms(batch.size());
    parallel_for(batch.size(), mode, [&](std::size_t i) {
        terms[i] = neg_log_sigmoid(dpo_score(batch[i], beta));
    });
    double sum = 0.0;  // ordered reduction keeps the result mode-independent
    for (double t : terms) sum += t;
    return sum / static_cast<double>(batch.size());
}

double ToyPolicy::log_prob(std::size_t prompt, std::size_t response) const {
    const auto& row = params.at(prompt);
    const double zmax = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double z : row) sum += std::exp(z - zmax);
    return row.at(response) - zmax - std::log(sum);
}

PairLogProbs pair_log_probs(const ToyPolicy& policy, const ToyPolicy& reference,
                            const ToyPair& pair, double) {
    PairLogProbs lp;
    lp.lp_pol_pos = policy.log_prob(pair.prompt, pair.pos);
    lp.lp_pol_neg = policy.log_prob(pair.prompt, pair.neg);
    lp.lp_ref_pos = reference.log_prob(pair.prompt, pair.pos);
    lp.lp_ref_neg = reference.log_prob(pair.prompt, pair.neg);
    return lp;
}

std::vector<std::vector<double>> dpo_grad(std::span<const ToyPair> pairs, double beta,
                                          const ToyPolicy& policy, const ToyPolicy& reference,
                                          ExecMode mode) {
    if (pairs.empty()) throw std::invalid_argument("dpo_grad: empty batch");
    std::vector<std::vector<double>> grad(policy.params.size());
    for (std::size_t p = 0; p < grad.size(); ++p) {
        grad[p].assign(policy.params[p].size(), 0.0);
    }

    // Per-pair dL/ds computed in parallel; the sparse accumulation into the
    // parameter rows happens serially in pair order.
    std::vector<double> dls(pairs.size());
    std::vector<std::vector<double>> softmaxes(pairs.size());
    parallel_for(pairs.size(), mode, [&](std::size_t i) {
        const auto& pr = pairs[i];
        const double s = dpo_score(pair_log_probs(policy, reference, pr), beta);
        // d(-ln sigma(s))/ds = -sigma(-s)
        const double sig_neg = 1.0 / (1.0 + std::exp(s));
        dls[i] = -sig_neg / static_cast<double>(pairs.size());

        const auto& row = policy.params[pr.prompt];
        const double zmax = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        std::vector<double> p(row.size());
        for (std::size_t k = 0; k < row.size(); ++k) {
            p[k] = std::exp(row[k] - zmax);
            sum += p[k];
        }
        for (auto& v : p) v /= sum;
        softmaxes[i] = std::move(p);
    });

    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& pr = pairs[i];
        const auto& p = softmaxes[i];
        auto& g = grad[pr.prompt];
        // d lp(pos)/d theta_k = 1[k==pos] - p_k; same for neg; the p_k terms
        // cancel in the difference but the chain is kept explicit.
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double d_pos = (k == pr.pos ? 1.0 : 0.0) - p[k];
            const double d_neg = (k == pr.neg ? 1.0 : 0.0) - p[k];
            g[k] += dls[i] * beta * (d_pos - d_neg);
        }
    }
    return grad;
}

DpoTrainResult train_toy_dpo(std::span<const ToyPair> pairs,
                             std::span<const std::size_t> vocab_sizes,
                             const DpoTrainConfig& config) {
    DpoConfig{config.beta}.validate();
    if (pairs.empty()) throw std::invalid_argument("train_toy_dpo: no pairs");

    DpoTrainResult result;
    result.policy.params.resize(vocab_sizes.size());
    for (std::size_t p = 0; p < vocab_sizes.size(); ++p) {
        if (vocab_sizes[p] < 2) throw std::invalid_argument("each prompt needs >= 2 responses");
        result.policy.params[p].assign(vocab_sizes[p], 0.0);
    }
    for (const auto& pr : pairs) {
        if (pr.prompt >= vocab_sizes.size() || pr.pos >= vocab_sizes[pr.prompt] ||
            pr.neg >= vocab_sizes[pr.prompt] || pr.pos == pr.neg) {
            throw std::invalid_argument("pair references out-of-range or equal responses");
        }
    }
    result.reference = result.policy;  // frozen pre-training copy

    auto batch_stats = [&](const ToyPolicy& policy) {
        double loss = 0.0, margin = 0.0;
        long positive = 0;
        for (const auto& pr : pairs) {
            const double s = dpo_score(pair_log_probs(policy, result.reference, pr), config.beta);
            loss += neg_log_sigmoid(s);
            margin += s;
            if (s > 0.0) ++positive;
        }
        const double n = static_cast<double>(pairs.size());
        return std::tuple<double, double, double>{loss / n, margin / n,
                                                  static_cast<double>(positive) / n};
    };

    for (int step = 0; step < config.steps; ++step) {
        auto [loss, margin, _] = batch_stats(result.policy);
        if (!std::isfinite(loss)) throw std::runtime_error("toy DPO training diverged");
        result.trace.push_back({step, loss, margin});
        auto grad = dpo_grad(pairs, config.beta, result.policy, result.reference);
        for (std::size_t p = 0; p < result.policy.params.size(); ++p) {
            for (std::size_t k = 0; k < result.policy.params[p].size(); ++k) {
                result.policy.params[p][k] -= config.learning_rate * grad[p][k];
            }
        }
    }
    auto [loss, margin, frac] = batch_stats(result.policy);
    result.final_loss = loss;
    result.final_mean_margin = margin;
    result.frac_positive_margin = frac;
    result.trace.push_back({config.steps, loss, margin});
    return result;
}

std::size_t best_of_k(std::span<const mining::SummaryStats> candidates,
                      const mining::UtilityWeights& weights) {
    if (candidates.empty()) throw std::invalid_argument("best_of_k: empty candidate list");
    std::size_t best = 0;
    double best_u = mining::utility(candidates[0], weights);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double u = mining::utility(candidates[i], weights);
        bool better = u > best_u;
        if (u == best_u) {
            if (candidates[i].n_b != candidates[best].n_b) {
                better = candidates[i].n_b < candidates[best].n_b;
            } else if (candidates[i].chars != candidates[best].chars) {
                better = candidates[i].chars > candidates[best].chars;
            }
        }
        if (better) {
            best = i;
            best_u = u;
        }
    }
    return best;
}

}  // namespace veridpo::dpo
