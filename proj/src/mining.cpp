#include "veridpo/mining.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "veridpo/jsonl.hpp"
#include "veridpo/rng.hpp"
#include "veridpo/text.hpp"
#include "veridpo/util.hpp"

namespace veridpo::mining {

using json = nlohmann::json;
using verifier::DeltaConvention;
using verifier::Verdict;

double utility(const SummaryStats& stats, const UtilityWeights& w) {
    const double n = static_cast<double>(stats.n_used);
    return w.lambda_a * stats.n_a - w.lambda_b * stats.n_b - w.lambda_c * stats.n_c +
           w.lambda_cov * std::min(n, static_cast<double>(w.n0)) -
           w.lambda_dup * (stats.dup_frac * n) - w.lambda_meta * stats.meta_hits;
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "full") return Strategy::Full;
    if (name == "random") return Strategy::Random;
    if (name == "no_hcns") return Strategy::NoHCNS;
    if (name == "no_length_coverage") return Strategy::NoLengthCoverage;
    throw std::invalid_argument("unknown strategy '" + name + "'");
}

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Full: return "full";
        case Strategy::Random: return "random";
        case Strategy::NoHCNS: return "no_hcns";
        case Strategy::NoLengthCoverage: return "no_length_coverage";
    }
    return "full";
}

std::vector<PromptWindow> build_windows(std::span<const corpus::EvidenceUnit> units,
                                        const WindowConfig& config, std::uint64_t seed) {
    std::vector<PromptWindow> out;
    const long n = static_cast<long>(units.size());
    const long half = (config.window_size + 1) / 2;
    if (n < half) return out;

    SplitMix64 jitter_rng(derive_seed(seed, 0x1A11));
    const std::string* subject = units.empty() ? nullptr : &units[0].subject_id;
    for (int i = 0; out.size() < static_cast<std::size_t>(config.prompts_per_subject); ++i) {
        const long base = static_cast<long>(i) * config.stride;
        if (base >= n) break;
        const long jitter = config.jitter_range > 0
                                ? jitter_rng.uniform_int(-config.jitter_range, config.jitter_range)
                                : 0;
        const long start = std::clamp(base + jitter, 0L, n - 1);
        const long avail = n - start;
        const long take = std::min<long>(avail, config.window_size);
        if (take < half) continue;  // short tail; later starts only get shorter

        PromptWindow w;
        w.subject_id = subject ? *subject : "";
        w.window_index = i;
        std::string prompt;
        for (long u = start; u < start + take; ++u) {
            const auto& unit = units[static_cast<std::size_t>(u)];
            w.unit_ids.push_back(unit.unit_id);
            if (!prompt.empty()) prompt.push_back('\n');
            prompt += text::truncate_words(unit.text,
                                           static_cast<std::size_t>(config.unit_word_cap));
        }
        w.prompt_text = std::move(prompt);
        out.push_back(std::move(w));
    }
    return out;
}

SubjectCorpus build_subject_corpus(std::vector<corpus::Note> notes,
                                   const corpus::SegmentationConfig& seg) {
    if (notes.empty()) throw std::invalid_argument("subject corpus needs at least one note");
    SubjectCorpus sc;
    sc.subject_id = notes.front().subject_id;
    sc.notes = std::move(notes);
    std::sort(sc.notes.begin(), sc.notes.end(),
              [](const corpus::Note& a, const corpus::Note& b) {
                  if (a.chart_time != b.chart_time) return a.chart_time < b.chart_time;
                  return a.note_id < b.note_id;
              });
    for (const auto& note : sc.notes) {
        auto units = corpus::segment_note(note, seg);
        sc.units.insert(sc.units.end(), std::make_move_iterator(units.begin()),
                        std::make_move_iterator(units.end()));
    }
    if (sc.units.empty()) throw std::runtime_error("subject " + sc.subject_id + " has no units");
    sc.note_index = retrieval::build_note_index(sc.notes);
    sc.unit_index = retrieval::build_unit_index(sc.units);
    return sc;
}

std::vector<SubjectCorpus> build_subject_corpora(const std::vector<corpus::Note>& notes,
                                                 const corpus::SegmentationConfig& seg,
                                                 ExecMode mode) {
    std::map<std::string, std::vector<corpus::Note>> by_subject;
    for (const auto& n : notes) by_subject[n.subject_id].push_back(n);
    std::vector<std::vector<corpus::Note>> groups;
    groups.reserve(by_subject.size());
    for (auto& [_, g] : by_subject) groups.push_back(std::move(g));

    std::vector<SubjectCorpus> out(groups.size());
    parallel_for(groups.size(), mode, [&](std::size_t i) {
        out[i] = build_subject_corpus(std::move(groups[i]), seg);
    });
    return out;
}

ScoredCandidate score_candidate_cached(const std::string& candidate_text,
                                       const SubjectCorpus& subject,
                                       const verifier::VerifierClient& client,
                                       const ScoringConfig& config) {
    ScoredCandidate out;
    out.text = candidate_text;
    out.meta_hits = claims::count_meta_hits(candidate_text, config.filter);

    const std::string cleaned = claims::clean_candidate(candidate_text, config.filter);
    out.chars = static_cast<int>(cleaned.size());

    auto segmented = claims::segment_claims(cleaned);
    out.n_claims_segmented = static_cast<int>(segmented.size());

    std::vector<claims::Claim> valid;
    for (auto& c : segmented) {
        if (claims::is_valid_claim(c, config.filter)) valid.push_back(std::move(c));
    }
    out.dup_frac = claims::dup_fraction(valid);

    std::vector<claims::Claim> deduped;
    std::unordered_set<std::string> seen;
    for (auto& c : valid) {
        if (seen.insert(c.text).second) deduped.push_back(std::move(c));
    }
    out.n_claims_valid = static_cast<int>(deduped.size());

    const std::size_t cap = static_cast<std::size_t>(config.scoring_cap);
    retrieval::RetrievalParams rp = config.retrieval;
    rp.top_k_units = config.top_k_evidence;
    for (std::size_t i = 0; i < deduped.size() && i < cap; ++i) {
        const auto& claim = deduped[i];
        auto hits = retrieval::retrieve_two_stage(claim.text, subject.note_index,
                                                  subject.unit_index, subject.units, rp);
        std::vector<std::string> evidence;
        evidence.reserve(hits.size());
        for (const auto& h : hits) {
            int d = subject.unit_index.doc_index(h.unit_id);
            if (d >= 0) evidence.push_back(subject.units[static_cast<std::size_t>(d)].text);
        }
        try {
            out.claim_logits.push_back(client.score(claim.text, evidence));
            out.claim_texts.push_back(claim.text);
        } catch (const std::exception&) {
            ++out.n_skipped;  // scorer failure: claim skipped, not counted in n_used
        }
    }
    return out;
}

SummaryStats summarize(const ScoredCandidate& scored, double bias_prec, double delta,
                       DeltaConvention convention) {
    SummaryStats s;
    s.chars = scored.chars;
    s.dup_frac = scored.dup_frac;
    s.meta_hits = scored.meta_hits;
    s.n_claims_segmented = scored.n_claims_segmented;
    s.n_claims_valid = scored.n_claims_valid;
    s.n_skipped = scored.n_skipped;
    for (const auto& logits : scored.claim_logits) {
        const auto d = verifier::decode(logits, bias_prec, convention);
        switch (d.verdict) {
            case Verdict::Supported: ++s.n_a; break;
            case Verdict::NotSupported: ++s.n_b; break;
            case Verdict::NotAddressed: ++s.n_c; break;
        }
        if (verifier::is_hcns(logits, bias_prec, delta, convention)) ++s.n_hcns;
    }
    s.n_used = s.n_a + s.n_b + s.n_c;
    return s;
}

SummaryStats score_candidate(const std::string& candidate_text, const SubjectCorpus& subject,
                             const verifier::VerifierClient& client,
                             const ScoringConfig& config) {
    return summarize(score_candidate_cached(candidate_text, subject, client, config),
                     config.bias_prec, config.delta, config.delta_convention);
}

namespace {

// Tie order shared by chosen/rejected selection and best-of-k:
// fewer predicted B, then more chars, then lower candidate index.
bool tie_before(const CandidateView& a, const CandidateView& b) {
    if (a.stats.n_b != b.stats.n_b) return a.stats.n_b < b.stats.n_b;
    return a.stats.chars > b.stats.chars;
}

}  // namespace

std::optional<PreferencePair> select_pair(std::span<const CandidateView> candidates,
                                          const PairConstraints& constraints,
                                          Strategy strategy, const UtilityWeights& weights,
                                          std::uint64_t rng_seed) {
    if (candidates.size() < 2) return std::nullopt;

    auto make_pair = [&](std::size_t ci, std::size_t ri,
                         const std::vector<double>& utils) -> PreferencePair {
        PreferencePair p;
        p.chosen = {*candidates[ci].text, candidates[ci].stats, utils[ci]};
        p.rejected = {*candidates[ri].text, candidates[ri].stats, utils[ri]};
        p.utility_gap = utils[ci] - utils[ri];
        p.strategy = strategy;
        return p;
    };

    if (strategy == Strategy::Random) {
        SplitMix64 rng(derive_seed(rng_seed, 0x9A17));
        const auto n = static_cast<std::int64_t>(candidates.size());
        const std::size_t ci = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
        std::size_t ri = static_cast<std::size_t>(rng.uniform_int(0, n - 2));
        if (ri >= ci) ++ri;  // uniform over ordered pairs with ci != ri
        std::vector<double> utils(candidates.size());
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            utils[i] = utility(candidates[i].stats, weights);
        }
        return make_pair(ci, ri, utils);
    }

    UtilityWeights w = weights;
    if (strategy == Strategy::NoLengthCoverage) {
        w.lambda_cov = 0.0;
        w.lambda_dup = 0.0;
        w.lambda_meta = 0.0;
    }
    std::vector<double> utils(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        utils[i] = utility(candidates[i].stats, w);
    }

    const bool use_hcns = strategy != Strategy::NoHCNS;
    std::optional<std::size_t> chosen;
    std::optional<std::size_t> rejected;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& s = candidates[i].stats;
        const bool chosen_ok = s.n_b <= constraints.tau_b &&
                               (!use_hcns || s.n_hcns <= constraints.tau_hcns);
        if (chosen_ok) {
            if (!chosen || utils[i] > utils[*chosen] ||
                (utils[i] == utils[*chosen] && tie_before(candidates[i], candidates[*chosen]))) {
                chosen = i;
            }
        }
        const bool rejected_ok = !use_hcns || s.n_hcns >= 1;
        if (rejected_ok) {
            if (!rejected || utils[i] < utils[*rejected] ||
                (utils[i] == utils[*rejected] &&
                 tie_before(candidates[i], candidates[*rejected]))) {
                rejected = i;
            }
        }
    }
    if (!chosen || !rejected || *chosen == *rejected) return std::nullopt;

    const double gap = utils[*chosen] - utils[*rejected];
    const bool gap_ok = constraints.strict_gap ? gap > constraints.tau_u
                                               : gap >= constraints.tau_u;
    if (!gap_ok) return std::nullopt;
    if (strategy != Strategy::NoLengthCoverage) {
        const int dn = std::abs(candidates[*chosen].stats.n_used -
                                candidates[*rejected].stats.n_used);
        if (dn > constraints.tau_n) return std::nullopt;
    }
    return make_pair(*chosen, *rejected, utils);
}

std::vector<PromptPool> build_pool(std::span<const SubjectCorpus> subjects,
                                   const GeneratorClient& generator,
                                   const verifier::VerifierClient& verifier_client,
                                   const MiningConfig& config, ExecMode mode) {
    struct PromptTask {
        const SubjectCorpus* subject = nullptr;
        PromptWindow window;
    };
    std::vector<PromptTask> tasks;
    for (const auto& subject : subjects) {
        const auto subject_seed = derive_seed(config.seed, fnv1a64(subject.subject_id));
        auto windows = build_windows(subject.units, config.window, subject_seed);
        for (auto& w : windows) tasks.push_back({&subject, std::move(w)});
    }

    std::vector<PromptPool> pools(tasks.size());
    parallel_for(tasks.size(), mode, [&](std::size_t i) {
        const auto& task = tasks[i];
        PromptPool pool;
        pool.window = task.window;
        const auto prompt_seed =
            derive_seed(config.seed, fnv1a64(task.subject->subject_id),
                        static_cast<std::uint64_t>(task.window.window_index));
        try {
            auto texts = generator.generate(task.window, config.candidates_per_prompt,
                                            config.temperature, config.top_p, prompt_seed);
            pool.candidates.reserve(texts.size());
            for (const auto& t : texts) {
                pool.candidates.push_back(
                    score_candidate_cached(t, *task.subject, verifier_client, config.scoring));
            }
        } catch (const std::exception& e) {
            pool.failed = true;  // outage: skip the prompt, keep the run going
            pool.failure = e.what();
            pool.candidates.clear();
        }
        if (!pool.failed && config.recall_prefilter) {
            // Yield control only: re-decode the cached logits under the
            // recall-stage bias; a pool with zero B decodes is skipped
            // before pair selection. Emitted labels are never affected.
            bool any_b = false;
            for (const auto& c : pool.candidates) {
                for (const auto& logits : c.claim_logits) {
                    if (verifier::decode(logits, config.scoring.bias_recall).verdict ==
                        Verdict::NotSupported) {
                        any_b = true;
                        break;
                    }
                }
                if (any_b) break;
            }
            pool.skipped_by_prefilter = !any_b;
        }
        pools[i] = std::move(pool);
    });

    std::sort(pools.begin(), pools.end(), [](const PromptPool& a, const PromptPool& b) {
        if (a.window.subject_id != b.window.subject_id) {
            return a.window.subject_id < b.window.subject_id;
        }
        return a.window.window_index < b.window.window_index;
    });
    return pools;
}

std::vector<PreferencePair> select_pairs_from_pool(std::span<const PromptPool> pools,
                                                   const MiningConfig& config) {
    std::vector<PreferencePair> pairs;
    for (const auto& pool : pools) {
        if (pool.failed || pool.skipped_by_prefilter || pool.candidates.size() < 2) continue;
        std::vector<SummaryStats> stats(pool.candidates.size());
        std::vector<CandidateView> views(pool.candidates.size());
        for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
            stats[i] = summarize(pool.candidates[i], config.scoring.bias_prec,
                                 config.scoring.delta, config.scoring.delta_convention);
            views[i] = {&pool.candidates[i].text, stats[i], 0.0};
        }
        const auto pair_seed = derive_seed(config.seed, fnv1a64(pool.window.subject_id),
                                           static_cast<std::uint64_t>(pool.window.window_index));
        auto maybe = select_pair(views, config.constraints, config.strategy, config.weights,
                                 pair_seed);
        if (maybe) {
            maybe->prompt_id = pool.window.prompt_id();
            maybe->prompt_text = pool.window.prompt_text;
            maybe->config_hash = config.config_hash;
            pairs.push_back(std::move(*maybe));
        }
    }
    return pairs;
}

MiningSummary summarize_mining(std::span<const PreferencePair> pairs,
                               std::span<const PromptPool> pools,
                               const MiningConfig& config, int n_subjects) {
    MiningSummary s;
    s.n_subjects = n_subjects;
    s.n_prompts = static_cast<int>(pools.size());
    for (const auto& p : pools) {
        if (p.skipped_by_prefilter || p.failed) ++s.n_prompts_skipped;
    }
    s.candidates_per_prompt = config.candidates_per_prompt;
    s.n_pairs = static_cast<int>(pairs.size());
    s.bias_prec = config.scoring.bias_prec;
    s.bias_recall = config.scoring.bias_recall;
    s.delta = config.scoring.delta;
    if (pairs.empty()) return s;

    long fewer = 0;
    double sum_bc = 0.0, sum_br = 0.0, sum_gap = 0.0;
    for (const auto& p : pairs) {
        if (p.chosen.stats.n_b < p.rejected.stats.n_b) ++fewer;
        sum_bc += p.chosen.stats.n_b;
        sum_br += p.rejected.stats.n_b;
        sum_gap += p.utility_gap;
    }
    const double n = static_cast<double>(pairs.size());
    s.frac_chosen_fewer_b = static_cast<double>(fewer) / n;
    s.mean_b_chosen = sum_bc / n;
    s.mean_b_rejected = sum_br / n;
    s.mean_utility_gap = sum_gap / n;
    return s;
}

MiningResult mine_split(std::span<const SubjectCorpus> subjects,
                        const GeneratorClient& generator,
                        const verifier::VerifierClient& verifier_client,
                        const MiningConfig& config, ExecMode mode) {
    MiningResult result;
    result.pools = build_pool(subjects, generator, verifier_client, config, mode);
    result.pairs = select_pairs_from_pool(result.pools, config);
    result.summary = summarize_mining(result.pairs, result.pools, config,
                                      static_cast<int>(subjects.size()));
    return result;
}

BiasPrecSelection select_bias_prec(std::span<const verifier::LabeledLogits> dev,
                                   double lo, double hi, double delta, int min_yield,
                                   DeltaConvention convention) {
    if (dev.empty()) throw std::invalid_argument("select_bias_prec: empty dev set");

    auto evaluate = [&](double bias) {
        BiasPrecSelection r;
        r.bias_prec = bias;
        long hcns = 0, correct = 0;
        for (const auto& inst : dev) {
            if (verifier::is_hcns(inst.logits, bias, delta, convention)) {
                ++hcns;
                if (inst.truth == Verdict::NotSupported) ++correct;
            }
        }
        r.hcns_yield = static_cast<int>(hcns);
        r.hcns_precision = hcns > 0 ? static_cast<double>(correct) / static_cast<double>(hcns)
                                    : 0.0;
        r.yield_met = hcns >= min_yield;
        return r;
    };

    auto sweep = [&](double a, double b, double step) {
        BiasPrecSelection best = evaluate(a);
        for (double x = a; x <= b + step / 2.0; x += step) {
            auto r = evaluate(x);
            const bool better = (r.yield_met && !best.yield_met) ||
                                (r.yield_met == best.yield_met &&
                                 r.hcns_precision > best.hcns_precision);
            if (better) best = r;
        }
        return best;
    };

    auto coarse = sweep(lo, hi, 0.10);
    auto fine = sweep(std::max(lo, coarse.bias_prec - 0.10),
                      std::min(hi, coarse.bias_prec + 0.10), 0.01);
    return fine.yield_met || fine.hcns_precision >= coarse.hcns_precision ? fine : coarse;
}

namespace {

json stats_to_json(const SummaryStats& s) {
    return json{{"n_a", s.n_a},
                {"n_b", s.n_b},
                {"n_c", s.n_c},
                {"n_used", s.n_used},
                {"n_hcns", s.n_hcns},
                {"dup_frac", s.dup_frac},
                {"meta_hits", s.meta_hits},
                {"chars", s.chars},
                {"n_claims_segmented", s.n_claims_segmented},
                {"n_claims_valid", s.n_claims_valid},
                {"n_skipped", s.n_skipped}};
}

SummaryStats stats_from_json(const json& j) {
    SummaryStats s;
    s.n_a = j.at("n_a").get<int>();
    s.n_b = j.at("n_b").get<int>();
    s.n_c = j.at("n_c").get<int>();
    s.n_used = j.at("n_used").get<int>();
    s.n_hcns = j.at("n_hcns").get<int>();
    s.dup_frac = j.at("dup_frac").get<double>();
    s.meta_hits = j.at("meta_hits").get<int>();
    s.chars = j.at("chars").get<int>();
    s.n_claims_segmented = j.value("n_claims_segmented", 0);
    s.n_claims_valid = j.value("n_claims_valid", 0);
    s.n_skipped = j.value("n_skipped", 0);
    return s;
}

}  // namespace

void save_pairs(std::span<const PreferencePair> pairs, const std::string& path,
                const std::string& config_hash) {
    jsonl::Writer writer(path);
    writer.header("veridpo.pairs.v1", config_hash);
    for (const auto& p : pairs) {
        writer.write(json{{"prompt_id", p.prompt_id},
                          {"prompt_text", p.prompt_text},
                          {"chosen_text", p.chosen.text},
                          {"rejected_text", p.rejected.text},
                          {"chosen_stats", stats_to_json(p.chosen.stats)},
                          {"rejected_stats", stats_to_json(p.rejected.stats)},
                          {"chosen_utility", p.chosen.utility_value},
                          {"rejected_utility", p.rejected.utility_value},
                          {"utility_gap", p.utility_gap},
                          {"strategy", strategy_name(p.strategy)},
                          {"config_hash", p.config_hash}});
    }
}

std::vector<PreferencePair> load_pairs(const std::string& path) {
    std::vector<PreferencePair> pairs;
    jsonl::for_each_strict(path, [&](std::size_t, const json& rec) {
        PreferencePair p;
        p.prompt_id = rec.at("prompt_id").get<std::string>();
        p.prompt_text = rec.value("prompt_text", "");
        p.chosen.text = rec.at("chosen_text").get<std::string>();
        p.rejected.text = rec.at("rejected_text").get<std::string>();
        p.chosen.stats = stats_from_json(rec.at("chosen_stats"));
        p.rejected.stats = stats_from_json(rec.at("rejected_stats"));
        p.chosen.utility_value = rec.value("chosen_utility", 0.0);
        p.rejected.utility_value = rec.value("rejected_utility", 0.0);
        p.utility_gap = rec.at("utility_gap").get<double>();
        p.strategy = strategy_from_name(rec.value("strategy", "full"));
        p.config_hash = rec.value("config_hash", "");
        pairs.push_back(std::move(p));
    });
    return pairs;
}

void export_claims(std::span<const PromptPool> pools, const std::string& path,
                   const std::string& config_hash) {
    jsonl::Writer writer(path);
    writer.header("veridpo.claims.v1", config_hash);
    for (const auto& pool : pools) {
        if (pool.failed) continue;
        for (std::size_t c = 0; c < pool.candidates.size(); ++c) {
            const auto& cand = pool.candidates[c];
            const std::string candidate_id = pool.window.prompt_id() + "/c" + std::to_string(c);
            for (std::size_t k = 0; k < cand.claim_texts.size(); ++k) {
                writer.write(json{{"candidate_id", candidate_id},
                                  {"claim_id", "c" + std::to_string(k)},
                                  {"text", cand.claim_texts[k]}});
            }
        }
    }
}

void save_mining_summary(const MiningSummary& s, const std::string& path,
                         const std::string& config_hash) {
    json doc{{"config_hash", config_hash},
             {"n_subjects", s.n_subjects},
             {"n_prompts", s.n_prompts},
             {"n_prompts_skipped", s.n_prompts_skipped},
             {"candidates_per_prompt", s.candidates_per_prompt},
             {"n_pairs", s.n_pairs},
             {"frac_chosen_fewer_b", s.frac_chosen_fewer_b},
             {"mean_b_chosen", s.mean_b_chosen},
             {"mean_b_rejected", s.mean_b_rejected},
             {"mean_utility_gap", s.mean_utility_gap},
             {"bias_prec", s.bias_prec},
             {"bias_recall", s.bias_recall},
             {"delta", s.delta}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << doc.dump(2) << '\n';
}

}  // namespace veridpo::mining
