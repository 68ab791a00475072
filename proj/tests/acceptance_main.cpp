// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances and thresholds are pinned in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "veridpo/cli.hpp"
#include "veridpo/dpo.hpp"
#include "veridpo/eval.hpp"
#include "veridpo/mining.hpp"
#include "veridpo/rng.hpp"
#include "veridpo/synth.hpp"
#include "veridpo/verifier.hpp"

using namespace veridpo;
namespace fs = std::filesystem;

namespace {

struct Checker {
    std::vector<std::string> failures;

    void require(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

struct Criterion {
    int id;
    std::string name;
    std::function<void(Checker&)> fn;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ------------------------------------------------------------------ shared

struct BigRun {
    std::shared_ptr<const synth::SyntheticWorld> world;
    std::vector<mining::SubjectCorpus> corpora;
    std::vector<mining::PromptPool> pools;  // noise-0 oracle, default scoring config
    mining::MiningConfig config;
    double build_seconds = 0.0;
};

BigRun& big_run() {
    static BigRun run = [] {
        const auto t0 = std::chrono::steady_clock::now();
        BigRun r;
        synth::WorldConfig wc;
        wc.n_subjects = 30;
        wc.notes_per_subject = 28;
        wc.seed = 20250800;
        r.world = std::make_shared<const synth::SyntheticWorld>(synth::gen_world(wc));
        std::vector<corpus::Note> notes;
        for (const auto& s : r.world->subjects) {
            notes.insert(notes.end(), s.notes.begin(), s.notes.end());
        }
        r.corpora = mining::build_subject_corpora(notes, {});
        r.config.seed = 424242;
        synth::OracleVerifier oracle(r.world, 0.0, 5150);
        synth::SynthGenerator generator(r.world, {});
        r.pools = mining::build_pool(r.corpora, generator, oracle, r.config);
        r.build_seconds = seconds_since(t0);
        return r;
    }();
    return run;
}

// --------------------------------------------------------------- criteria

void c1_bm25_oracle(Checker& ck) {
    static const char* kVocab[] = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta",
                                   "theta", "iota", "kappa", "lam", "mu", "nu", "xi", "omicron",
                                   "pi", "rho", "sigma", "tau", "upsilon"};
    const auto t0 = std::chrono::steady_clock::now();
    SplitMix64 rng(90210);
    long corpora_checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n_notes = static_cast<int>(rng.uniform_int(1, 12));
        std::vector<corpus::Note> notes;
        std::vector<corpus::EvidenceUnit> units;
        std::vector<oracle::Doc> note_docs, unit_docs;
        int total_units = 0;
        for (int n = 0; n < n_notes && total_units < 50; ++n) {
            corpus::Note note;
            note.note_id = "n" + std::to_string(n);
            note.subject_id = "s";
            note.chart_time = rng.uniform_int(0, 9);
            std::string note_text;
            const int n_units = static_cast<int>(rng.uniform_int(1, 5));
            for (int u = 0; u < n_units && total_units < 50; ++u) {
                std::string t;
                const int len = static_cast<int>(rng.uniform_int(1, 10));
                for (int k = 0; k < len; ++k) {
                    if (!t.empty()) t += " ";
                    t += kVocab[rng.uniform_int(0, 19)];
                }
                corpus::EvidenceUnit unit;
                char buf[16];
                std::snprintf(buf, sizeof(buf), "#%05d", u);
                unit.unit_id = note.note_id + buf;
                unit.note_id = note.note_id;
                unit.subject_id = "s";
                unit.span_index = u;
                unit.text = t;
                unit.char_len = static_cast<int>(t.size());
                unit.time = note.chart_time;
                units.push_back(unit);
                unit_docs.push_back({unit.unit_id, note.note_id, text::tokenize(t)});
                if (!note_text.empty()) note_text += " ";
                note_text += t;
                ++total_units;
            }
            if (note_text.empty()) note_text = "alpha";
            note.text = note_text;
            notes.push_back(note);
            note_docs.push_back({note.note_id, note.note_id, text::tokenize(note_text)});
        }
        auto note_index = retrieval::build_note_index(notes);
        auto unit_index = retrieval::build_unit_index(units);
        retrieval::RetrievalParams params;
        params.top_n_notes = static_cast<int>(rng.uniform_int(1, 8));
        params.top_k_units = static_cast<int>(rng.uniform_int(1, 25));
        params.cap_per_note = static_cast<int>(rng.uniform_int(1, 6));

        for (int q = 0; q < 3; ++q) {
            std::vector<std::string> query;
            const int n_terms = static_cast<int>(rng.uniform_int(1, 6));
            for (int k = 0; k < n_terms; ++k) query.push_back(kVocab[rng.uniform_int(0, 19)]);
            std::string claim;
            for (const auto& t : query) claim += t + " ";

            auto got = retrieval::retrieve_two_stage(claim, note_index, unit_index, units,
                                                     params);
            auto want = oracle::two_stage(note_docs, unit_docs, query, params);
            ck.require(got.size() == want.size(), "hit-count mismatch vs brute force");
            for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
                ck.require(got[i].unit_id == want[i].unit_id, "hit order mismatch");
                ck.require(std::abs(got[i].score - want[i].score) < 1e-9,
                           "score differs from brute force by more than 1e-9");
            }
        }
        ++corpora_checked;
    }
    ck.require(corpora_checked == 200, "expected 200 corpora");
    const double secs = seconds_since(t0);
    ck.require(secs < 10.0, "runtime " + std::to_string(secs) + "s exceeds 10s");
}

void c2_utility_bitexact(Checker& ck) {
    mining::UtilityWeights w;  // default weights
    SplitMix64 rng(777);
    for (int i = 0; i < 1000; ++i) {
        mining::SummaryStats s;
        s.n_a = static_cast<int>(rng.uniform_int(0, 30));
        s.n_b = static_cast<int>(rng.uniform_int(0, 12));
        s.n_c = static_cast<int>(rng.uniform_int(0, 12));
        s.n_used = s.n_a + s.n_b + s.n_c;
        s.dup_frac = rng.u01();
        s.meta_hits = static_cast<int>(rng.uniform_int(0, 4));
        s.chars = static_cast<int>(rng.uniform_int(0, 3000));
        ck.require(mining::utility(s, w) == oracle::utility_closed_form(s, w),
                   "utility differs from the closed form");
    }
    mining::SummaryStats a;
    a.n_a = 10;
    a.n_b = 1;
    a.n_c = 2;
    a.n_used = 13;
    ck.require(mining::utility(a, w) == 9.0, "hand-worked case U=9.0");
    mining::SummaryStats b;
    b.n_a = 12;
    b.n_used = 12;
    b.dup_frac = 0.5;
    b.meta_hits = 1;
    ck.require(mining::utility(b, w) == 1.0, "hand-worked case U=1.0");
}

void c3_pair_constraints(Checker& ck) {
    const auto t0 = std::chrono::steady_clock::now();
    auto& run = big_run();
    ck.require(run.world->subjects.size() >= 30, "need >= 30 subjects");
    long prompts = static_cast<long>(run.pools.size());
    ck.require(prompts >= 30 * 30 * 9 / 10, "prompt count well below 30x30");

    mining::MiningConfig cfg = run.config;
    cfg.strategy = mining::Strategy::Full;
    auto pairs = mining::select_pairs_from_pool(run.pools, cfg);
    ck.require(!pairs.empty(), "no pairs mined");

    long violations = 0, fewer = 0;
    for (const auto& p : pairs) {
        const bool ok = p.utility_gap >= cfg.constraints.tau_u &&
                        std::abs(p.chosen.stats.n_used - p.rejected.stats.n_used) <=
                            cfg.constraints.tau_n &&
                        p.chosen.stats.n_hcns <= cfg.constraints.tau_hcns &&
                        p.chosen.stats.n_b <= cfg.constraints.tau_b &&
                        p.rejected.stats.n_hcns >= 1;
        if (!ok) ++violations;
        if (p.chosen.stats.n_b < p.rejected.stats.n_b) ++fewer;
    }
    ck.require(violations == 0, std::to_string(violations) + " constraint violations");
    const double frac = static_cast<double>(fewer) / static_cast<double>(pairs.size());
    ck.require(frac >= 0.95, "fewer-B fraction " + std::to_string(frac) + " below 0.95");
    const double secs = run.build_seconds + seconds_since(t0);
    ck.require(secs < 120.0, "runtime " + std::to_string(secs) + "s exceeds 2 min");
}

void c4_ablation_trends(Checker& ck) {
    auto& run = big_run();
    auto diag_for = [&](mining::Strategy strategy) {
        mining::MiningConfig cfg = run.config;
        cfg.strategy = strategy;
        auto pairs = mining::select_pairs_from_pool(run.pools, cfg);
        return std::pair(eval::mining_diagnostics(pairs), pairs.size());
    };
    auto [full, n_full] = diag_for(mining::Strategy::Full);
    auto [random_diag, n_random] = diag_for(mining::Strategy::Random);
    auto [no_hcns, n_no_hcns] = diag_for(mining::Strategy::NoHCNS);
    auto [no_lc, n_no_lc] = diag_for(mining::Strategy::NoLengthCoverage);

    ck.require(full.delta_b >= 2.0,
               "delta_B(Full) " + std::to_string(full.delta_b) + " below 2.0");
    ck.require(std::abs(random_diag.delta_b) <= 0.5,
               "|delta_B(Random)| " + std::to_string(random_diag.delta_b) + " above 0.5");
    ck.require(no_lc.delta_chars < 0.0,
               "delta_chars(NoLengthCoverage) " + std::to_string(no_lc.delta_chars) +
                   " not negative");
    ck.require(no_lc.delta_b >= 2.0,
               "delta_B(NoLengthCoverage) " + std::to_string(no_lc.delta_b) + " below 2.0");
    ck.require(no_hcns.mean_b_chosen > full.mean_b_chosen,
               "NoHCNS mean_B_chosen " + std::to_string(no_hcns.mean_b_chosen) +
                   " not above Full " + std::to_string(full.mean_b_chosen));
    ck.require(n_full > 0 && n_random > 0 && n_no_hcns > 0 && n_no_lc > 0,
               "a strategy produced zero pairs");
}

void c5_stability_trends(Checker& ck) {
    auto& run = big_run();
    const double deltas[] = {0.6, 0.8, 1.0};
    const double biases[] = {-0.54, -0.34, -0.14};
    auto rows = eval::stability_sweep(run.pools, run.config, deltas, biases);
    ck.require(rows.size() == 6, "expected 6 grid rows");
    int lo = INT32_MAX, hi = 0;
    for (const auto& row : rows) {
        lo = std::min(lo, row.n_pairs);
        hi = std::max(hi, row.n_pairs);
        ck.require(row.report.delta_b >= 2.0,
                   row.setting + ": delta_B " + std::to_string(row.report.delta_b) +
                       " below 2.0");
    }
    ck.require(hi > 0, "no pairs at any grid point");
    const double spread = static_cast<double>(hi - lo) / static_cast<double>(hi);
    ck.require(spread <= 0.10,
               "pair counts vary by " + std::to_string(100.0 * spread) + "% (> 10%)");
}

void c6_calibration_law(Checker& ck) {
    SplitMix64 rng(606);
    std::vector<verifier::LabeledLogits> dev;
    for (int i = 0; i < 500; ++i) {
        dev.push_back({{rng.uniform_real(-3, 3), rng.uniform_real(-3, 3),
                        rng.uniform_real(-3, 3)},
                       static_cast<verifier::Verdict>(rng.uniform_int(0, 2))});
    }
    const auto grid = verifier::make_grid(-0.8, 1.6, 0.05);
    long prev_pred_b = -1, prev_recall_num = -1;
    for (double b : grid) {
        long pred_b = 0, recall_num = 0;
        for (const auto& d : dev) {
            if (verifier::decode(d.logits, b).verdict == verifier::Verdict::NotSupported) {
                ++pred_b;
                if (d.truth == verifier::Verdict::NotSupported) ++recall_num;
            }
        }
        ck.require(pred_b >= prev_pred_b, "predicted-B count decreased along the grid");
        ck.require(recall_num >= prev_recall_num, "Recall_NS decreased along the grid");
        prev_pred_b = pred_b;
        prev_recall_num = recall_num;
    }

    // Independent argmax of macro-F1 with the smallest-bias tie rule.
    auto sweep = verifier::sweep_bias(dev, grid, 0.0);
    double best_macro = -1.0, best_bias = 0.0;
    std::vector<std::pair<verifier::Verdict, verifier::Verdict>> pairs(dev.size());
    for (double b : grid) {
        for (std::size_t i = 0; i < dev.size(); ++i) {
            pairs[i] = {dev[i].truth, verifier::decode(dev[i].logits, b).verdict};
        }
        const double macro = verifier::compute_metrics(pairs).macro_f1;
        if (macro > best_macro) {
            best_macro = macro;
            best_bias = b;
        }
    }
    ck.require(sweep.best_bias == best_bias,
               "sweep_bias(lambda=0) bias " + std::to_string(sweep.best_bias) +
                   " != argmax macro-F1 " + std::to_string(best_bias));
}

void c7_dpo_numerics(Checker& ck) {
    dpo::PairLogProbs zero{0, 0, 0, 0};
    ck.require(std::abs(dpo::dpo_loss(std::vector{zero}, 0.1) - std::log(2.0)) < 1e-12,
               "dpo_loss(s=0) differs from ln 2 by more than 1e-12");

    SplitMix64 rng(707);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n_prompts = 1 + static_cast<std::size_t>(rng.uniform_int(0, 2));
        dpo::ToyPolicy policy;
        policy.params.resize(n_prompts);
        for (auto& row : policy.params) {
            row.resize(3 + static_cast<std::size_t>(rng.uniform_int(0, 4)));
            for (auto& v : row) v = rng.uniform_real(-1.5, 1.5);
        }
        dpo::ToyPolicy reference = policy;
        for (auto& row : reference.params) {
            for (auto& v : row) v += rng.uniform_real(-0.5, 0.5);
        }
        std::vector<dpo::ToyPair> pairs;
        const int n_pairs = 4 + static_cast<int>(rng.uniform_int(0, 8));
        for (int i = 0; i < n_pairs; ++i) {
            const auto p = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(n_prompts) - 1));
            const auto vocab = policy.params[p].size();
            auto pos = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(vocab) - 1));
            auto neg = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(vocab) - 2));
            if (neg >= pos) ++neg;
            pairs.push_back({p, pos, neg});
        }
        const double beta = 0.05 + 0.4 * rng.u01();

        auto grad = dpo::dpo_grad(pairs, beta, policy, reference);
        auto loss_at = [&](const dpo::ToyPolicy& pol) {
            std::vector<dpo::PairLogProbs> batch;
            for (const auto& pr : pairs) {
                batch.push_back(dpo::pair_log_probs(pol, reference, pr));
            }
            return dpo::dpo_loss(batch, beta);
        };
        const double h = 1e-5;
        double diff_sq = 0.0, fd_sq = 0.0;
        for (std::size_t p = 0; p < policy.params.size(); ++p) {
            for (std::size_t k = 0; k < policy.params[p].size(); ++k) {
                auto up = policy, down = policy;
                up.params[p][k] += h;
                down.params[p][k] -= h;
                const double fd = (loss_at(up) - loss_at(down)) / (2 * h);
                diff_sq += (fd - grad[p][k]) * (fd - grad[p][k]);
                fd_sq += fd * fd;
            }
        }
        ck.require(std::sqrt(diff_sq) / std::max(std::sqrt(fd_sq), 1e-12) < 1e-6,
                   "gradient vs finite differences above 1e-6 relative");

        for (const auto& pr : pairs) {
            const double s = dpo::dpo_score(dpo::pair_log_probs(policy, policy, pr), beta);
            ck.require(s == 0.0, "s != 0 with policy == reference");
        }
    }
}

void c8_dpo_dynamics(Checker& ck) {
    SplitMix64 rng(808);
    const std::size_t n_prompts = 10;
    std::vector<std::size_t> vocab(n_prompts, 5);
    std::vector<dpo::ToyPair> pairs;
    while (pairs.size() < 50) {
        auto prompt = static_cast<std::size_t>(rng.uniform_int(0, n_prompts - 1));
        auto a = static_cast<std::size_t>(rng.uniform_int(0, 4));
        auto b = static_cast<std::size_t>(rng.uniform_int(0, 4));
        if (a == b) continue;
        pairs.push_back({prompt, std::min(a, b), std::max(a, b)});
    }
    dpo::DpoTrainConfig cfg;
    cfg.beta = 0.1;
    cfg.steps = 500;
    cfg.learning_rate = 0.5;
    auto r1 = dpo::train_toy_dpo(pairs, vocab, cfg);
    ck.require(r1.final_mean_margin > 0.0, "mean margin not positive after 500 steps");
    ck.require(r1.frac_positive_margin >= 0.95,
               "positive-margin fraction " + std::to_string(r1.frac_positive_margin) +
                   " below 0.95");
    auto r2 = dpo::train_toy_dpo(pairs, vocab, cfg);
    ck.require(r1.policy.params == r2.policy.params, "training not deterministic");
    ck.require(r1.trace.size() == r2.trace.size(), "trace length differs");
    for (std::size_t i = 0; i < r1.trace.size(); ++i) {
        ck.require(r1.trace[i].loss == r2.trace[i].loss, "trace loss differs across reruns");
    }
}

void c9_best_of_k_trend(Checker& ck) {
    auto world = std::make_shared<const synth::SyntheticWorld>(synth::gen_world(10, 20, 909));
    std::vector<corpus::Note> notes;
    for (const auto& s : world->subjects) {
        notes.insert(notes.end(), s.notes.begin(), s.notes.end());
    }
    auto corpora = mining::build_subject_corpora(notes, {});
    synth::OracleVerifier oracle(world, 0.1, 911);  // noisy judge
    synth::SynthGenerator generator(world, {});
    mining::MiningConfig cfg;
    cfg.seed = 90909;
    cfg.window.prompts_per_subject = 12;
    cfg.recall_prefilter = false;
    auto pools = mining::build_pool(corpora, generator, oracle, cfg);
    ck.require(pools.size() >= 100, "need >= 100 prompts for the trend check");

    std::vector<mining::SummaryStats> base, selected;
    for (const auto& pool : pools) {
        std::vector<mining::SummaryStats> stats;
        for (const auto& c : pool.candidates) {
            stats.push_back(mining::summarize(c, cfg.scoring.bias_prec, cfg.scoring.delta));
        }
        if (stats.empty()) continue;
        base.push_back(stats.front());  // single-sample baseline
        selected.push_back(stats[dpo::best_of_k(stats, cfg.weights)]);
    }
    eval::ValidityConfig validity;
    auto base_agg = eval::aggregate_run(base, validity);
    auto sel_agg = eval::aggregate_run(selected, validity);
    ck.require(base_agg.ns_rate_micro.has_value() && sel_agg.ns_rate_micro.has_value(),
               "NS-rate undefined");
    ck.require(*sel_agg.ns_rate_micro <= *base_agg.ns_rate_micro,
               "Best-of-8 NS-rate " + std::to_string(*sel_agg.ns_rate_micro) +
                   " above base " + std::to_string(*base_agg.ns_rate_micro));
    ck.require(sel_agg.valid_frac >= base_agg.valid_frac, "Best-of-8 validity below base");
}

void c10_exact_counts(Checker& ck) {
    auto& run = big_run();
    synth::OracleVerifier oracle(run.world, 0.0, 5150);
    mining::ScoringConfig sc;
    synth::CorruptionSpec spec;
    spec.candidates_per_prompt = 8;
    long candidates_checked = 0, mismatches = 0;
    std::uint64_t seed = 101010;
    for (std::size_t s = 0; candidates_checked < 1000; s = (s + 1) % run.corpora.size()) {
        auto cands = synth::gen_candidates(*run.world, run.corpora[s].subject_id, spec, seed++);
        for (const auto& cand : cands) {
            if (candidates_checked >= 1000) break;
            auto stats = mining::score_candidate(cand.text, run.corpora[s], oracle, sc);
            if (stats.n_b != cand.n_planted_b) ++mismatches;
            ++candidates_checked;
        }
    }
    ck.require(candidates_checked == 1000, "expected 1000 candidates");
    ck.require(mismatches == 0,
               std::to_string(mismatches) + " of 1000 candidates had n_B != planted count");
}

void c11_validity_fixtures(Checker& ck) {
    eval::ValidityConfig vc;
    mining::SummaryStats s;
    s.n_a = 10;
    s.n_used = 10;
    s.chars = 1000;
    s.n_claims_valid = 10;
    s.dup_frac = 0.30;
    auto r = eval::validity_check(s, vc);
    ck.require(!r.strict_valid, "dup 0.30 should be strict-invalid");
    ck.require(r.relaxed_valid, "dup 0.30 should be relaxed-valid");

    eval::SelectionGate gate;
    eval::RunAggregates base;
    base.n_prompts = 48;
    base.valid_frac = 0.85;
    base.mean_chars = 1800.0;
    base.mean_claims = 17.5;

    eval::RunAggregates pass_run = base;
    pass_run.valid_frac = 0.90;
    pass_run.mean_chars = 2000.0;
    pass_run.mean_claims = 18.9;
    ck.require(eval::degeneration_gate(pass_run, base, gate).pass, "pass fixture failed");

    eval::RunAggregates low_valid = pass_run;
    low_valid.valid_frac = 0.70;
    ck.require(!eval::degeneration_gate(low_valid, base, gate).pass,
               "valid-fraction fixture passed unexpectedly");

    eval::RunAggregates short_chars = pass_run;
    short_chars.mean_chars = 1700.0;
    ck.require(!eval::degeneration_gate(short_chars, base, gate).pass,
               "char-ratio fixture passed unexpectedly");
}

void c12_pipeline_determinism(Checker& ck) {
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const auto root = fs::temp_directory_path() / "veridpo_acceptance_det";
    fs::remove_all(root);
    fs::create_directories(root);
    const auto cfg_path = (root / "config.json").string();
    std::ofstream(cfg_path) << R"({"world":{"n_subjects":3,"notes_per_subject":10},)"
                            << R"("mining":{"prompts_per_subject":8},"master_seed":99})";

    for (const char* name : {"a", "b"}) {
        const auto out = (root / name).string();
        for (const auto* step : {"synth-world", "mine", "diagnose"}) {
            const int rc = cli::run({step, "--config", cfg_path, "--out", out});
            ck.require(rc == 0, std::string(step) + " failed in " + name);
        }
    }
    for (const char* artifact : {"pairs.jsonl", "mining_summary.json", "diagnostics.json"}) {
        const auto a = slurp(root / "a" / artifact);
        const auto b = slurp(root / "b" / artifact);
        ck.require(!a.empty(), std::string(artifact) + " is empty");
        ck.require(a == b, std::string(artifact) + " differs between identical runs");
    }
    fs::remove_all(root);
}

}  // namespace

int main() {
    std::vector<Criterion> criteria = {
        {1, "bm25-brute-force-equivalence", c1_bm25_oracle},
        {2, "utility-closed-form-bit-exact", c2_utility_bitexact},
        {3, "pair-constraint-soundness", c3_pair_constraints},
        {4, "ablation-trend-reproduction", c4_ablation_trends},
        {5, "stability-trend-reproduction", c5_stability_trends},
        {6, "bias-calibration-monotonicity", c6_calibration_law},
        {7, "dpo-numerics", c7_dpo_numerics},
        {8, "dpo-training-dynamics", c8_dpo_dynamics},
        {9, "best-of-k-trend", c9_best_of_k_trend},
        {10, "oracle-exact-contradiction-counts", c10_exact_counts},
        {11, "validity-and-degeneration-fixtures", c11_validity_fixtures},
        {12, "pipeline-byte-determinism", c12_pipeline_determinism},
    };

    int failed = 0;
    for (auto& c : criteria) {
        Checker ck;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.fn(ck);
        } catch (const std::exception& e) {
            ck.failures.push_back(std::string("exception: ") + e.what());
        }
        const double secs = seconds_since(t0);
        if (ck.failures.empty()) {
            std::printf("PASS  %2d  %-38s (%.2fs)\n", c.id, c.name.c_str(), secs);
        } else {
            ++failed;
            std::printf("FAIL  %2d  %-38s (%.2fs)\n", c.id, c.name.c_str(), secs);
            for (const auto& f : ck.failures) {
                std::printf("          - %s\n", f.c_str());
            }
        }
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
                criteria.size());
    return failed == 0 ? 0 : 1;
}
