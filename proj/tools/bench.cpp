// Benchmark comparing the serial reference implementations against the
// OpenMP-parallel kernels: batch two-stage retrieval, candidate-pool
// scoring, and DPO batch loss/gradient. Also asserts serial/parallel
// output equality on the fly.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "veridpo/dpo.hpp"
#include "veridpo/mining.hpp"
#include "veridpo/parallel.hpp"
#include "veridpo/retrieval.hpp"
#include "veridpo/rng.hpp"
#include "veridpo/synth.hpp"

using namespace veridpo;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

template <typename Fn>
double time_ms(Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return ms_since(t0);
}

void report(const char* name, double serial_ms, double parallel_ms, bool equal) {
    std::printf("%-28s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx   equal %s\n",
                name, serial_ms, parallel_ms,
                parallel_ms > 0 ? serial_ms / parallel_ms : 0.0, equal ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
    int n_subjects = 8;
    int notes_per_subject = 16;
    if (argc > 1) n_subjects = std::atoi(argv[1]);
    if (argc > 2) notes_per_subject = std::atoi(argv[2]);
    std::printf("threads available: %d\n", max_threads());

    synth::WorldConfig wc;
    wc.n_subjects = n_subjects;
    wc.notes_per_subject = notes_per_subject;
    wc.seed = 17;
    auto world = std::make_shared<const synth::SyntheticWorld>(synth::gen_world(wc));

    std::vector<corpus::Note> notes;
    for (const auto& s : world->subjects) {
        notes.insert(notes.end(), s.notes.begin(), s.notes.end());
    }
    auto corpora = mining::build_subject_corpora(notes, {}, ExecMode::Serial);

    // Batch retrieval over every planted claim of the first subject.
    {
        const auto& sc = corpora.front();
        std::vector<std::string> queries;
        for (const auto& subj : world->subjects) {
            if (subj.subject_id != sc.subject_id) continue;
            for (const auto& f : subj.facts) {
                queries.push_back(f.claim_true);
                queries.push_back(f.claim_false);
            }
        }
        retrieval::RetrievalParams params;
        std::vector<std::vector<retrieval::RetrievalHit>> serial_out, parallel_out;
        const double t_serial = time_ms([&] {
            serial_out = retrieval::retrieve_batch(queries, sc.note_index, sc.unit_index,
                                                   sc.units, params, ExecMode::Serial);
        });
        const double t_parallel = time_ms([&] {
            parallel_out = retrieval::retrieve_batch(queries, sc.note_index, sc.unit_index,
                                                     sc.units, params, ExecMode::Parallel);
        });
        bool equal = serial_out.size() == parallel_out.size();
        for (std::size_t i = 0; equal && i < serial_out.size(); ++i) {
            equal = serial_out[i].size() == parallel_out[i].size();
            for (std::size_t j = 0; equal && j < serial_out[i].size(); ++j) {
                equal = serial_out[i][j].unit_id == parallel_out[i][j].unit_id &&
                        serial_out[i][j].score == parallel_out[i][j].score;
            }
        }
        report("two-stage retrieval batch", t_serial, t_parallel, equal);
    }

    // Candidate pool scoring across prompts.
    {
        synth::CorruptionSpec spec;
        synth::SynthGenerator generator(world, spec);
        synth::OracleVerifier oracle(world, 0.0, 99);
        mining::MiningConfig mc;
        mc.seed = 4242;
        std::vector<mining::PromptPool> serial_pool, parallel_pool;
        const double t_serial = time_ms([&] {
            serial_pool = mining::build_pool(corpora, generator, oracle, mc, ExecMode::Serial);
        });
        const double t_parallel = time_ms([&] {
            parallel_pool = mining::build_pool(corpora, generator, oracle, mc,
                                               ExecMode::Parallel);
        });
        bool equal = serial_pool.size() == parallel_pool.size();
        for (std::size_t i = 0; equal && i < serial_pool.size(); ++i) {
            equal = serial_pool[i].window.prompt_id() == parallel_pool[i].window.prompt_id() &&
                    serial_pool[i].candidates.size() == parallel_pool[i].candidates.size();
        }
        report("candidate pool scoring", t_serial, t_parallel, equal);
    }

    // DPO batch loss + gradient.
    {
        const std::size_t n_prompts = 400;
        const std::size_t vocab = 16;
        SplitMix64 rng(5);
        dpo::ToyPolicy policy;
        policy.params.assign(n_prompts, std::vector<double>(vocab, 0.0));
        for (auto& row : policy.params) {
            for (auto& v : row) v = rng.uniform_real(-1.0, 1.0);
        }
        dpo::ToyPolicy reference = policy;
        for (auto& row : reference.params) {
            for (auto& v : row) v += rng.uniform_real(-0.1, 0.1);
        }
        std::vector<dpo::ToyPair> pairs;
        for (std::size_t p = 0; p < n_prompts; ++p) {
            for (int r = 0; r < 40; ++r) {
                auto a = static_cast<std::size_t>(rng.uniform_int(0, vocab - 1));
                auto b = static_cast<std::size_t>(rng.uniform_int(0, vocab - 2));
                if (b >= a) ++b;
                pairs.push_back({p, a, b});
            }
        }
        std::vector<std::vector<double>> g_serial, g_parallel;
        const double t_serial = time_ms([&] {
            g_serial = dpo::dpo_grad(pairs, 0.1, policy, reference, ExecMode::Serial);
        });
        const double t_parallel = time_ms([&] {
            g_parallel = dpo::dpo_grad(pairs, 0.1, policy, reference, ExecMode::Parallel);
        });
        bool equal = g_serial == g_parallel;  // bitwise: ordered reduction
        report("dpo batch gradient", t_serial, t_parallel, equal);
    }
    return 0;
}
