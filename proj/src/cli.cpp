#include "veridpo/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "veridpo/config.hpp"
#include "veridpo/dpo.hpp"
#include "veridpo/eval.hpp"
#include "veridpo/jsonl.hpp"
#include "veridpo/remote.hpp"
#include "veridpo/rng.hpp"
#include "veridpo/util.hpp"

namespace veridpo::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;
using config::PipelineConfig;

namespace {

struct RunContext {
    PipelineConfig cfg;
    std::string config_hash;
    std::string out_dir;
    ExecMode mode = ExecMode::Parallel;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
    std::map<std::string, std::string> input_hashes;
    std::vector<std::string> outputs;

    std::string out_path(const std::string& name) const {
        return (fs::path(out_dir) / name).string();
    }
    void note_input(const std::string& path) { input_hashes[path] = config::file_hash(path); }
    void note_output(const std::string& path) { outputs.push_back(path); }

    void finish(const std::string& command) {
        config::Manifest m;
        m.command = command;
        m.config_hash = config_hash;
        m.seed = cfg.master_seed;
        m.input_hashes = input_hashes;
        m.outputs = outputs;
        m.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - started)
                        .count();
        config::write_manifest(m, out_path(command + "_manifest.json"));
    }
};

std::shared_ptr<const synth::SyntheticWorld> load_world_checked(RunContext& ctx) {
    config::require_inputs({ctx.cfg.paths.world});
    ctx.note_input(ctx.cfg.paths.world);
    return std::make_shared<const synth::SyntheticWorld>(synth::load_world(ctx.cfg.paths.world));
}

std::unique_ptr<verifier::VerifierClient> make_verifier(
    const RunContext& ctx, std::shared_ptr<const synth::SyntheticWorld> world) {
    const auto& sel = ctx.cfg.verifier;
    if (sel.kind == "oracle") {
        if (!world) throw std::runtime_error("oracle verifier needs a synthetic world");
        return std::make_unique<synth::OracleVerifier>(
            std::move(world), sel.oracle_noise, derive_seed(ctx.cfg.master_seed, 0x0AC1E));
    }
    if (sel.kind == "remote") {
        verifier::RemoteScorerConfig rc;
        const char* env_url = std::getenv("VERIDPO_REMOTE_URL");
        rc.base_url = env_url != nullptr ? env_url : sel.remote_url;
        rc.timeout_ms = sel.remote_timeout_ms;
        rc.max_retries = sel.remote_max_retries;
        return std::make_unique<verifier::RemoteScorer>(rc);
    }
    if (sel.kind == "lexical") {
        return std::make_unique<verifier::LexicalOracle>();
    }
    if (sel.kind == "toy") {
        // Trained on the spot from the world's labeled propositions.
        if (!world) throw std::runtime_error("toy verifier needs a synthetic world");
        std::vector<verifier::VerifierInstance> instances;
        for (const auto& s : world->subjects) {
            for (const auto& f : s.facts) {
                instances.push_back({f.claim_true, {f.note_line}, verifier::Verdict::Supported});
                instances.push_back({f.claim_false, {f.note_line}, verifier::Verdict::NotSupported});
            }
            for (const auto& f : s.distractors) {
                instances.push_back({f.claim_true, {}, verifier::Verdict::NotAddressed});
            }
        }
        verifier::VerifierLossConfig loss;
        verifier::ToyTrainConfig train;
        train.steps = 200;
        return std::make_unique<verifier::ToyLinearVerifier>(
            verifier::train_toy_verifier(instances, loss, train));
    }
    throw std::runtime_error("unknown verifier kind '" + sel.kind + "'");
}

std::vector<mining::SubjectCorpus> corpora_from_world(const synth::SyntheticWorld& world,
                                                      const RunContext& ctx) {
    std::vector<corpus::Note> notes;
    for (const auto& s : world.subjects) {
        notes.insert(notes.end(), s.notes.begin(), s.notes.end());
    }
    if (!ctx.cfg.paths.exclusions.empty() && fs::exists(ctx.cfg.paths.exclusions)) {
        notes = corpus::exclude_provenance(notes, corpus::load_exclusions(ctx.cfg.paths.exclusions));
    }
    return mining::build_subject_corpora(notes, ctx.cfg.segmentation, ctx.mode);
}

mining::MiningConfig effective_mining_config(const RunContext& ctx) {
    mining::MiningConfig mc = ctx.cfg.mining;
    mc.scoring.filter = ctx.cfg.filter;
    mc.scoring.retrieval = ctx.cfg.retrieval;
    mc.segmentation = ctx.cfg.segmentation;
    mc.seed = derive_seed(ctx.cfg.master_seed, 0x317E);
    mc.config_hash = ctx.config_hash;
    return mc;
}

std::vector<double> parse_grid(const std::string& spec) {
    // "lo:hi:step"
    const auto c1 = spec.find(':');
    const auto c2 = spec.find(':', c1 == std::string::npos ? 0 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
        throw std::runtime_error("grid must be lo:hi:step, got '" + spec + "'");
    }
    return verifier::make_grid(std::stod(spec.substr(0, c1)),
                               std::stod(spec.substr(c1 + 1, c2 - c1 - 1)),
                               std::stod(spec.substr(c2 + 1)));
}

std::vector<double> parse_list(const std::string& spec) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        auto comma = spec.find(',', pos);
        const std::string tok =
            comma == std::string::npos ? spec.substr(pos) : spec.substr(pos, comma - pos);
        if (!trim(tok).empty()) out.push_back(std::stod(trim(tok)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

json stats_record(const mining::SummaryStats& s) {
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

mining::SummaryStats stats_from_record(const json& j) {
    mining::SummaryStats s;
    s.n_a = j.at("n_a").get<int>();
    s.n_b = j.at("n_b").get<int>();
    s.n_c = j.at("n_c").get<int>();
    s.n_used = j.at("n_used").get<int>();
    s.n_hcns = j.value("n_hcns", 0);
    s.dup_frac = j.value("dup_frac", 0.0);
    s.meta_hits = j.value("meta_hits", 0);
    s.chars = j.value("chars", 0);
    s.n_claims_segmented = j.value("n_claims_segmented", 0);
    s.n_claims_valid = j.value("n_claims_valid", 0);
    s.n_skipped = j.value("n_skipped", 0);
    return s;
}

json aggregates_json(const eval::RunAggregates& a) {
    json j{{"n_prompts", a.n_prompts},
           {"valid_frac", a.valid_frac},
           {"mean_chars", a.mean_chars},
           {"mean_claims", a.mean_claims},
           {"mean_n_b", a.mean_n_b}};
    j["ns_rate_micro"] = a.ns_rate_micro ? json(*a.ns_rate_micro) : json(nullptr);
    j["ns_rate_macro"] = a.ns_rate_macro ? json(*a.ns_rate_macro) : json(nullptr);
    return j;
}

// ---------------------------------------------------------------- commands

int cmd_synth_world(RunContext& ctx) {
    synth::WorldConfig wc = ctx.cfg.world;
    wc.seed = derive_seed(ctx.cfg.master_seed, 0x5EED);
    auto world = synth::gen_world(wc);

    const auto world_path = ctx.out_path("world.json");
    synth::save_world(world, world_path);
    ctx.note_output(world_path);

    const auto notes_path = ctx.out_path("notes.jsonl");
    synth::export_notes_jsonl(world, notes_path, ctx.config_hash);
    ctx.note_output(notes_path);

    const auto excl_path = ctx.out_path("exclusions.txt");
    std::ofstream(excl_path, std::ios::binary);  // empty by default
    ctx.note_output(excl_path);

    const auto props_path = ctx.out_path("propositions.jsonl");
    {
        jsonl::Writer writer(props_path);
        writer.header("veridpo.propositions.v1", ctx.config_hash);
        int pid = 0;
        for (const auto& s : world.subjects) {
            auto emit = [&](const std::string& claim, char label) {
                writer.write(json{{"proposition_id", "p" + std::to_string(pid++)},
                                  {"subject_id", s.subject_id},
                                  {"hadm_id", ""},
                                  {"claim", claim},
                                  {"label", std::string(1, label)}});
            };
            for (const auto& f : s.facts) {
                emit(f.claim_true, 'A');
                emit(f.claim_false, 'B');
            }
            for (const auto& f : s.distractors) emit(f.claim_true, 'C');
        }
    }
    ctx.note_output(props_path);

    std::cout << "world: " << world.subjects.size() << " subjects, "
              << world.truth.size() << " planted claim keys\n";
    ctx.finish("synth-world");
    return 0;
}

int cmd_ingest(RunContext& ctx) {
    config::require_inputs({ctx.cfg.paths.corpus});
    ctx.note_input(ctx.cfg.paths.corpus);
    auto result = corpus::ingest_notes_file(ctx.cfg.paths.corpus);
    for (const auto& e : result.errors) {
        std::cerr << "ingest: " << e.message << "\n";
    }
    if (!ctx.cfg.paths.exclusions.empty()) {
        config::require_inputs({ctx.cfg.paths.exclusions});
        ctx.note_input(ctx.cfg.paths.exclusions);
        const auto exclusions = corpus::load_exclusions(ctx.cfg.paths.exclusions);
        result.notes = corpus::exclude_provenance(result.notes, exclusions);
    }
    const auto out = ctx.out_path("corpus.jsonl");
    {
        jsonl::Writer writer(out);
        writer.header("veridpo.corpus.v1", ctx.config_hash);
        for (const auto& n : result.notes) {
            writer.write(json{{"note_id", n.note_id},
                              {"subject_id", n.subject_id},
                              {"admission_id", n.admission_id},
                              {"category", n.category},
                              {"chart_time", n.chart_time},
                              {"text", n.text}});
        }
    }
    ctx.note_output(out);
    std::cout << "ingested " << result.notes.size() << " notes ("
              << result.errors.size() << " malformed records skipped)\n";
    ctx.finish("ingest");
    return result.errors.empty() ? 0 : 1;
}

std::vector<corpus::Note> load_corpus_jsonl(const std::string& path) {
    std::vector<corpus::Note> notes;
    jsonl::for_each_strict(path, [&](std::size_t, const json& rec) {
        corpus::Note n;
        n.note_id = rec.at("note_id").get<std::string>();
        n.subject_id = rec.at("subject_id").get<std::string>();
        n.admission_id = rec.value("admission_id", "");
        n.category = rec.value("category", "");
        n.chart_time = rec.value("chart_time", static_cast<std::int64_t>(0));
        n.text = rec.at("text").get<std::string>();
        notes.push_back(std::move(n));
    });
    return notes;
}

int cmd_index(RunContext& ctx) {
    const auto corpus_path = ctx.out_path("corpus.jsonl");
    config::require_inputs({corpus_path});
    ctx.note_input(corpus_path);
    auto notes = load_corpus_jsonl(corpus_path);
    auto corpora = mining::build_subject_corpora(notes, ctx.cfg.segmentation, ctx.mode);

    const auto index_dir = ctx.out_path("index");
    fs::create_directories(index_dir);
    const auto units_path = ctx.out_path("units.jsonl");
    jsonl::Writer units_writer(units_path);
    units_writer.header("veridpo.units.v1", ctx.config_hash);
    std::size_t n_units = 0;
    for (const auto& sc : corpora) {
        for (const auto& u : sc.units) {
            units_writer.write(json{{"unit_id", u.unit_id},
                                    {"note_id", u.note_id},
                                    {"subject_id", u.subject_id},
                                    {"span_index", u.span_index},
                                    {"text", u.text},
                                    {"char_len", u.char_len},
                                    {"time", u.time}});
            ++n_units;
        }
        const auto note_idx = (fs::path(index_dir) / (sc.subject_id + ".note.idx")).string();
        const auto unit_idx = (fs::path(index_dir) / (sc.subject_id + ".unit.idx")).string();
        retrieval::save_index(sc.note_index, note_idx);
        retrieval::save_index(sc.unit_index, unit_idx);
        ctx.note_output(note_idx);
        ctx.note_output(unit_idx);
    }
    ctx.note_output(units_path);
    std::cout << "indexed " << corpora.size() << " subjects, " << n_units << " units\n";
    ctx.finish("index");
    return 0;
}

std::vector<corpus::EvidenceUnit> units_from_index(const retrieval::InvertedIndex& idx,
                                                   const std::string& subject_id) {
    std::vector<corpus::EvidenceUnit> units;
    units.reserve(idx.docs.size());
    for (const auto& d : idx.docs) {
        corpus::EvidenceUnit u;
        u.unit_id = d.id;
        u.note_id = d.note_id;
        u.subject_id = subject_id;
        u.text = d.text;
        u.char_len = static_cast<int>(d.text.size());
        u.time = d.time;
        units.push_back(std::move(u));
    }
    return units;
}

int cmd_retrieve(RunContext& ctx, const std::string& claims_path) {
    config::require_inputs({claims_path});
    ctx.note_input(claims_path);
    const auto index_dir = ctx.out_path("index");

    struct ClaimRec {
        std::string claim_id;
        std::string subject_id;
        std::string text;
    };
    std::vector<ClaimRec> claims;
    jsonl::for_each_strict(claims_path, [&](std::size_t, const json& rec) {
        const std::string text = rec.contains("claim") ? rec["claim"].get<std::string>()
                                                       : rec.at("text").get<std::string>();
        claims.push_back({rec.value("proposition_id", rec.value("claim_id", "")),
                          rec.at("subject_id").get<std::string>(), text});
    });

    const auto trace_path = ctx.out_path("retrieval_trace.jsonl");
    jsonl::Writer writer(trace_path);
    writer.header("veridpo.retrieval_trace.v1", ctx.config_hash);

    std::map<std::string, std::vector<std::size_t>> by_subject;
    for (std::size_t i = 0; i < claims.size(); ++i) {
        by_subject[claims[i].subject_id].push_back(i);
    }
    for (const auto& [subject, idxs] : by_subject) {
        const auto note_path = (fs::path(index_dir) / (subject + ".note.idx")).string();
        const auto unit_path = (fs::path(index_dir) / (subject + ".unit.idx")).string();
        config::require_inputs({note_path, unit_path});
        const auto note_index = retrieval::load_index(note_path);
        const auto unit_index = retrieval::load_index(unit_path);
        const auto units = units_from_index(unit_index, subject);

        std::vector<std::string> texts;
        texts.reserve(idxs.size());
        for (auto i : idxs) texts.push_back(claims[i].text);
        auto results = retrieval::retrieve_batch(texts, note_index, unit_index, units,
                                                 ctx.cfg.retrieval, ctx.mode);
        for (std::size_t k = 0; k < idxs.size(); ++k) {
            for (const auto& hit : results[k]) {
                writer.write(json{{"claim_id", claims[idxs[k]].claim_id},
                                  {"unit_id", hit.unit_id},
                                  {"score", hit.score},
                                  {"rank", hit.rank}});
            }
        }
    }
    ctx.note_output(trace_path);
    std::cout << "retrieval trace for " << claims.size() << " claims\n";
    ctx.finish("retrieve");
    return 0;
}

int cmd_build_instances(RunContext& ctx, const std::string& props_path) {
    config::require_inputs({props_path});
    ctx.note_input(props_path);
    auto world = load_world_checked(ctx);
    auto corpora = corpora_from_world(*world, ctx);

    struct Prop {
        std::string proposition_id, subject_id, hadm_id, claim, label;
    };
    std::vector<Prop> props;
    jsonl::for_each_strict(props_path, [&](std::size_t, const json& rec) {
        props.push_back({rec.at("proposition_id").get<std::string>(),
                         rec.at("subject_id").get<std::string>(),
                         rec.value("hadm_id", ""), rec.at("claim").get<std::string>(),
                         rec.at("label").get<std::string>()});
    });

    std::map<std::string, const mining::SubjectCorpus*> by_subject;
    for (const auto& sc : corpora) by_subject[sc.subject_id] = &sc;

    const auto out = ctx.out_path("instances.jsonl");
    jsonl::Writer writer(out);
    writer.header("veridpo.instances.v1", ctx.config_hash);
    retrieval::RetrievalParams rp = ctx.cfg.retrieval;
    std::size_t written = 0;
    for (const auto& p : props) {
        auto it = by_subject.find(p.subject_id);
        if (it == by_subject.end()) continue;
        const auto& sc = *it->second;
        auto hits = retrieval::retrieve_two_stage(p.claim, sc.note_index, sc.unit_index,
                                                  sc.units, rp);
        auto packed = retrieval::pack_evidence(hits, sc.units, sc.unit_index, 1600, 0.0,
                                               0, 64);
        json evidence = json::array();
        json evidence_meta = json::array();
        for (const auto& item : packed.items) {
            evidence.push_back(item.text);
            evidence_meta.push_back(json{{"unit_id", item.unit_id},
                                         {"score", item.score},
                                         {"time", item.time}});
        }
        json retrieval_trace = json::array();
        for (const auto& h : hits) {
            retrieval_trace.push_back(json{{"unit_id", h.unit_id},
                                           {"score", h.score},
                                           {"rank", h.rank}});
        }
        writer.write(json{{"proposition_id", p.proposition_id},
                          {"subject_id", p.subject_id},
                          {"hadm_id", p.hadm_id},
                          {"claim", p.claim},
                          {"label", p.label},
                          {"evidence", evidence},
                          {"evidence_meta", evidence_meta},
                          {"retrieval", retrieval_trace}});
        ++written;
    }
    ctx.note_output(out);
    std::cout << "built " << written << " instances\n";
    ctx.finish("build-instances");
    return 0;
}

// Dev-set labeled logits from the world's propositions under the configured
// verifier (evidence retrieved so non-oracle scorers see real inputs).
std::vector<verifier::LabeledLogits> build_dev_logits(RunContext& ctx, std::size_t max_instances) {
    auto world = load_world_checked(ctx);
    auto corpora = corpora_from_world(*world, ctx);
    auto client = make_verifier(ctx, world);

    std::map<std::string, const mining::SubjectCorpus*> by_subject;
    for (const auto& sc : corpora) by_subject[sc.subject_id] = &sc;

    std::vector<verifier::LabeledLogits> dev;
    for (const auto& s : world->subjects) {
        const auto* sc = by_subject.at(s.subject_id);
        auto score_one = [&](const std::string& claim, verifier::Verdict truth) {
            if (dev.size() >= max_instances) return;
            auto hits = retrieval::retrieve_two_stage(claim, sc->note_index, sc->unit_index,
                                                      sc->units, ctx.cfg.retrieval);
            std::vector<std::string> evidence;
            for (const auto& h : hits) {
                int d = sc->unit_index.doc_index(h.unit_id);
                if (d >= 0) evidence.push_back(sc->units[static_cast<std::size_t>(d)].text);
            }
            dev.push_back({client->score(claim, evidence), truth});
        };
        for (const auto& f : s.facts) {
            score_one(f.claim_true, verifier::Verdict::Supported);
            score_one(f.claim_false, verifier::Verdict::NotSupported);
        }
        for (const auto& f : s.distractors) {
            score_one(f.claim_true, verifier::Verdict::NotAddressed);
        }
    }
    return dev;
}

int cmd_calibrate(RunContext& ctx, const std::string& grid_spec, double lambda,
                  std::size_t max_instances) {
    auto dev = build_dev_logits(ctx, max_instances);
    auto grid = parse_grid(grid_spec);
    auto result = verifier::sweep_bias(dev, grid, lambda);

    json curve = json::array();
    for (const auto& pt : result.curve) {
        curve.push_back(json{{"bias", pt.bias},
                             {"j", pt.j},
                             {"macro_f1", pt.macro_f1},
                             {"recall_ns", pt.recall_ns}});
    }
    json doc{{"config_hash", ctx.config_hash},
             {"lambda", lambda},
             {"best_bias", result.best_bias},
             {"n_instances", dev.size()},
             {"curve", curve}};
    const auto out = ctx.out_path("calibration.json");
    std::ofstream(out, std::ios::binary) << doc.dump(2) << '\n';
    ctx.note_output(out);
    std::cout << "best bias " << result.best_bias << " over " << grid.size()
              << " grid points (" << dev.size() << " dev instances)\n";
    ctx.finish("calibrate");
    return 0;
}

int cmd_mine(RunContext& ctx, bool dump_claims) {
    auto world = load_world_checked(ctx);
    auto corpora = corpora_from_world(*world, ctx);
    auto client = make_verifier(ctx, world);
    synth::CorruptionSpec spec = ctx.cfg.corruption;
    spec.candidates_per_prompt = ctx.cfg.mining.candidates_per_prompt;
    synth::SynthGenerator generator(world, spec);

    auto mc = effective_mining_config(ctx);
    auto result = mining::mine_split(corpora, generator, *client, mc, ctx.mode);
    for (const auto& pool : result.pools) {
        if (pool.failed) {
            std::cerr << "mine: prompt " << pool.window.prompt_id() << " skipped: "
                      << pool.failure << "\n";
        }
    }
    if (dump_claims) {
        const auto claims_path = ctx.out_path("claims.jsonl");
        mining::export_claims(result.pools, claims_path, ctx.config_hash);
        ctx.note_output(claims_path);
    }

    const auto pairs_path = ctx.out_path("pairs.jsonl");
    mining::save_pairs(result.pairs, pairs_path, ctx.config_hash);
    ctx.note_output(pairs_path);
    const auto summary_path = ctx.out_path("mining_summary.json");
    mining::save_mining_summary(result.summary, summary_path, ctx.config_hash);
    ctx.note_output(summary_path);

    std::cout << "mined " << result.summary.n_pairs << " pairs from "
              << result.summary.n_prompts << " prompts (strategy "
              << mining::strategy_name(mc.strategy) << ")\n"
              << "frac chosen fewer B: " << result.summary.frac_chosen_fewer_b
              << ", mean #B chosen/rejected: " << result.summary.mean_b_chosen << "/"
              << result.summary.mean_b_rejected
              << ", mean gap: " << result.summary.mean_utility_gap << "\n";
    ctx.finish("mine");
    return 0;
}

int cmd_diagnose(RunContext& ctx, const std::string& pairs_path) {
    config::require_inputs({pairs_path});
    ctx.note_input(pairs_path);
    auto pairs = mining::load_pairs(pairs_path);
    if (pairs.empty()) {
        std::cerr << "diagnose: no pairs in " << pairs_path << "\n";
        return 1;
    }
    auto report = eval::mining_diagnostics(pairs);
    json doc{{"config_hash", ctx.config_hash},
             {"n_pairs", report.n_pairs},
             {"mean_b_chosen", report.mean_b_chosen},
             {"mean_b_rejected", report.mean_b_rejected},
             {"delta_b", report.delta_b},
             {"delta_chars", report.delta_chars},
             {"delta_n_used", report.delta_n_used}};
    const auto out = ctx.out_path("diagnostics.json");
    std::ofstream(out, std::ios::binary) << doc.dump(2) << '\n';
    ctx.note_output(out);

    std::cout << eval::format_table(
        {{"#pairs", "#B_c", "#B_r", "dB", "dchars", "dn_used"},
         {std::to_string(report.n_pairs), std::to_string(report.mean_b_chosen),
          std::to_string(report.mean_b_rejected), std::to_string(report.delta_b),
          std::to_string(report.delta_chars), std::to_string(report.delta_n_used)}});
    ctx.finish("diagnose");
    return 0;
}

int cmd_stability(RunContext& ctx, const std::string& delta_list, const std::string& bias_list) {
    auto world = load_world_checked(ctx);
    auto corpora = corpora_from_world(*world, ctx);
    auto client = make_verifier(ctx, world);
    synth::CorruptionSpec spec = ctx.cfg.corruption;
    spec.candidates_per_prompt = ctx.cfg.mining.candidates_per_prompt;
    synth::SynthGenerator generator(world, spec);

    auto mc = effective_mining_config(ctx);
    auto pools = mining::build_pool(corpora, generator, *client, mc, ctx.mode);
    auto rows = eval::stability_sweep(pools, mc, parse_list(delta_list), parse_list(bias_list));

    json doc{{"config_hash", ctx.config_hash}, {"rows", json::array()}};
    std::vector<std::vector<std::string>> table{{"setting", "#pairs", "dB", "#B_c", "#B_r",
                                                 "dchars"}};
    for (const auto& row : rows) {
        doc["rows"].push_back(json{{"setting", row.setting},
                                   {"delta", row.delta},
                                   {"bias_prec", row.bias_prec},
                                   {"n_pairs", row.n_pairs},
                                   {"delta_b", row.report.delta_b},
                                   {"mean_b_chosen", row.report.mean_b_chosen},
                                   {"mean_b_rejected", row.report.mean_b_rejected},
                                   {"delta_chars", row.report.delta_chars}});
        table.push_back({row.setting, std::to_string(row.n_pairs),
                         std::to_string(row.report.delta_b),
                         std::to_string(row.report.mean_b_chosen),
                         std::to_string(row.report.mean_b_rejected),
                         std::to_string(row.report.delta_chars)});
    }
    const auto out = ctx.out_path("stability.json");
    std::ofstream(out, std::ios::binary) << doc.dump(2) << '\n';
    ctx.note_output(out);
    std::cout << eval::format_table(table);
    ctx.finish("stability");
    return 0;
}

int cmd_dpo_train_toy(RunContext& ctx, const std::string& pairs_path) {
    config::require_inputs({pairs_path});
    ctx.note_input(pairs_path);
    auto pairs = mining::load_pairs(pairs_path);
    if (pairs.empty()) {
        std::cerr << "dpo-train-toy: no pairs in " << pairs_path << "\n";
        return 1;
    }

    // One prompt per prompt_id; responses are the distinct candidate texts.
    std::map<std::string, std::size_t> prompt_index;
    std::vector<std::vector<std::string>> vocab;
    std::vector<dpo::ToyPair> toy_pairs;
    for (const auto& p : pairs) {
        auto [it, inserted] = prompt_index.try_emplace(p.prompt_id, vocab.size());
        if (inserted) vocab.emplace_back();
        auto& responses = vocab[it->second];
        auto find_or_add = [&](const std::string& textv) {
            for (std::size_t i = 0; i < responses.size(); ++i) {
                if (responses[i] == textv) return i;
            }
            responses.push_back(textv);
            return responses.size() - 1;
        };
        dpo::ToyPair tp;
        tp.prompt = it->second;
        tp.pos = find_or_add(p.chosen.text);
        tp.neg = find_or_add(p.rejected.text);
        toy_pairs.push_back(tp);
    }
    std::vector<std::size_t> vocab_sizes;
    vocab_sizes.reserve(vocab.size());
    for (const auto& v : vocab) vocab_sizes.push_back(v.size());

    dpo::DpoTrainConfig tc = ctx.cfg.dpo;
    tc.seed = derive_seed(ctx.cfg.master_seed, 0xD90);
    auto result = dpo::train_toy_dpo(toy_pairs, vocab_sizes, tc);

    const auto trace_path = ctx.out_path("dpo_trace.jsonl");
    {
        jsonl::Writer writer(trace_path);
        writer.header("veridpo.dpo_trace.v1", ctx.config_hash);
        for (const auto& row : result.trace) {
            writer.write(json{{"step", row.step},
                              {"loss", row.loss},
                              {"mean_margin", row.mean_margin}});
        }
    }
    ctx.note_output(trace_path);

    json doc{{"config_hash", ctx.config_hash},
             {"beta", tc.beta},
             {"steps", tc.steps},
             {"n_pairs", toy_pairs.size()},
             {"final_loss", result.final_loss},
             {"final_mean_margin", result.final_mean_margin},
             {"frac_positive_margin", result.frac_positive_margin}};
    const auto out = ctx.out_path("dpo_summary.json");
    std::ofstream(out, std::ios::binary) << doc.dump(2) << '\n';
    ctx.note_output(out);
    std::cout << "toy DPO: final loss " << result.final_loss << ", mean margin "
              << result.final_mean_margin << ", positive-margin fraction "
              << result.frac_positive_margin << "\n";
    ctx.finish("dpo-train-toy");
    return 0;
}

int cmd_best_of_k(RunContext& ctx, int k) {
    auto world = load_world_checked(ctx);
    auto corpora = corpora_from_world(*world, ctx);
    auto client = make_verifier(ctx, world);
    synth::CorruptionSpec spec = ctx.cfg.corruption;
    spec.candidates_per_prompt = k;
    synth::SynthGenerator generator(world, spec);

    auto mc = effective_mining_config(ctx);
    mc.candidates_per_prompt = k;
    mc.recall_prefilter = false;  // reranking scores every prompt
    auto pools = mining::build_pool(corpora, generator, *client, mc, ctx.mode);

    std::vector<mining::SummaryStats> base_stats, selected_stats;
    for (const auto& pool : pools) {
        if (pool.candidates.empty()) continue;
        std::vector<mining::SummaryStats> stats;
        stats.reserve(pool.candidates.size());
        for (const auto& c : pool.candidates) {
            stats.push_back(mining::summarize(c, mc.scoring.bias_prec, mc.scoring.delta,
                                              mc.scoring.delta_convention));
        }
        base_stats.push_back(stats.front());  // single-sample baseline
        selected_stats.push_back(stats[dpo::best_of_k(stats, mc.weights)]);
    }

    auto write_stats = [&](const std::string& name,
                           const std::vector<mining::SummaryStats>& stats) {
        const auto path = ctx.out_path(name);
        jsonl::Writer writer(path);
        writer.header("veridpo.candidate_stats.v1", ctx.config_hash);
        for (const auto& s : stats) writer.write(stats_record(s));
        ctx.note_output(path);
        return path;
    };
    write_stats("bok_base_stats.jsonl", base_stats);
    write_stats("bok_selected_stats.jsonl", selected_stats);

    const auto base_agg = eval::aggregate_run(base_stats, ctx.cfg.validity);
    const auto sel_agg = eval::aggregate_run(selected_stats, ctx.cfg.validity);
    json doc{{"config_hash", ctx.config_hash},
             {"k", k},
             {"base", aggregates_json(base_agg)},
             {"best_of_k", aggregates_json(sel_agg)}};
    const auto out = ctx.out_path("bok_report.json");
    std::ofstream(out, std::ios::binary) << doc.dump(2) << '\n';
    ctx.note_output(out);

    auto fmt = [](std::optional<double> v) {
        return v ? std::to_string(*v) : std::string("-");
    };
    std::cout << eval::format_table(
        {{"run", "valid", "ns_rate", "mean_#B", "mean_chars", "mean_claims"},
         {"base", std::to_string(base_agg.valid_frac), fmt(base_agg.ns_rate_micro),
          std::to_string(base_agg.mean_n_b), std::to_string(base_agg.mean_chars),
          std::to_string(base_agg.mean_claims)},
         {"best-of-" + std::to_string(k), std::to_string(sel_agg.valid_frac),
          fmt(sel_agg.ns_rate_micro), std::to_string(sel_agg.mean_n_b),
          std::to_string(sel_agg.mean_chars), std::to_string(sel_agg.mean_claims)}});
    ctx.finish("best-of-k");
    return 0;
}

int cmd_eval(RunContext& ctx, const std::string& labels_path, const std::string& run_path,
             const std::string& baseline_path) {
    if (!labels_path.empty()) {
        config::require_inputs({labels_path});
        ctx.note_input(labels_path);
        auto labels = eval::load_judge_labels(labels_path);
        auto agg = eval::judge_aggregate(labels);
        json doc{{"config_hash", ctx.config_hash},
                 {"n_s", agg.n_s},
                 {"n_ns", agg.n_ns},
                 {"n_na", agg.n_na},
                 {"n_hcns", agg.n_hcns},
                 {"ns_rate", agg.ns_rate ? json(*agg.ns_rate) : json(nullptr)}};
        const auto out = ctx.out_path("judge_report.json");
        std::ofstream(out, std::ios::binary) << doc.dump(2) << '\n';
        ctx.note_output(out);
        std::cout << "judge labels: S=" << agg.n_s << " NS=" << agg.n_ns << " NA=" << agg.n_na
                  << " HCNS=" << agg.n_hcns << "\n";
        ctx.finish("eval");
        return 0;
    }
    config::require_inputs({run_path, baseline_path});
    ctx.note_input(run_path);
    ctx.note_input(baseline_path);
    auto load_stats = [&](const std::string& path) {
        std::vector<mining::SummaryStats> stats;
        jsonl::for_each_strict(path, [&](std::size_t, const json& rec) {
            stats.push_back(stats_from_record(rec));
        });
        return stats;
    };
    const auto run_agg = eval::aggregate_run(load_stats(run_path), ctx.cfg.validity);
    const auto base_agg = eval::aggregate_run(load_stats(baseline_path), ctx.cfg.validity);
    const auto gate = eval::degeneration_gate(run_agg, base_agg, ctx.cfg.gate);
    json doc{{"config_hash", ctx.config_hash},
             {"run", aggregates_json(run_agg)},
             {"baseline", aggregates_json(base_agg)},
             {"gate",
              json{{"pass", gate.pass},
                   {"valid_ok", gate.valid_ok},
                   {"chars_ok", gate.chars_ok},
                   {"claims_ok", gate.claims_ok},
                   {"valid_margin", gate.valid_margin},
                   {"char_ratio", gate.char_ratio},
                   {"claim_margin", gate.claim_margin}}}};
    const auto out = ctx.out_path("gate_report.json");
    std::ofstream(out, std::ios::binary) << doc.dump(2) << '\n';
    ctx.note_output(out);
    std::cout << "degeneration gate: " << (gate.pass ? "PASS" : "FAIL") << "\n";
    ctx.finish("eval");
    return 0;  // the gate verdict is the report's payload, not a command failure
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"VERI-DPO pipeline: retrieval-augmented claim verification, "
                 "verifier-driven preference mining, and DPO mathematics"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags usable after the subcommand name

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed_flag;
    bool serial = false;
    std::vector<std::string> set_overrides;
    app.add_option("--config", config_path, "pipeline config JSON");
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--seed", seed_flag, "master seed (overrides config)");
    app.add_flag("--serial", serial, "disable OpenMP parallelism");
    app.add_option("--set", set_overrides,
                   "dotted-path config override, e.g. --set mining.delta=1.0 (repeatable)");

    auto* sc_synth = app.add_subcommand("synth-world", "generate a synthetic world");
    auto* sc_ingest = app.add_subcommand("ingest", "ingest notes and apply exclusions");
    auto* sc_index = app.add_subcommand("index", "segment and build per-subject indexes");

    auto* sc_retrieve = app.add_subcommand("retrieve", "two-stage retrieval trace for claims");
    std::string claims_path;
    sc_retrieve->add_option("--claims", claims_path, "claims JSONL")->required();

    auto* sc_instances = app.add_subcommand("build-instances",
                                            "verifier training instances with evidence");
    std::string props_path;
    sc_instances->add_option("--propositions", props_path, "labeled propositions JSONL");

    auto* sc_calibrate = app.add_subcommand("calibrate", "sweep the Not Supported logit bias");
    std::string grid_spec = "-0.8:1.6:0.05";
    double lambda = 0.10;
    std::size_t max_instances = 2000;
    sc_calibrate->add_option("--grid", grid_spec, "bias grid lo:hi:step");
    sc_calibrate->add_option("--lambda", lambda, "Recall_NS weight in the objective");
    sc_calibrate->add_option("--max-instances", max_instances, "dev instance cap");

    auto* sc_mine = app.add_subcommand("mine", "mine preference pairs");
    std::string strategy;
    bool dump_claims = false;
    sc_mine->add_option("--strategy", strategy, "full|random|no_hcns|no_length_coverage");
    sc_mine->add_flag("--dump-claims", dump_claims,
                      "also export scored claims as {candidate_id, claim_id, text}");

    auto* sc_diagnose = app.add_subcommand("diagnose", "pair diagnostics");
    std::string pairs_path;
    sc_diagnose->add_option("--pairs", pairs_path, "pairs JSONL (default out/pairs.jsonl)");

    auto* sc_stability = app.add_subcommand("stability", "delta / bias_prec stability sweep");
    std::string delta_list = "0.6,0.8,1.0";
    std::string bias_list = "-0.54,-0.34,-0.14";
    sc_stability->add_option("--delta-grid", delta_list, "comma-separated deltas");
    sc_stability->add_option("--bias-grid", bias_list, "comma-separated precision biases");

    auto* sc_dpo = app.add_subcommand("dpo-train-toy", "train the toy DPO policy on pairs");
    std::string dpo_pairs_path;
    sc_dpo->add_option("--pairs", dpo_pairs_path, "pairs JSONL (default out/pairs.jsonl)");

    auto* sc_bok = app.add_subcommand("best-of-k", "verifier-guided reranking baseline");
    int k = 8;
    sc_bok->add_option("-k,--k", k, "candidates per prompt");

    auto* sc_eval = app.add_subcommand("eval", "judge aggregation or degeneration gate");
    std::string labels_path, run_path, baseline_path;
    sc_eval->add_option("--labels", labels_path, "external judge labels JSONL");
    sc_eval->add_option("--run", run_path, "candidate stats JSONL for the evaluated run");
    sc_eval->add_option("--baseline", baseline_path, "candidate stats JSONL for the baseline");

    std::vector<std::string> argv_like = args;
    try {
        std::vector<const char*> argv;
        argv.push_back("veridpo");
        for (const auto& a : argv_like) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        RunContext ctx;
        json cfg_json = json::object();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw std::runtime_error("cannot open config " + config_path);
            cfg_json = json::parse(in);
        }
        // flag > config > default: dotted-path --set entries patch the
        // config document before it is materialized.
        for (const auto& entry : set_overrides) {
            const auto eq = entry.find('=');
            if (eq == std::string::npos) {
                throw std::runtime_error("--set expects key=value, got '" + entry + "'");
            }
            const std::string path = entry.substr(0, eq);
            const std::string raw = entry.substr(eq + 1);
            json value = json::parse(raw, nullptr, false);
            if (value.is_discarded()) value = raw;  // bare strings allowed
            json* node = &cfg_json;
            std::size_t pos = 0;
            while (true) {
                const auto dot = path.find('.', pos);
                const std::string key = path.substr(pos, dot - pos);
                if (key.empty()) throw std::runtime_error("bad --set path '" + path + "'");
                if (dot == std::string::npos) {
                    (*node)[key] = value;
                    break;
                }
                node = &(*node)[key];
                pos = dot + 1;
            }
        }
        ctx.cfg = PipelineConfig::from_json(cfg_json);
        if (seed_flag) ctx.cfg.master_seed = *seed_flag;
        if (!out_dir.empty()) ctx.cfg.paths.out_dir = out_dir;
        if (sc_mine->parsed() && !strategy.empty()) {
            ctx.cfg.mining.strategy = mining::strategy_from_name(strategy);
        }
        ctx.config_hash = ctx.cfg.hash();
        ctx.out_dir = ctx.cfg.paths.out_dir;
        ctx.mode = serial ? ExecMode::Serial : ExecMode::Parallel;
        fs::create_directories(ctx.out_dir);

        // Defaults wiring for artifact-consuming subcommands.
        if (ctx.cfg.paths.world.empty()) ctx.cfg.paths.world = ctx.out_path("world.json");
        if (pairs_path.empty()) pairs_path = ctx.out_path("pairs.jsonl");
        if (dpo_pairs_path.empty()) dpo_pairs_path = ctx.out_path("pairs.jsonl");
        if (props_path.empty()) props_path = ctx.out_path("propositions.jsonl");

        if (sc_synth->parsed()) return cmd_synth_world(ctx);
        if (sc_ingest->parsed()) {
            if (ctx.cfg.paths.corpus.empty()) ctx.cfg.paths.corpus = ctx.out_path("notes.jsonl");
            return cmd_ingest(ctx);
        }
        if (sc_index->parsed()) return cmd_index(ctx);
        if (sc_retrieve->parsed()) return cmd_retrieve(ctx, claims_path);
        if (sc_instances->parsed()) return cmd_build_instances(ctx, props_path);
        if (sc_calibrate->parsed()) return cmd_calibrate(ctx, grid_spec, lambda, max_instances);
        if (sc_mine->parsed()) return cmd_mine(ctx, dump_claims);
        if (sc_diagnose->parsed()) return cmd_diagnose(ctx, pairs_path);
        if (sc_stability->parsed()) return cmd_stability(ctx, delta_list, bias_list);
        if (sc_dpo->parsed()) return cmd_dpo_train_toy(ctx, dpo_pairs_path);
        if (sc_bok->parsed()) return cmd_best_of_k(ctx, k);
        if (sc_eval->parsed()) return cmd_eval(ctx, labels_path, run_path, baseline_path);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace veridpo::cli
