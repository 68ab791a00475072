#include "veridpo/config.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "veridpo/util.hpp"

namespace veridpo::config {

namespace fs = std::filesystem;

namespace {

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json weights_to_json(const mining::UtilityWeights& w) {
    return json{{"lambda_a", w.lambda_a},   {"lambda_b", w.lambda_b},
                {"lambda_c", w.lambda_c},   {"lambda_cov", w.lambda_cov},
                {"n0", w.n0},               {"lambda_dup", w.lambda_dup},
                {"lambda_meta", w.lambda_meta}};
}

void weights_from_json(const json& j, mining::UtilityWeights& w) {
    get_if(j, "lambda_a", w.lambda_a);
    get_if(j, "lambda_b", w.lambda_b);
    get_if(j, "lambda_c", w.lambda_c);
    get_if(j, "lambda_cov", w.lambda_cov);
    get_if(j, "n0", w.n0);
    get_if(j, "lambda_dup", w.lambda_dup);
    get_if(j, "lambda_meta", w.lambda_meta);
}

}  // namespace

json PipelineConfig::to_json() const {
    json j;
    j["paths"] = {{"corpus", paths.corpus},
                  {"exclusions", paths.exclusions},
                  {"world", paths.world},
                  {"out_dir", paths.out_dir}};
    j["segmentation"] = {{"min_span_chars", segmentation.min_span_chars},
                         {"max_span_chars", segmentation.max_span_chars}};
    j["filter"] = {{"min_tokens", filter.min_tokens},
                   {"min_chars", filter.min_chars},
                   {"min_alnum_frac", filter.min_alnum_frac},
                   {"template_patterns", filter.template_patterns},
                   {"meta_patterns", filter.meta_patterns}};
    j["retrieval"] = {{"top_n_notes", retrieval.top_n_notes},
                      {"top_k_units", retrieval.top_k_units},
                      {"k1", retrieval.k1},
                      {"b", retrieval.b},
                      {"cap_per_note", retrieval.cap_per_note},
                      {"dedup", retrieval.dedup}};
    j["verifier"] = {{"kind", verifier.kind},
                     {"remote_url", verifier.remote_url},
                     {"oracle_noise", verifier.oracle_noise},
                     {"remote_timeout_ms", verifier.remote_timeout_ms},
                     {"remote_max_retries", verifier.remote_max_retries}};
    j["mining"] = {{"prompts_per_subject", mining.window.prompts_per_subject},
                   {"window_size", mining.window.window_size},
                   {"stride", mining.window.stride},
                   {"jitter_range", mining.window.jitter_range},
                   {"unit_word_cap", mining.window.unit_word_cap},
                   {"bias_prec", mining.scoring.bias_prec},
                   {"bias_recall", mining.scoring.bias_recall},
                   {"delta", mining.scoring.delta},
                   {"scoring_cap", mining.scoring.scoring_cap},
                   {"top_k_evidence", mining.scoring.top_k_evidence},
                   {"raw_delta_convention",
                    mining.scoring.delta_convention == verifier::DeltaConvention::RawLogit},
                   {"weights", weights_to_json(mining.weights)},
                   {"tau_u", mining.constraints.tau_u},
                   {"tau_n", mining.constraints.tau_n},
                   {"tau_hcns", mining.constraints.tau_hcns},
                   {"tau_b", mining.constraints.tau_b},
                   {"strict_gap", mining.constraints.strict_gap},
                   {"strategy", mining::strategy_name(mining.strategy)},
                   {"candidates_per_prompt", mining.candidates_per_prompt},
                   {"temperature", mining.temperature},
                   {"top_p", mining.top_p},
                   {"recall_prefilter", mining.recall_prefilter}};
    j["world"] = {{"n_subjects", world.n_subjects},
                  {"notes_per_subject", world.notes_per_subject},
                  {"facts_per_note", world.facts_per_note},
                  {"distractors_per_subject", world.distractors_per_subject}};
    j["corruption"] = {{"p_contradict", corruption.p_contradict},
                       {"p_unaddressed", corruption.p_unaddressed},
                       {"claims_per_candidate", corruption.claims_per_candidate},
                       {"claims_min_per_candidate", corruption.claims_min_per_candidate},
                       {"candidates_per_prompt", corruption.candidates_per_prompt}};
    j["dpo"] = {{"beta", dpo.beta},
                {"steps", dpo.steps},
                {"learning_rate", dpo.learning_rate}};
    j["validity"] = {{"min_chars_after_clean", validity.min_chars_after_clean},
                     {"min_claims", validity.min_claims},
                     {"dup_strict", validity.dup_strict},
                     {"dup_relaxed", validity.dup_relaxed},
                     {"meta_forbidden", validity.meta_forbidden}};
    j["gate"] = {{"min_valid_frac", gate.min_valid_frac},
                 {"min_char_ratio", gate.min_char_ratio},
                 {"max_claim_deficit", gate.max_claim_deficit}};
    j["sweep_lambda"] = sweep_lambda;
    j["master_seed"] = master_seed;
    return j;
}

PipelineConfig PipelineConfig::from_json(const json& j) {
    PipelineConfig c;
    if (j.contains("paths")) {
        const auto& p = j["paths"];
        get_if(p, "corpus", c.paths.corpus);
        get_if(p, "exclusions", c.paths.exclusions);
        get_if(p, "world", c.paths.world);
        get_if(p, "out_dir", c.paths.out_dir);
    }
    if (j.contains("segmentation")) {
        const auto& s = j["segmentation"];
        get_if(s, "min_span_chars", c.segmentation.min_span_chars);
        get_if(s, "max_span_chars", c.segmentation.max_span_chars);
    }
    if (j.contains("filter")) {
        const auto& f = j["filter"];
        get_if(f, "min_tokens", c.filter.min_tokens);
        get_if(f, "min_chars", c.filter.min_chars);
        get_if(f, "min_alnum_frac", c.filter.min_alnum_frac);
        get_if(f, "template_patterns", c.filter.template_patterns);
        get_if(f, "meta_patterns", c.filter.meta_patterns);
    }
    if (j.contains("retrieval")) {
        const auto& r = j["retrieval"];
        get_if(r, "top_n_notes", c.retrieval.top_n_notes);
        get_if(r, "top_k_units", c.retrieval.top_k_units);
        get_if(r, "k1", c.retrieval.k1);
        get_if(r, "b", c.retrieval.b);
        get_if(r, "cap_per_note", c.retrieval.cap_per_note);
        get_if(r, "dedup", c.retrieval.dedup);
    }
    if (j.contains("verifier")) {
        const auto& v = j["verifier"];
        get_if(v, "kind", c.verifier.kind);
        get_if(v, "remote_url", c.verifier.remote_url);
        get_if(v, "oracle_noise", c.verifier.oracle_noise);
        get_if(v, "remote_timeout_ms", c.verifier.remote_timeout_ms);
        get_if(v, "remote_max_retries", c.verifier.remote_max_retries);
    }
    if (j.contains("mining")) {
        const auto& m = j["mining"];
        get_if(m, "prompts_per_subject", c.mining.window.prompts_per_subject);
        get_if(m, "window_size", c.mining.window.window_size);
        get_if(m, "stride", c.mining.window.stride);
        get_if(m, "jitter_range", c.mining.window.jitter_range);
        get_if(m, "unit_word_cap", c.mining.window.unit_word_cap);
        get_if(m, "bias_prec", c.mining.scoring.bias_prec);
        get_if(m, "bias_recall", c.mining.scoring.bias_recall);
        get_if(m, "delta", c.mining.scoring.delta);
        get_if(m, "scoring_cap", c.mining.scoring.scoring_cap);
        get_if(m, "top_k_evidence", c.mining.scoring.top_k_evidence);
        if (m.contains("raw_delta_convention") && m["raw_delta_convention"].get<bool>()) {
            c.mining.scoring.delta_convention = verifier::DeltaConvention::RawLogit;
        }
        if (m.contains("weights")) weights_from_json(m["weights"], c.mining.weights);
        get_if(m, "tau_u", c.mining.constraints.tau_u);
        get_if(m, "tau_n", c.mining.constraints.tau_n);
        get_if(m, "tau_hcns", c.mining.constraints.tau_hcns);
        get_if(m, "tau_b", c.mining.constraints.tau_b);
        get_if(m, "strict_gap", c.mining.constraints.strict_gap);
        if (m.contains("strategy")) {
            c.mining.strategy = mining::strategy_from_name(m["strategy"].get<std::string>());
        }
        get_if(m, "candidates_per_prompt", c.mining.candidates_per_prompt);
        get_if(m, "temperature", c.mining.temperature);
        get_if(m, "top_p", c.mining.top_p);
        get_if(m, "recall_prefilter", c.mining.recall_prefilter);
    }
    if (j.contains("world")) {
        const auto& w = j["world"];
        get_if(w, "n_subjects", c.world.n_subjects);
        get_if(w, "notes_per_subject", c.world.notes_per_subject);
        get_if(w, "facts_per_note", c.world.facts_per_note);
        get_if(w, "distractors_per_subject", c.world.distractors_per_subject);
    }
    if (j.contains("corruption")) {
        const auto& x = j["corruption"];
        get_if(x, "p_contradict", c.corruption.p_contradict);
        get_if(x, "p_unaddressed", c.corruption.p_unaddressed);
        get_if(x, "claims_per_candidate", c.corruption.claims_per_candidate);
        get_if(x, "claims_min_per_candidate", c.corruption.claims_min_per_candidate);
        get_if(x, "candidates_per_prompt", c.corruption.candidates_per_prompt);
    }
    if (j.contains("dpo")) {
        const auto& d = j["dpo"];
        get_if(d, "beta", c.dpo.beta);
        get_if(d, "steps", c.dpo.steps);
        get_if(d, "learning_rate", c.dpo.learning_rate);
    }
    if (j.contains("validity")) {
        const auto& v = j["validity"];
        get_if(v, "min_chars_after_clean", c.validity.min_chars_after_clean);
        get_if(v, "min_claims", c.validity.min_claims);
        get_if(v, "dup_strict", c.validity.dup_strict);
        get_if(v, "dup_relaxed", c.validity.dup_relaxed);
        get_if(v, "meta_forbidden", c.validity.meta_forbidden);
    }
    if (j.contains("gate")) {
        const auto& g = j["gate"];
        get_if(g, "min_valid_frac", c.gate.min_valid_frac);
        get_if(g, "min_char_ratio", c.gate.min_char_ratio);
        get_if(g, "max_claim_deficit", c.gate.max_claim_deficit);
    }
    get_if(j, "sweep_lambda", c.sweep_lambda);
    get_if(j, "master_seed", c.master_seed);
    return c;
}

std::string PipelineConfig::hash() const {
    // Paths are excluded: the hash covers the semantic configuration, so the
    // same run in a different directory yields byte-identical artifacts.
    json j = to_json();
    j.erase("paths");
    return to_hex(fnv1a64(j.dump()));
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    json j = json::parse(in);
    return PipelineConfig::from_json(j);
}

void require_inputs(const std::vector<std::string>& paths) {
    for (const auto& p : paths) {
        if (p.empty()) throw std::runtime_error("required input path is not configured");
        if (!fs::exists(p)) {
            throw std::runtime_error("required input does not exist: " + p +
                                     " (run the producing subcommand first)");
        }
    }
}

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::uint64_t h = 14695981039346656037ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
    }
    return to_hex(h);
}

void write_manifest(const Manifest& manifest, const std::string& path) {
    json j{{"command", manifest.command},
           {"config_hash", manifest.config_hash},
           {"seed", manifest.seed},
           {"inputs", manifest.input_hashes},
           {"outputs", manifest.outputs},
           {"wall_ms", manifest.wall_ms}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace veridpo::config
