#pragma once

// Pipeline configuration file, effective-config hashing, and run manifests.
// Precedence: flag > config file > default. The config hash covers the
// effective configuration and is stamped into every artifact.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "veridpo/corpus.hpp"
#include "veridpo/dpo.hpp"
#include "veridpo/eval.hpp"
#include "veridpo/mining.hpp"
#include "veridpo/synth.hpp"

namespace veridpo::config {

using json = nlohmann::json;

struct Paths {
    std::string corpus;      // notes JSONL
    std::string exclusions;  // note ids, one per line
    std::string world;       // synthetic world JSON
    std::string out_dir = "out";
};

struct VerifierSelection {
    std::string kind = "oracle";  // oracle | toy | remote
    std::string remote_url;       // VERIDPO_REMOTE_URL env overrides
    double oracle_noise = 0.0;
    int remote_timeout_ms = 5000;
    int remote_max_retries = 2;
};

struct PipelineConfig {
    Paths paths;
    corpus::SegmentationConfig segmentation;
    claims::ClaimFilterConfig filter;
    retrieval::RetrievalParams retrieval;
    VerifierSelection verifier;
    mining::MiningConfig mining;  // window/scoring/weights/constraints/strategy
    synth::WorldConfig world;
    synth::CorruptionSpec corruption;
    dpo::DpoTrainConfig dpo;
    eval::ValidityConfig validity;
    eval::SelectionGate gate;
    double sweep_lambda = 0.10;
    std::uint64_t master_seed = 7;

    json to_json() const;
    static PipelineConfig from_json(const json& j);  // missing keys keep defaults

    // Hash of the canonical serialized effective config.
    std::string hash() const;
};

// Parses the file and overlays it on the defaults. Referenced input files
// must exist (validated per subcommand via require_inputs).
PipelineConfig load_config(const std::string& path);

// Throws with an actionable message when any listed path is missing.
void require_inputs(const std::vector<std::string>& paths);

struct Manifest {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> input_hashes;  // path -> content hash
    std::vector<std::string> outputs;
    long long wall_ms = 0;
};

std::string file_hash(const std::string& path);
void write_manifest(const Manifest& manifest, const std::string& path);

}  // namespace veridpo::config
