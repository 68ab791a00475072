#include "veridpo/synth.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "veridpo/jsonl.hpp"
#include "veridpo/rng.hpp"
#include "veridpo/text.hpp"
#include "veridpo/util.hpp"

namespace veridpo::synth {

using json = nlohmann::json;
using veridpo::verifier::Verdict;
using veridpo::verifier::VerifierLogits;

namespace {

const char* kMeds[] = {"vancomycin", "metoprolol", "furosemide", "lisinopril",
                       "heparin",    "insulin",    "ceftriaxone", "amiodarone",
                       "pantoprazole", "warfarin", "azithromycin", "piperacillin"};
const char* kConditions[] = {"pneumonia",       "sepsis",        "atrial fibrillation",
                             "heart failure",   "hyperkalemia",  "anemia",
                             "delirium",        "cellulitis",    "pancreatitis",
                             "copd exacerbation"};
const char* kLabs[] = {"creatinine", "sodium",  "potassium",      "hemoglobin",
                       "lactate",    "bilirubin", "platelet count", "white count"};
const char* kProcedures[] = {"central line placement", "intubation", "bronchoscopy",
                             "dialysis",               "lumbar puncture", "endoscopy"};
struct TrendPair {
    const char* up;
    const char* down;
};
const TrendPair kTrends[] = {{"improved", "worsened"}, {"increased", "decreased"},
                             {"rose", "fell"}};
const char* kFiller[] = {"patient seen and examined at the bedside",
                         "overnight events reviewed with the care team",
                         "plan of care discussed with the family",
                         "vital signs reviewed and stable overnight",
                         "remains comfortable and resting this morning",
                         "nursing concerns addressed during rounds"};

template <typename T, std::size_t N>
const T& pick(SplitMix64& rng, const T (&pool)[N]) {
    return pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(N) - 1))];
}

// Renders one fact; `tag` is a world-unique integer folded into the text so
// truth keys never collide across subjects.
Fact render_fact(SplitMix64& rng, int day, int tag) {
    Fact f;
    const int kind = static_cast<int>(rng.uniform_int(0, 2));
    if (kind == 0) {
        const auto& med = pick(rng, kMeds);
        const auto& cond = pick(rng, kConditions);
        f.note_line = std::string("started ") + med + " for " + cond + " on day " +
                      std::to_string(day) + " course " + std::to_string(tag);
        f.claim_true = std::string("the team started ") + med + " for " + cond + " on day " +
                       std::to_string(day) + " course " + std::to_string(tag);
        f.claim_false = std::string("the team discontinued ") + med + " for " + cond +
                        " on day " + std::to_string(day) + " course " + std::to_string(tag);
    } else if (kind == 1) {
        const auto& lab = pick(rng, kLabs);
        const auto& trend = pick(rng, kTrends);
        const int value = static_cast<int>(rng.uniform_int(40, 480));
        f.note_line = std::string(lab) + " " + trend.up + " to " + std::to_string(value) +
                      " by day " + std::to_string(day) + " check " + std::to_string(tag);
        f.claim_true = std::string("the ") + lab + " " + trend.up + " to " +
                       std::to_string(value) + " by day " + std::to_string(day) + " check " +
                       std::to_string(tag);
        f.claim_false = std::string("the ") + lab + " " + trend.down + " to " +
                        std::to_string(value) + " by day " + std::to_string(day) + " check " +
                        std::to_string(tag);
    } else {
        const auto& proc = pick(rng, kProcedures);
        f.note_line = std::string("patient underwent ") + proc + " on day " +
                      std::to_string(day) + " event " + std::to_string(tag);
        f.claim_true = std::string("the patient underwent ") + proc + " on day " +
                       std::to_string(day) + " event " + std::to_string(tag);
        f.claim_false = std::string("the patient did not undergo ") + proc + " on day " +
                        std::to_string(day) + " event " + std::to_string(tag);
    }
    return f;
}

void register_fact(SyntheticWorld& world, const Fact& f, bool distractor) {
    if (distractor) {
        world.truth[truth_key(f.claim_true)] = Verdict::NotAddressed;
        return;
    }
    world.truth[truth_key(f.claim_true)] = Verdict::Supported;
    world.truth[truth_key(f.claim_false)] = Verdict::NotSupported;
}

}  // namespace

std::string truth_key(const std::string& claim_text) {
    std::string key = text::normalize(claim_text);
    while (!key.empty() && (key.back() == '.' || key.back() == '!' || key.back() == '?')) {
        key.pop_back();
    }
    while (!key.empty() && key.back() == ' ') key.pop_back();
    return key;
}

const SyntheticSubject* SyntheticWorld::find_subject(const std::string& subject_id) const {
    for (const auto& s : subjects) {
        if (s.subject_id == subject_id) return &s;
    }
    return nullptr;
}

void CorruptionSpec::validate() const {
    if (p_contradict < 0.0 || p_unaddressed < 0.0 || p_contradict + p_unaddressed > 1.0) {
        throw std::invalid_argument("corruption probabilities must satisfy p_b + p_c <= 1");
    }
    if (claims_min_per_candidate < 1 || claims_per_candidate < claims_min_per_candidate) {
        throw std::invalid_argument("claims_per_candidate range is invalid");
    }
    if (candidates_per_prompt < 1) throw std::invalid_argument("candidates_per_prompt must be >= 1");
}

SyntheticWorld gen_world(const WorldConfig& config) {
    if (config.n_subjects < 1 || config.notes_per_subject < 1 || config.facts_per_note < 1) {
        throw std::invalid_argument("world parameters must be >= 1");
    }
    SyntheticWorld world;
    world.seed = config.seed;
    int global_tag = 0;

    for (int s = 0; s < config.n_subjects; ++s) {
        SyntheticSubject subject;
        char sid[16];
        std::snprintf(sid, sizeof(sid), "s%03d", s);
        subject.subject_id = sid;
        SplitMix64 rng(derive_seed(config.seed, 0x5758, static_cast<std::uint64_t>(s)));

        for (int n = 0; n < config.notes_per_subject; ++n) {
            const int day = n + 1;
            corpus::Note note;
            char nid[32];
            std::snprintf(nid, sizeof(nid), "%s-n%03d", sid, n);
            note.note_id = nid;
            note.subject_id = subject.subject_id;
            note.category = n % 3 == 0 ? "physician" : (n % 3 == 1 ? "nursing" : "progress");
            note.chart_time = static_cast<std::int64_t>(day) * 86400;

            std::string body = std::string("progress note day ") + std::to_string(day) + "\n";
            body += std::string(pick(rng, kFiller)) + ".\n\n";
            for (int k = 0; k < config.facts_per_note; ++k) {
                Fact f = render_fact(rng, day, global_tag++);
                body += f.note_line + ".\n";
                register_fact(world, f, false);
                subject.facts.push_back(std::move(f));
                if (k == config.facts_per_note / 2) {
                    body += "\n" + std::string(pick(rng, kFiller)) + ".\n";
                }
            }
            body += "\n" + std::string(pick(rng, kFiller)) + ".\n";
            note.text = std::move(body);
            subject.notes.push_back(std::move(note));
        }

        for (int d = 0; d < config.distractors_per_subject; ++d) {
            Fact f = render_fact(rng, 90 + d, global_tag++);
            register_fact(world, f, true);
            subject.distractors.push_back(std::move(f));
        }
        world.subjects.push_back(std::move(subject));
    }
    return world;
}

SyntheticWorld gen_world(int n_subjects, int notes_per_subject, std::uint64_t seed) {
    WorldConfig config;
    config.n_subjects = n_subjects;
    config.notes_per_subject = notes_per_subject;
    config.seed = seed;
    return gen_world(config);
}

std::vector<SynthCandidate> gen_candidates(const SyntheticWorld& world,
                                           const std::string& subject_id,
                                           const CorruptionSpec& spec, std::uint64_t seed) {
    spec.validate();
    const auto* subject = world.find_subject(subject_id);
    if (subject == nullptr) throw std::invalid_argument("unknown subject " + subject_id);

    std::vector<SynthCandidate> out;
    out.reserve(static_cast<std::size_t>(spec.candidates_per_prompt));
    for (int c = 0; c < spec.candidates_per_prompt; ++c) {
        SplitMix64 rng(derive_seed(seed, 0xCA4D, static_cast<std::uint64_t>(c)));

        // Candidate-local sampling without replacement keeps claims distinct.
        std::vector<std::size_t> fact_order(subject->facts.size());
        for (std::size_t i = 0; i < fact_order.size(); ++i) fact_order[i] = i;
        for (std::size_t i = fact_order.size(); i > 1; --i) {
            std::swap(fact_order[i - 1],
                      fact_order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        }
        std::vector<std::size_t> distractor_order(subject->distractors.size());
        for (std::size_t i = 0; i < distractor_order.size(); ++i) distractor_order[i] = i;
        for (std::size_t i = distractor_order.size(); i > 1; --i) {
            std::swap(distractor_order[i - 1],
                      distractor_order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        }

        const int want = static_cast<int>(rng.uniform_int(spec.claims_min_per_candidate,
                                                          spec.claims_per_candidate));
        SynthCandidate cand;
        std::size_t fact_cursor = 0;
        std::size_t distractor_cursor = 0;
        std::vector<std::string> sentences;
        for (int i = 0; i < want; ++i) {
            const double u = rng.u01();
            Verdict label;
            std::string claim;
            if (u < spec.p_contradict && fact_cursor < fact_order.size()) {
                claim = subject->facts[fact_order[fact_cursor++]].claim_false;
                label = Verdict::NotSupported;
            } else if (u < spec.p_contradict + spec.p_unaddressed &&
                       distractor_cursor < distractor_order.size()) {
                claim = subject->distractors[distractor_order[distractor_cursor++]].claim_true;
                label = Verdict::NotAddressed;
            } else if (fact_cursor < fact_order.size()) {
                claim = subject->facts[fact_order[fact_cursor++]].claim_true;
                label = Verdict::Supported;
            } else {
                break;  // subject exhausted
            }
            sentences.push_back(std::move(claim));
            cand.claim_labels.push_back(label);
            if (label == Verdict::NotSupported) ++cand.n_planted_b;
            if (label == Verdict::NotAddressed) ++cand.n_planted_c;
        }
        std::string joined;
        for (std::size_t i = 0; i < sentences.size(); ++i) {
            if (i > 0) joined += " ";
            joined += sentences[i] + ".";
        }
        cand.text = std::move(joined);
        out.push_back(std::move(cand));
    }
    return out;
}

OracleVerifier::OracleVerifier(std::shared_ptr<const SyntheticWorld> world, double noise_rate,
                               std::uint64_t seed, double margin_lo, double margin_hi)
    : world_(std::move(world)),
      noise_rate_(noise_rate),
      seed_(seed),
      margin_lo_(margin_lo),
      margin_hi_(margin_hi) {
    if (!world_) throw std::invalid_argument("oracle verifier needs a world");
    if (noise_rate_ < 0.0 || noise_rate_ >= 0.5) {
        throw std::invalid_argument("noise_rate must be in [0, 0.5)");
    }
    if (!(margin_lo_ >= 1.0) || margin_hi_ < margin_lo_) {
        throw std::invalid_argument("oracle margins must satisfy 1.0 <= lo <= hi");
    }
}

VerifierLogits OracleVerifier::score(const std::string& claim,
                                     std::span<const std::string>) const {
    const std::string key = truth_key(claim);
    auto it = world_->truth.find(key);
    Verdict target = it == world_->truth.end() ? Verdict::NotAddressed : it->second;

    SplitMix64 rng(derive_seed(seed_, fnv1a64(key)));
    const double u_noise = rng.u01();
    const std::int64_t wrong_pick = rng.uniform_int(0, 1);
    const double margin = margin_lo_ + (margin_hi_ - margin_lo_) * rng.u01();

    if (noise_rate_ > 0.0 && u_noise < noise_rate_) {
        int t = static_cast<int>(target);
        int wrong[2];
        int w = 0;
        for (int i = 0; i < 3; ++i) {
            if (i != t) wrong[w++] = i;
        }
        target = static_cast<Verdict>(wrong[wrong_pick]);
    }

    // Target carries the margin; the two other labels sit at 0 and -0.5 in
    // label order, so margin == l_target - max(others).
    double logits[3];
    int filled = 0;
    for (int i = 0; i < 3; ++i) {
        if (i == static_cast<int>(target)) {
            logits[i] = margin;
        } else {
            logits[i] = filled == 0 ? 0.0 : -0.5;
            ++filled;
        }
    }
    return {logits[0], logits[1], logits[2]};
}

SynthGenerator::SynthGenerator(std::shared_ptr<const SyntheticWorld> world, CorruptionSpec spec)
    : world_(std::move(world)), spec_(std::move(spec)) {
    if (!world_) throw std::invalid_argument("synth generator needs a world");
    spec_.validate();
}

std::vector<std::string> SynthGenerator::generate(const mining::PromptWindow& window, int k,
                                                  double /*temperature*/, double /*top_p*/,
                                                  std::uint64_t seed) const {
    CorruptionSpec spec = spec_;
    spec.candidates_per_prompt = k;
    auto candidates = gen_candidates(*world_, window.subject_id, spec, seed);
    std::vector<std::string> out;
    out.reserve(candidates.size());
    for (auto& c : candidates) out.push_back(std::move(c.text));
    return out;
}

void save_world(const SyntheticWorld& world, const std::string& path) {
    json doc;
    doc["format"] = "veridpo.world.v1";
    doc["seed"] = world.seed;
    doc["subjects"] = json::array();
    auto fact_json = [](const Fact& f) {
        return json{{"note_line", f.note_line},
                    {"claim_true", f.claim_true},
                    {"claim_false", f.claim_false}};
    };
    for (const auto& s : world.subjects) {
        json subj;
        subj["subject_id"] = s.subject_id;
        subj["facts"] = json::array();
        for (const auto& f : s.facts) subj["facts"].push_back(fact_json(f));
        subj["distractors"] = json::array();
        for (const auto& f : s.distractors) subj["distractors"].push_back(fact_json(f));
        subj["notes"] = json::array();
        for (const auto& n : s.notes) {
            subj["notes"].push_back(json{{"note_id", n.note_id},
                                         {"subject_id", n.subject_id},
                                         {"category", n.category},
                                         {"chart_time", n.chart_time},
                                         {"text", n.text}});
        }
        doc["subjects"].push_back(std::move(subj));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << doc.dump(2) << '\n';
}

SyntheticWorld load_world(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json doc = json::parse(in);
    if (doc.value("format", "") != "veridpo.world.v1") {
        throw std::runtime_error("unrecognized world format in " + path);
    }
    SyntheticWorld world;
    world.seed = doc.at("seed").get<std::uint64_t>();
    auto fact_from = [](const json& j) {
        Fact f;
        f.note_line = j.at("note_line").get<std::string>();
        f.claim_true = j.at("claim_true").get<std::string>();
        f.claim_false = j.at("claim_false").get<std::string>();
        return f;
    };
    for (const auto& subj : doc.at("subjects")) {
        SyntheticSubject s;
        s.subject_id = subj.at("subject_id").get<std::string>();
        for (const auto& f : subj.at("facts")) {
            s.facts.push_back(fact_from(f));
            register_fact(world, s.facts.back(), false);
        }
        for (const auto& f : subj.at("distractors")) {
            s.distractors.push_back(fact_from(f));
            register_fact(world, s.distractors.back(), true);
        }
        for (const auto& n : subj.at("notes")) {
            corpus::Note note;
            note.note_id = n.at("note_id").get<std::string>();
            note.subject_id = n.at("subject_id").get<std::string>();
            note.category = n.value("category", "");
            note.chart_time = n.at("chart_time").get<std::int64_t>();
            note.text = n.at("text").get<std::string>();
            s.notes.push_back(std::move(note));
        }
        world.subjects.push_back(std::move(s));
    }
    return world;
}

void export_notes_jsonl(const SyntheticWorld& world, const std::string& path,
                        const std::string& config_hash) {
    jsonl::Writer writer(path);
    writer.header("veridpo.notes.v1", config_hash);
    for (const auto& s : world.subjects) {
        for (const auto& n : s.notes) {
            writer.write(json{{"note_id", n.note_id},
                              {"subject_id", n.subject_id},
                              {"category", n.category},
                              {"chart_time", n.chart_time},
                              {"text", n.text}});
        }
    }
}

}  // namespace veridpo::synth
