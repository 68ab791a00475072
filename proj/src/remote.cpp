#include "veridpo/remote.hpp"

#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "veridpo/util.hpp"

namespace veridpo::verifier {

using json = nlohmann::json;

namespace {

// Splits "http://host:port/prefix" into (host, port, prefix).
void parse_url(const std::string& url, std::string& host, int& port, std::string& prefix) {
    std::string rest = url;
    if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
    auto slash = rest.find('/');
    std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
    prefix = slash == std::string::npos ? "" : rest.substr(slash);
    if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    auto colon = hostport.find(':');
    if (colon == std::string::npos) {
        host = hostport;
        port = 80;
    } else {
        host = hostport.substr(0, colon);
        port = std::stoi(hostport.substr(colon + 1));
    }
}

}  // namespace

RemoteScorer::RemoteScorer(RemoteScorerConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw std::invalid_argument("remote scorer needs a base_url");
    parse_url(config_.base_url, host_, port_, path_prefix_);
}

std::string RemoteScorer::request_id(const std::string& claim,
                                     std::span<const std::string> evidence) {
    std::uint64_t h = fnv1a64(claim);
    for (const auto& ev : evidence) {
        h = fnv1a64("\x1f", h);
        h = fnv1a64(ev, h);
    }
    return to_hex(h);
}

VerifierLogits RemoteScorer::score(const std::string& claim,
                                   std::span<const std::string> evidence) const {
    json body;
    body["request_id"] = request_id(claim, evidence);
    body["claim"] = claim;
    body["evidence"] = json::array();
    for (const auto& ev : evidence) body["evidence"].push_back(ev);
    const std::string payload = body.dump();

    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        httplib::Client client(host_, port_);
        client.set_connection_timeout(0, config_.timeout_ms * 1000);
        client.set_read_timeout(0, config_.timeout_ms * 1000);
        auto res = client.Post((path_prefix_ + "/score").c_str(), payload, "application/json");
        if (!res) {
            last_error = "connection failed";
            continue;
        }
        if (res->status != 200) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("logits") ||
            !parsed["logits"].is_array() || parsed["logits"].size() != 3 ||
            parsed.value("request_id", "") != body["request_id"]) {
            last_error = "malformed response body";
            continue;
        }
        VerifierLogits logits;
        try {
            logits.l_a = parsed["logits"][0].get<double>();
            logits.l_b = parsed["logits"][1].get<double>();
            logits.l_c = parsed["logits"][2].get<double>();
        } catch (const std::exception&) {
            last_error = "non-numeric logits";
            continue;
        }
        if (!std::isfinite(logits.l_a) || !std::isfinite(logits.l_b) ||
            !std::isfinite(logits.l_c)) {
            last_error = "non-finite logits";
            continue;
        }
        return logits;
    }
    throw ScorerError("remote scorer failed after " + std::to_string(config_.max_retries + 1) +
                      " attempts: " + last_error);
}

}  // namespace veridpo::verifier
