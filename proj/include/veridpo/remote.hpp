#pragma once

// HTTP verifier client.
// Wire contract: POST {base_url}/score with
//   {"request_id": "...", "claim": "...", "evidence": ["...", ...]}
// expecting 200 and
//   {"request_id": "...", "logits": [l_a, l_b, l_c]}.
// The request id is derived from the payload, so retries are idempotent.
// Non-200 or malformed responses raise ScorerError after the retries are
// exhausted; callers skip and log the affected claim.

#include <stdexcept>
#include <string>

#include "veridpo/verifier.hpp"

namespace veridpo::verifier {

struct ScorerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RemoteScorerConfig {
    std::string base_url;  // e.g. "http://127.0.0.1:8080"
    int timeout_ms = 5000;
    int max_retries = 2;  // attempts beyond the first
};

class RemoteScorer final : public VerifierClient {
public:
    explicit RemoteScorer(RemoteScorerConfig config);

    VerifierLogits score(const std::string& claim,
                         std::span<const std::string> evidence) const override;

    static std::string request_id(const std::string& claim,
                                  std::span<const std::string> evidence);

private:
    RemoteScorerConfig config_;
    std::string host_;
    int port_ = 80;
    std::string path_prefix_;
};

}  // namespace veridpo::verifier
