#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "histax/error.hpp"

namespace histax {

enum class RoleName {
    Extractor,
    Classifier,
    Generator,
    Merger,
    Judger,
    Expander,
    Conceptualizer,
    Enricher,
    GranularityJudge,
};

const char* role_name(RoleName r);
RoleName role_from_name(const std::string& name);

// One agent binding: a role served by one model. Roles that fan out
// (extractor, generator) are configured as lists of these.
struct AgentRole {
    RoleName name = RoleName::Classifier;
    std::string model_id;
    std::optional<double> temperature; // unset: provider default, recorded as null
};

enum class RequestKind { Chat, Embed };

struct ProviderRequest {
    AgentRole role;
    std::string template_id;
    std::map<std::string, std::string> variables;
    RequestKind kind = RequestKind::Chat;
};

struct EmbeddingVector {
    std::vector<double> values;
    std::string source_text;
};

// Standard cosine; throws DimensionMismatch / ZeroVector.
double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v);
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

struct ChatReply {
    std::string text;
    int64_t latency_ms = 0;
};

// Thrown by providers for failures worth retrying (network, 429/5xx).
class TransientProviderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual ChatReply complete(const std::string& model_id,
                               std::optional<double> temperature,
                               const std::string& prompt,
                               const ProviderRequest& request) = 0;
};

class EmbedProvider {
public:
    virtual ~EmbedProvider() = default;
    virtual std::vector<std::vector<double>> embed(const std::string& model_id,
                                                   const std::vector<std::string>& texts) = 0;
    virtual int dimension() const = 0;
};

// ---------------------------------------------------------------------------
// Deterministic mock.
//
// Chat answers come from fixture scripts keyed by template id. Each template
// maps to an ordered rule list:
//   {"match": {...}, "response": <json|string>}   reusable; fires when every
//                                                 match key equals the request
//                                                 variable (_model/_role match
//                                                 the agent binding)
//   {"response": <json|string>}                   one-shot, consumed in order
//   {"default": true, "response": ...}            fallback
// First firing rule wins; no rule fires -> MissingFixture.
//
// Embeddings are unit vectors hashed from (seed, text), overridable per text
// with exact vectors ("vectors") or sparse components ("sparse").
// ---------------------------------------------------------------------------

class MockChatProvider : public ChatProvider {
public:
    MockChatProvider(nlohmann::json fixtures, uint64_t seed);

    ChatReply complete(const std::string& model_id,
                       std::optional<double> temperature,
                       const std::string& prompt,
                       const ProviderRequest& request) override;

private:
    struct Rule {
        std::map<std::string, std::string> match;
        bool is_default = false;
        bool consumed = false;
        bool one_shot = false;
        std::string response;
    };
    std::map<std::string, std::vector<Rule>> rules_;
    std::mutex mu_;
};

class MockEmbedProvider : public EmbedProvider {
public:
    MockEmbedProvider(nlohmann::json fixtures, uint64_t seed, int fallback_dimension);

    std::vector<std::vector<double>> embed(const std::string& model_id,
                                           const std::vector<std::string>& texts) override;
    int dimension() const override { return dimension_; }

    // Seed-hashed unit vector; exposed for tests.
    static std::vector<double> hash_unit_vector(uint64_t seed, const std::string& text, int dim);

private:
    std::map<std::string, std::vector<double>> pinned_;
    int dimension_;
    uint64_t seed_;
};

// ---------------------------------------------------------------------------
// HTTP providers speaking the common chat-completions / embeddings JSON
// shape. Base URL and API key come from environment variables so credentials
// never land in config files.
// ---------------------------------------------------------------------------

struct HttpProviderSettings {
    std::string base_url_env = "HISTAX_BASE_URL";
    std::string api_key_env = "HISTAX_API_KEY";
    int timeout_seconds = 120;
};

class HttpChatProvider : public ChatProvider {
public:
    explicit HttpChatProvider(HttpProviderSettings settings);
    // per-model overrides for mixed-vendor runs; falls back to the default
    HttpChatProvider(HttpProviderSettings default_settings,
                     std::map<std::string, HttpProviderSettings> per_model);

    ChatReply complete(const std::string& model_id,
                       std::optional<double> temperature,
                       const std::string& prompt,
                       const ProviderRequest& request) override;

private:
    const HttpProviderSettings& settings_for(const std::string& model_id) const;

    HttpProviderSettings settings_;
    std::map<std::string, HttpProviderSettings> per_model_;
};

class HttpEmbedProvider : public EmbedProvider {
public:
    HttpEmbedProvider(HttpProviderSettings settings, std::string model_id, int dimension);
    std::vector<std::vector<double>> embed(const std::string& model_id,
                                           const std::vector<std::string>& texts) override;
    int dimension() const override { return dimension_; }

private:
    HttpProviderSettings settings_;
    std::string model_id_;
    int dimension_;
};

} // namespace histax
