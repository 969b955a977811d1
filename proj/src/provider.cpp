#include "histax/provider.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>

#include <httplib.h>

namespace histax {

const char* role_name(RoleName r) {
    switch (r) {
        case RoleName::Extractor:        return "extractor";
        case RoleName::Classifier:       return "classifier";
        case RoleName::Generator:        return "generator";
        case RoleName::Merger:           return "merger";
        case RoleName::Judger:           return "judger";
        case RoleName::Expander:         return "expander";
        case RoleName::Conceptualizer:   return "conceptualizer";
        case RoleName::Enricher:         return "enricher";
        case RoleName::GranularityJudge: return "granularity_judge";
    }
    return "classifier";
}

RoleName role_from_name(const std::string& name) {
    if (name == "extractor") return RoleName::Extractor;
    if (name == "classifier") return RoleName::Classifier;
    if (name == "generator") return RoleName::Generator;
    if (name == "merger") return RoleName::Merger;
    if (name == "judger") return RoleName::Judger;
    if (name == "expander") return RoleName::Expander;
    if (name == "conceptualizer") return RoleName::Conceptualizer;
    if (name == "enricher") return RoleName::Enricher;
    if (name == "granularity_judge") return RoleName::GranularityJudge;
    throw Error(ErrorCode::ConfigInvalid, "unknown role '" + name + "'");
}

double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::to_string(u.size()) + " vs " + std::to_string(v.size()));
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) {
        throw Error(ErrorCode::ZeroVector, "cosine of an all-zero vector");
    }
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
    return cosine_similarity(u.values, v.values);
}

// ---------------------------------------------------------------------------
// Mock chat
// ---------------------------------------------------------------------------

namespace {

std::string response_to_text(const nlohmann::json& value) {
    if (value.is_string()) return value.get<std::string>();
    return value.dump();
}

} // namespace

MockChatProvider::MockChatProvider(nlohmann::json fixtures, uint64_t /*seed*/) {
    if (fixtures.is_null() || !fixtures.contains("chat")) return;
    const nlohmann::json& chat = fixtures["chat"];
    if (!chat.is_object()) {
        throw Error(ErrorCode::ConfigInvalid, "chat fixtures must be an object keyed by template");
    }
    for (auto it = chat.begin(); it != chat.end(); ++it) {
        std::vector<Rule> list;
        if (!it.value().is_array()) {
            throw Error(ErrorCode::ConfigInvalid,
                        "fixture for template '" + it.key() + "' must be an array of rules");
        }
        for (const auto& jr : it.value()) {
            Rule rule;
            if (jr.contains("match")) {
                for (auto mit = jr["match"].begin(); mit != jr["match"].end(); ++mit) {
                    rule.match[mit.key()] = mit.value().is_string()
                                                ? mit.value().get<std::string>()
                                                : mit.value().dump();
                }
            }
            rule.is_default = jr.value("default", false);
            rule.one_shot = rule.match.empty() && !rule.is_default;
            if (!jr.contains("response")) {
                throw Error(ErrorCode::ConfigInvalid,
                            "fixture rule for '" + it.key() + "' missing response");
            }
            rule.response = response_to_text(jr["response"]);
            list.push_back(std::move(rule));
        }
        rules_[it.key()] = std::move(list);
    }
}

ChatReply MockChatProvider::complete(const std::string& model_id,
                                     std::optional<double> /*temperature*/,
                                     const std::string& /*prompt*/,
                                     const ProviderRequest& request) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = rules_.find(request.template_id);
    if (it == rules_.end()) {
        throw Error(ErrorCode::MissingFixture,
                    "no fixture script for template '" + request.template_id + "'");
    }
    for (Rule& rule : it->second) {
        if (!rule.match.empty()) {
            bool all = true;
            for (const auto& [key, want] : rule.match) {
                std::string got;
                if (key == "_model") {
                    got = model_id;
                } else if (key == "_role") {
                    got = role_name(request.role.name);
                } else {
                    auto vit = request.variables.find(key);
                    if (vit == request.variables.end()) {
                        all = false;
                        break;
                    }
                    got = vit->second;
                }
                if (got != want) {
                    all = false;
                    break;
                }
            }
            if (all) return {rule.response, 0};
            continue;
        }
        if (rule.one_shot) {
            if (rule.consumed) continue;
            rule.consumed = true;
            return {rule.response, 0};
        }
        if (rule.is_default) return {rule.response, 0};
    }
    throw Error(ErrorCode::MissingFixture,
                "no fixture rule fired for template '" + request.template_id + "'");
}

// ---------------------------------------------------------------------------
// Mock embeddings
// ---------------------------------------------------------------------------

MockEmbedProvider::MockEmbedProvider(nlohmann::json fixtures, uint64_t seed,
                                     int fallback_dimension)
    : dimension_(fallback_dimension), seed_(seed) {
    if (fixtures.is_null()) return;
    const nlohmann::json* emb = nullptr;
    if (fixtures.contains("embeddings")) emb = &fixtures["embeddings"];
    if (!emb) return;
    if (emb->contains("dimension")) dimension_ = (*emb)["dimension"].get<int>();
    if (emb->contains("vectors")) {
        for (auto it = (*emb)["vectors"].begin(); it != (*emb)["vectors"].end(); ++it) {
            auto vec = it.value().get<std::vector<double>>();
            if (static_cast<int>(vec.size()) != dimension_) {
                throw Error(ErrorCode::DimensionMismatch,
                            "pinned vector for '" + it.key() + "' has wrong length");
            }
            pinned_[it.key()] = std::move(vec);
        }
    }
    if (emb->contains("sparse")) {
        for (auto it = (*emb)["sparse"].begin(); it != (*emb)["sparse"].end(); ++it) {
            std::vector<double> vec(static_cast<size_t>(dimension_), 0.0);
            for (auto cit = it.value().begin(); cit != it.value().end(); ++cit) {
                int idx = std::stoi(cit.key());
                if (idx < 0 || idx >= dimension_) {
                    throw Error(ErrorCode::DimensionMismatch,
                                "sparse component " + cit.key() + " out of range");
                }
                vec[static_cast<size_t>(idx)] = cit.value().get<double>();
            }
            pinned_[it.key()] = std::move(vec);
        }
    }
}

std::vector<double> MockEmbedProvider::hash_unit_vector(uint64_t seed, const std::string& text,
                                                        int dim) {
    uint64_t h = 14695981039346656037ull;
    auto mix = [&h](uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xFF;
            h *= 1099511628211ull;
        }
    };
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    mix(seed);
    std::mt19937_64 rng(h);
    std::vector<double> v(static_cast<size_t>(dim));
    double norm_sq = 0.0;
    for (auto& x : v) {
        // top 53 bits -> [0,1); plain mt output keeps this portable
        double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
        x = 2.0 * u - 1.0;
        norm_sq += x * x;
    }
    double norm = std::sqrt(norm_sq);
    if (norm == 0.0) {
        v[0] = 1.0;
        return v;
    }
    for (auto& x : v) x /= norm;
    return v;
}

std::vector<std::vector<double>> MockEmbedProvider::embed(
    const std::string& /*model_id*/, const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto it = pinned_.find(t);
        if (it != pinned_.end()) {
            out.push_back(it->second);
        } else {
            out.push_back(hash_unit_vector(seed_, t, dimension_));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// HTTP providers
// ---------------------------------------------------------------------------

namespace {

std::string env_or(const std::string& var, const std::string& fallback) {
    const char* v = std::getenv(var.c_str());
    return v && *v ? v : fallback;
}

struct SplitUrl {
    std::string host; // scheme://host[:port]
    std::string path; // leading path, no trailing slash
};

SplitUrl split_base_url(const std::string& base) {
    std::string rest = base;
    size_t scheme = rest.find("://");
    size_t path_from = scheme == std::string::npos ? 0 : scheme + 3;
    size_t slash = rest.find('/', path_from);
    SplitUrl out;
    if (slash == std::string::npos) {
        out.host = rest;
    } else {
        out.host = rest.substr(0, slash);
        out.path = rest.substr(slash);
        while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    }
    return out;
}

nlohmann::json http_post_json(const HttpProviderSettings& settings, const std::string& endpoint,
                              const nlohmann::json& body) {
    std::string base = env_or(settings.base_url_env, "https://api.openai.com/v1");
    std::string key = env_or(settings.api_key_env, "");
    SplitUrl url = split_base_url(base);

    httplib::Client client(url.host);
    client.set_connection_timeout(settings.timeout_seconds, 0);
    client.set_read_timeout(settings.timeout_seconds, 0);
    httplib::Headers headers;
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

    auto res = client.Post(url.path + endpoint, headers, body.dump(), "application/json");
    if (!res) {
        throw TransientProviderError("no response from " + url.host);
    }
    if (res->status == 429 || res->status >= 500) {
        throw TransientProviderError("status " + std::to_string(res->status));
    }
    if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorCode::ProviderUnavailable,
                    "status " + std::to_string(res->status) + ": " + res->body);
    }
    nlohmann::json doc = nlohmann::json::parse(res->body, nullptr, false);
    if (doc.is_discarded()) {
        throw Error(ErrorCode::MalformedResponse, "provider returned non-JSON body");
    }
    return doc;
}

} // namespace

HttpChatProvider::HttpChatProvider(HttpProviderSettings settings)
    : settings_(std::move(settings)) {}

HttpChatProvider::HttpChatProvider(HttpProviderSettings default_settings,
                                   std::map<std::string, HttpProviderSettings> per_model)
    : settings_(std::move(default_settings)), per_model_(std::move(per_model)) {}

const HttpProviderSettings& HttpChatProvider::settings_for(const std::string& model_id) const {
    auto it = per_model_.find(model_id);
    return it == per_model_.end() ? settings_ : it->second;
}

ChatReply HttpChatProvider::complete(const std::string& model_id,
                                     std::optional<double> temperature,
                                     const std::string& prompt,
                                     const ProviderRequest& /*request*/) {
    nlohmann::json body = {
        {"model", model_id},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
    };
    if (temperature) body["temperature"] = *temperature;
    auto start = std::chrono::steady_clock::now();
    nlohmann::json doc = http_post_json(settings_for(model_id), "/chat/completions", body);
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();
    try {
        std::string text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
        return {text, elapsed};
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::MalformedResponse, "unexpected chat completion shape");
    }
}

HttpEmbedProvider::HttpEmbedProvider(HttpProviderSettings settings, std::string model_id,
                                     int dimension)
    : settings_(std::move(settings)), model_id_(std::move(model_id)), dimension_(dimension) {}

std::vector<std::vector<double>> HttpEmbedProvider::embed(
    const std::string& model_id, const std::vector<std::string>& texts) {
    nlohmann::json body = {
        {"model", model_id.empty() ? model_id_ : model_id},
        {"input", texts},
    };
    nlohmann::json doc = http_post_json(settings_, "/embeddings", body);
    std::vector<std::vector<double>> out(texts.size());
    try {
        for (const auto& item : doc.at("data")) {
            size_t idx = item.at("index").get<size_t>();
            if (idx >= out.size()) {
                throw Error(ErrorCode::MalformedResponse, "embedding index out of range");
            }
            out[idx] = item.at("embedding").get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::MalformedResponse, "unexpected embeddings shape");
    }
    for (const auto& v : out) {
        if (v.empty()) throw Error(ErrorCode::MalformedResponse, "missing embedding in batch");
    }
    return out;
}

} // namespace histax
