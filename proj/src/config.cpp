#include "histax/config.hpp"

#include <nlohmann/json.hpp>

#include "histax/jsonio.hpp"

namespace histax {

const AgentRole& RunConfig::role(RoleName name) const {
    return role_list(name).front();
}

const std::vector<AgentRole>& RunConfig::role_list(RoleName name) const {
    auto it = roles.find(name);
    if (it == roles.end() || it->second.empty()) {
        throw Error(ErrorCode::ConfigInvalid,
                    std::string("no model bound to role '") + role_name(name) + "'");
    }
    return it->second;
}

namespace {

AgentRole parse_role(RoleName name, const nlohmann::json& jr) {
    AgentRole role;
    role.name = name;
    role.model_id = jr.at("model").get<std::string>();
    if (jr.contains("temperature") && !jr["temperature"].is_null()) {
        role.temperature = jr["temperature"].get<double>();
        if (*role.temperature < 0.0) {
            throw Error(ErrorCode::ConfigInvalid, "temperature must be >= 0");
        }
    }
    return role;
}

} // namespace

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
    RunConfig cfg = defaults();
    cfg.roles.clear();
    if (doc.contains("threshold")) cfg.threshold = doc["threshold"].get<double>();
    if (cfg.threshold <= 0.0 || cfg.threshold >= 1.0) {
        throw Error(ErrorCode::ConfigInvalid, "threshold must lie in (0,1)");
    }
    if (doc.contains("frequency_threshold")) {
        cfg.frequency_threshold = doc["frequency_threshold"].get<int>();
        if (cfg.frequency_threshold < 1) {
            throw Error(ErrorCode::ConfigInvalid, "frequency_threshold must be >= 1");
        }
    }
    if (doc.contains("retry_max")) cfg.retry_max = doc["retry_max"].get<int>();
    if (doc.contains("retry_backoff_ms")) cfg.retry_backoff_ms = doc["retry_backoff_ms"].get<int>();
    if (doc.contains("parallelism")) cfg.parallelism = doc["parallelism"].get<int>();
    if (doc.contains("rate_limit_per_minute")) {
        cfg.rate_limit_per_minute = doc["rate_limit_per_minute"].get<double>();
    }
    if (doc.contains("embedding")) {
        const auto& je = doc["embedding"];
        if (je.contains("model")) cfg.embedding_model = je["model"].get<std::string>();
        if (je.contains("dimension")) cfg.embedding_dimension = je["dimension"].get<int>();
    }
    if (doc.contains("templates")) cfg.template_dir = doc["templates"].get<std::string>();
    auto parse_provider = [](const nlohmann::json& jp, HttpProviderSettings base) {
        if (jp.contains("base_url_env")) base.base_url_env = jp["base_url_env"];
        if (jp.contains("api_key_env")) base.api_key_env = jp["api_key_env"];
        if (jp.contains("timeout_seconds")) base.timeout_seconds = jp["timeout_seconds"];
        return base;
    };
    if (doc.contains("provider")) {
        cfg.http = parse_provider(doc["provider"], cfg.http);
    }
    if (doc.contains("providers")) {
        for (auto it = doc["providers"].begin(); it != doc["providers"].end(); ++it) {
            cfg.providers[it.key()] = parse_provider(it.value(), cfg.http);
        }
    }
    if (!doc.contains("roles") || !doc["roles"].is_object()) {
        throw Error(ErrorCode::ConfigInvalid, "config must bind roles to models");
    }
    for (auto it = doc["roles"].begin(); it != doc["roles"].end(); ++it) {
        RoleName name = role_from_name(it.key());
        std::vector<AgentRole> list;
        if (it.value().is_array()) {
            for (const auto& jr : it.value()) list.push_back(parse_role(name, jr));
        } else {
            list.push_back(parse_role(name, it.value()));
        }
        if (list.empty()) {
            throw Error(ErrorCode::ConfigInvalid, "role '" + it.key() + "' has no bindings");
        }
        cfg.roles[name] = std::move(list);
    }
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    return from_json(load_json_file(path));
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json jroles = nlohmann::json::object();
    for (const auto& [name, list] : roles) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& r : list) {
            nlohmann::json jr = {{"model", r.model_id}};
            jr["temperature"] =
                r.temperature ? nlohmann::json(*r.temperature) : nlohmann::json(nullptr);
            entries.push_back(std::move(jr));
        }
        if (entries.size() == 1) {
            jroles[role_name(name)] = entries.front();
        } else {
            jroles[role_name(name)] = std::move(entries);
        }
    }
    auto provider_json = [](const HttpProviderSettings& p) {
        return nlohmann::json{{"base_url_env", p.base_url_env},
                              {"api_key_env", p.api_key_env},
                              {"timeout_seconds", p.timeout_seconds}};
    };
    nlohmann::json out = {
        {"threshold", threshold},
        {"frequency_threshold", frequency_threshold},
        {"retry_max", retry_max},
        {"retry_backoff_ms", retry_backoff_ms},
        {"parallelism", parallelism},
        {"rate_limit_per_minute", rate_limit_per_minute},
        {"embedding", {{"model", embedding_model}, {"dimension", embedding_dimension}}},
        {"templates", template_dir},
        {"provider", provider_json(http)},
        {"roles", std::move(jroles)},
    };
    if (!providers.empty()) {
        nlohmann::json jp = nlohmann::json::object();
        for (const auto& [model, settings] : providers) jp[model] = provider_json(settings);
        out["providers"] = std::move(jp);
    }
    return out;
}

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    auto bind = [&cfg](RoleName name, const std::string& model,
                       std::optional<double> temperature) {
        AgentRole r;
        r.name = name;
        r.model_id = model;
        r.temperature = temperature;
        cfg.roles[name].push_back(std::move(r));
    };
    const std::string strongest = "gpt-5-2025-08-07";
    const std::string mid = "gpt-4o-2024-11-20";
    for (const std::string& m :
         {std::string("DeepSeek-V3-0324"), std::string("qwen-plus-2025-07-28"), mid}) {
        bind(RoleName::Extractor, m, 0.0);
        bind(RoleName::Generator, m, 0.0);
    }
    bind(RoleName::Classifier, mid, 0.0);
    bind(RoleName::Conceptualizer, mid, 0.0);
    bind(RoleName::GranularityJudge, mid, 0.0);
    // strongest model: temperature left to the provider default
    bind(RoleName::Merger, strongest, std::nullopt);
    bind(RoleName::Judger, strongest, std::nullopt);
    bind(RoleName::Expander, strongest, std::nullopt);
    bind(RoleName::Enricher, strongest, std::nullopt);
    return cfg;
}

} // namespace histax
