#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "histax/provider.hpp"

namespace histax {

// One run's knobs: role-to-model bindings, the shared similarity threshold,
// retry/rate limits, and paths. A JSON snapshot of the effective config is
// written into every run directory.
struct RunConfig {
    double threshold = 0.6;       // the single h shared by dedup and metrics
    int frequency_threshold = 5;  // strict > for frequent-candidate collection
    int retry_max = 3;
    int retry_backoff_ms = 250;
    int parallelism = 4;
    double rate_limit_per_minute = 0.0;
    std::string embedding_model = "text-embedding-3-small";
    int embedding_dimension = 64; // used by the mock; live models define theirs
    std::string template_dir = "templates";
    HttpProviderSettings http; // default endpoint credentials
    std::map<std::string, HttpProviderSettings> providers; // per-model overrides

    std::map<RoleName, std::vector<AgentRole>> roles;

    // First binding for a single-model role; throws if unbound.
    const AgentRole& role(RoleName name) const;
    // All bindings for fan-out roles (extractor, generator).
    const std::vector<AgentRole>& role_list(RoleName name) const;

    static RunConfig from_json(const nlohmann::json& doc);
    static RunConfig load(const std::string& path);
    nlohmann::json to_json() const;

    // The shipped default: three extractor/generator models, the strongest
    // model on merge/judge/expand/enrich, a mid-tier model elsewhere.
    static RunConfig defaults();
};

} // namespace histax
