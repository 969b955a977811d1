#pragma once

// Shared helpers for the unit and acceptance suites: mock gateway wiring,
// seeded random trees, and the independent brute-force oracles the expected
// values are frozen against.

#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "histax/gateway.hpp"
#include "histax/provider.hpp"
#include "histax/taxonomy.hpp"

namespace testsupport {

#ifndef HISTAX_TEMPLATES_DIR
#define HISTAX_TEMPLATES_DIR "templates"
#endif

struct MockRig {
    std::shared_ptr<histax::MockChatProvider> chat;
    std::shared_ptr<histax::MockEmbedProvider> embed;
    std::shared_ptr<histax::TranscriptWriter> transcript;
    std::unique_ptr<histax::ProviderGateway> gateway;
};

inline MockRig make_mock(nlohmann::json fixtures, uint64_t seed = 7, int dim = 16,
                         int retry_max = 3) {
    MockRig rig;
    rig.chat = std::make_shared<histax::MockChatProvider>(fixtures, seed);
    rig.embed = std::make_shared<histax::MockEmbedProvider>(fixtures, seed, dim);
    rig.transcript = std::make_shared<histax::TranscriptWriter>();
    histax::GatewayOptions options;
    options.retry_max = retry_max;
    options.retry_backoff_ms = 0;
    options.template_dir = HISTAX_TEMPLATES_DIR;
    rig.gateway = std::make_unique<histax::ProviderGateway>(rig.chat, rig.embed, options,
                                                            rig.transcript);
    return rig;
}

inline histax::AgentRole make_role(histax::RoleName name, const std::string& model = "mock") {
    histax::AgentRole role;
    role.name = name;
    role.model_id = model;
    role.temperature = 0.0;
    return role;
}

// Random single-domain tree: node 0 is the root, every later node picks a
// uniform parent among its predecessors.
inline histax::Taxonomy random_tree(std::mt19937& rng, int node_count,
                                    const std::string& domain = "Politics") {
    histax::Taxonomy tax;
    histax::TaxonomyNode root;
    root.id = "t0";
    root.label = domain + " root";
    root.domain = domain;
    tax.add_domain_root(std::move(root), "random fixture tree");
    for (int i = 1; i < node_count; ++i) {
        std::uniform_int_distribution<int> pick(0, i - 1);
        histax::TaxonomyNode node;
        node.id = "t" + std::to_string(i);
        node.label = "node " + std::to_string(i);
        node.domain = domain;
        tax.add_node(std::move(node), "t" + std::to_string(pick(rng)));
    }
    return tax;
}

// Naive parent-walk path, independent of Taxonomy::path_to_root's code path.
inline std::vector<std::string> naive_path(const histax::Taxonomy& tax, const std::string& id) {
    std::vector<std::string> up;
    std::string cur = id;
    while (true) {
        up.push_back(cur);
        const auto& node = tax.node(cur);
        if (!node.parent) break;
        cur = *node.parent;
    }
    return {up.rbegin(), up.rend()};
}

// LCA depth by comparing path prefixes.
inline int naive_lca_depth(const histax::Taxonomy& tax, const std::string& a,
                           const std::string& b) {
    auto pa = naive_path(tax, a);
    auto pb = naive_path(tax, b);
    size_t shared = 0;
    while (shared < pa.size() && shared < pb.size() && pa[shared] == pb[shared]) ++shared;
    return static_cast<int>(shared);
}

// Plain-loop cosine, independent of the provider module.
inline double naive_cosine(const std::vector<double>& u, const std::vector<double>& v) {
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

// Explicit O(n^2) concordant/discordant/tie counting tau-b.
inline std::optional<double> brute_force_tau_b(const std::vector<double>& x,
                                               const std::vector<double>& y) {
    size_t n = x.size();
    long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            bool tie_x = x[i] == x[j];
            bool tie_y = y[i] == y[j];
            if (tie_x) ++ties_x;
            if (tie_y) ++ties_y;
            if (tie_x || tie_y) continue;
            double prod = (x[i] - x[j]) * (y[i] - y[j]);
            if (prod > 0) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    long long n0 = static_cast<long long>(n) * (static_cast<long long>(n) - 1) / 2;
    long long den_x = n0 - ties_x;
    long long den_y = n0 - ties_y;
    if (den_x == 0 || den_y == 0) return std::nullopt;
    if (den_x == den_y) {
        return static_cast<double>(concordant - discordant) / static_cast<double>(den_x);
    }
    return static_cast<double>(concordant - discordant) /
           (std::sqrt(static_cast<double>(den_x)) * std::sqrt(static_cast<double>(den_y)));
}

} // namespace testsupport
