#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "histax/config.hpp"
#include "histax/domains.hpp"
#include "histax/gateway.hpp"
#include "histax/taxonomy.hpp"

namespace histax {

struct DuplicatePair {
    std::string a; // id, lexicographically smaller
    std::string b;
    double similarity = 0.0;
};

// All unordered pairs among `node_ids` with cosine strictly above h, sorted
// by descending similarity (ties: id order) so resolution order is fixed.
std::vector<DuplicatePair> find_duplicate_pairs(const Taxonomy& taxonomy,
                                                const std::vector<std::string>& node_ids,
                                                double h, ProviderGateway& gateway);

enum class ResolutionOutcome { Merged, SkippedStale };

// Asks the judger which node survives, then merges the other into it.
// Returns SkippedStale when either side was already merged away. On a judger
// that stays malformed, falls back to keeping the node with more
// descendants (ties: label, then id) and logs that the fallback fired.
ResolutionOutcome resolve_duplicate(Taxonomy& taxonomy, const DuplicatePair& pair,
                                    const AgentRole& judger, ProviderGateway& gateway,
                                    const std::string& scope,
                                    std::vector<nlohmann::json>* edit_log,
                                    std::vector<std::string>* warnings);

// The three constrained expansion edits.
struct NewSibling {
    std::string label;
    std::string definition;
    std::optional<std::string> parent; // resolved node id; top layer defaults to the root
};
struct NewIntermediate {
    std::string label;
    std::string definition;
    std::string parent;                 // node id within the target layer
    std::vector<std::string> children;  // node ids from the layer below
};
struct ReassignChild {
    std::string child;      // node id from the layer below
    std::string new_parent; // node id in the (possibly grown) target layer
};
struct LayerEdits {
    std::vector<NewSibling> siblings;
    std::vector<NewIntermediate> intermediates;
    std::vector<ReassignChild> reassignments;
    std::vector<std::string> dropped; // invalid edits, with reasons
};

// One expander call over a layer: returns the validated edit set. Edits
// referencing unknown nodes are dropped individually and reported in
// `dropped`.
LayerEdits expand_layer(const Taxonomy& taxonomy, const std::vector<std::string>& layer_nodes,
                        const DomainSpec& domain, const AgentRole& expander,
                        ProviderGateway& gateway);

// Applies an edit set; every applied edit lands in the log.
void apply_layer_edits(Taxonomy& taxonomy, const std::string& domain, const LayerEdits& edits,
                       std::vector<nlohmann::json>* edit_log,
                       std::vector<std::string>* warnings);

struct ExpansionOutput {
    Taxonomy taxonomy;
    std::vector<nlohmann::json> edit_log;
    std::vector<std::string> warnings;
    int within_domain_merges = 0;
    int cross_domain_merges = 0;
    int global_within_merges = 0;
    int global_cross_merges = 0;
};

// within-domain dedup, cross-domain dedup, top-down layer sweep per domain,
// then a final global dedup over everything introduced.
ExpansionOutput run_expansion(const Taxonomy& input, const RunConfig& config,
                              ProviderGateway& gateway);

// Mechanically replays a recorded edit log on a checkpoint.
Taxonomy replay_edit_log(Taxonomy base, const std::vector<nlohmann::json>& edit_log);

// Exhaustive pairwise check that no surviving pair (domain roots excluded)
// exceeds h; returns offending pairs.
std::vector<DuplicatePair> find_surviving_duplicates(const Taxonomy& taxonomy, double h,
                                                     ProviderGateway& gateway);

} // namespace histax
