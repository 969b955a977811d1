#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "histax/error.hpp"

namespace histax {

enum class Provenance { Induced, Expanded, Enriched, Ingested };

const char* provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

struct TaxonomyNode {
    std::string id;
    std::string label;
    std::string definition;
    std::string domain;
    std::optional<std::string> parent;   // nullopt for a domain root
    Provenance provenance = Provenance::Ingested;
    std::vector<std::string> aliases;    // labels folded in by merges; audit only

    bool is_root() const { return !parent.has_value(); }
};

// Text a node is embedded as: "label：definition" when the definition is
// non-empty, else the label alone.
std::string node_embed_text(const TaxonomyNode& node);

// Root handling for path-anchored quantities. Per-domain treats each domain
// tree independently (domain root has depth 1). Global inserts a virtual
// root above the domain roots: it takes depth 1 and every real depth
// shifts by +1.
enum class RootMode { PerDomain, Global };

struct StructuralStats {
    int max_depth = 0;
    double avg_depth = 0.0;     // mean over leaf nodes
    double branch_factor = 0.0; // total children / nodes with >=1 child
};

// A forest of concept trees, one per domain. Node ids are unique across the
// whole forest. Mutations keep the tree invariants or throw without
// modifying anything.
class Taxonomy {
public:
    static const std::string kVirtualRootId;

    Taxonomy() = default;

    // Creates a domain tree. The root node's parent must be empty.
    // Registers the domain's description for serialization.
    const std::string& add_domain_root(TaxonomyNode node, const std::string& description);

    // Attaches `node` under parent_id. Passing kVirtualRootId makes the node
    // a domain root (its domain must not already have one).
    const std::string& add_node(TaxonomyNode node, const std::string& parent_id);

    bool contains(const std::string& id) const { return nodes_.count(id) > 0; }
    const TaxonomyNode& node(const std::string& id) const;
    size_t node_count() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }

    // Domain names in insertion order.
    const std::vector<std::string>& domain_order() const { return domain_order_; }
    bool has_domain(const std::string& domain) const { return domain_root_.count(domain) > 0; }
    const std::string& domain_root(const std::string& domain) const;
    const std::string& domain_description(const std::string& domain) const;

    // Children ids in insertion order; empty for leaves.
    const std::vector<std::string>& children(const std::string& id) const;

    // All node ids, insertion order (deterministic serialization order).
    const std::vector<std::string>& node_ids() const { return insertion_order_; }
    std::vector<std::string> node_ids_in_domain(const std::string& domain) const;

    // Ordered id sequence from the root to `id`, inclusive. Global mode
    // prepends the virtual root id.
    std::vector<std::string> path_to_root(const std::string& id,
                                          RootMode mode = RootMode::PerDomain) const;

    int depth(const std::string& id, RootMode mode = RootMode::PerDomain) const;

    // Depth of the deepest node shared by both root paths.
    int lca_depth(const std::string& a, const std::string& b,
                  RootMode mode = RootMode::PerDomain) const;

    // 2 * lca_depth / (depth(a) + depth(b)); 1 exactly when a == b.
    double structure_weight(const std::string& a, const std::string& b,
                            RootMode mode = RootMode::PerDomain) const;

    // Reparents drop's children under keep, folds drop's label and aliases
    // into keep's alias list, removes drop. When the two nodes live in
    // different domains, the moved subtree is relabeled to keep's domain.
    void merge_nodes(const std::string& keep_id, const std::string& drop_id);

    // Moves `child` under `new_parent`. Used by the expansion edits.
    void reparent(const std::string& child_id, const std::string& new_parent_id);

    bool is_descendant(const std::string& maybe_descendant, const std::string& ancestor) const;

    StructuralStats structural_stats(RootMode mode = RootMode::PerDomain) const;

    // Machine check of every structural invariant. Returns human-readable
    // violations; empty means healthy. strict_domains additionally requires
    // every domain to be one of the canonical eight.
    std::vector<std::string> validate(bool strict_domains = false) const;

    // Fresh id of the form n0001, skipping any ids already present.
    std::string allocate_id();

    nlohmann::json to_json() const;
    static Taxonomy from_json(const nlohmann::json& doc);

    void save(const std::string& path) const;
    static Taxonomy load(const std::string& path);

private:
    void insert_unattached(TaxonomyNode node);
    const TaxonomyNode& require(const std::string& id) const;

    std::unordered_map<std::string, TaxonomyNode> nodes_;
    std::unordered_map<std::string, std::vector<std::string>> children_;
    std::unordered_map<std::string, std::string> domain_root_;
    std::unordered_map<std::string, std::string> domain_desc_;
    std::vector<std::string> domain_order_;
    std::vector<std::string> insertion_order_;
    uint64_t id_counter_ = 0;
};

} // namespace histax
