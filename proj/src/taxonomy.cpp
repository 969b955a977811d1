#include "histax/taxonomy.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "histax/domains.hpp"
#include "histax/jsonio.hpp"

namespace histax {

const std::string Taxonomy::kVirtualRootId = "__virtual_root__";

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::Induced:  return "induced";
        case Provenance::Expanded: return "expanded";
        case Provenance::Enriched: return "enriched";
        case Provenance::Ingested: return "ingested";
    }
    return "ingested";
}

Provenance provenance_from_name(const std::string& name) {
    if (name == "induced") return Provenance::Induced;
    if (name == "expanded") return Provenance::Expanded;
    if (name == "enriched") return Provenance::Enriched;
    if (name == "ingested") return Provenance::Ingested;
    throw Error(ErrorCode::SchemaViolation, "unknown provenance '" + name + "'");
}

std::string node_embed_text(const TaxonomyNode& node) {
    if (node.definition.empty()) return node.label;
    return node.label + "：" + node.definition;
}

namespace {

std::string trim_copy(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

const std::string& Taxonomy::add_domain_root(TaxonomyNode node, const std::string& description) {
    node.parent.reset();
    domain_desc_[node.domain] = description;
    return add_node(std::move(node), kVirtualRootId);
}

const std::string& Taxonomy::add_node(TaxonomyNode node, const std::string& parent_id) {
    if (node.id.empty()) {
        throw Error(ErrorCode::SchemaViolation, "node id must be non-empty");
    }
    if (trim_copy(node.label).empty()) {
        throw Error(ErrorCode::SchemaViolation, "node label must be non-empty: id " + node.id);
    }
    if (nodes_.count(node.id)) {
        throw Error(ErrorCode::DuplicateId, "node id '" + node.id + "' already present");
    }
    if (parent_id == kVirtualRootId) {
        if (domain_root_.count(node.domain)) {
            throw Error(ErrorCode::DomainMismatch,
                        "domain '" + node.domain + "' already has a root");
        }
        node.parent.reset();
        domain_root_[node.domain] = node.id;
        domain_order_.push_back(node.domain);
        if (!domain_desc_.count(node.domain)) domain_desc_[node.domain] = "";
    } else {
        auto it = nodes_.find(parent_id);
        if (it == nodes_.end()) {
            throw Error(ErrorCode::UnknownParent, "parent '" + parent_id + "' not found");
        }
        if (it->second.domain != node.domain) {
            throw Error(ErrorCode::DomainMismatch,
                        "node domain '" + node.domain + "' != parent domain '" +
                            it->second.domain + "'");
        }
        node.parent = parent_id;
        children_[parent_id].push_back(node.id);
    }
    insertion_order_.push_back(node.id);
    auto [pos, _] = nodes_.emplace(node.id, std::move(node));
    return pos->second.id;
}

const TaxonomyNode& Taxonomy::node(const std::string& id) const {
    return require(id);
}

const TaxonomyNode& Taxonomy::require(const std::string& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) {
        throw Error(ErrorCode::UnknownNode, "node '" + id + "' not found");
    }
    return it->second;
}

const std::string& Taxonomy::domain_root(const std::string& domain) const {
    auto it = domain_root_.find(domain);
    if (it == domain_root_.end()) {
        throw Error(ErrorCode::UnknownNode, "no tree for domain '" + domain + "'");
    }
    return it->second;
}

const std::string& Taxonomy::domain_description(const std::string& domain) const {
    static const std::string empty;
    auto it = domain_desc_.find(domain);
    return it == domain_desc_.end() ? empty : it->second;
}

const std::vector<std::string>& Taxonomy::children(const std::string& id) const {
    static const std::vector<std::string> none;
    require(id);
    auto it = children_.find(id);
    return it == children_.end() ? none : it->second;
}

std::vector<std::string> Taxonomy::node_ids_in_domain(const std::string& domain) const {
    std::vector<std::string> out;
    for (const auto& id : insertion_order_) {
        if (nodes_.at(id).domain == domain) out.push_back(id);
    }
    return out;
}

std::vector<std::string> Taxonomy::path_to_root(const std::string& id, RootMode mode) const {
    std::vector<std::string> path;
    const std::string* cur = &require(id).id;
    size_t guard = nodes_.size() + 1;
    while (true) {
        if (path.size() > guard) {
            throw Error(ErrorCode::WouldCreateCycle, "cycle detected walking up from '" + id + "'");
        }
        path.push_back(*cur);
        const TaxonomyNode& n = nodes_.at(*cur);
        if (!n.parent) break;
        cur = &require(*n.parent).id;
    }
    if (mode == RootMode::Global) path.push_back(kVirtualRootId);
    std::reverse(path.begin(), path.end());
    return path;
}

int Taxonomy::depth(const std::string& id, RootMode mode) const {
    return static_cast<int>(path_to_root(id, mode).size());
}

int Taxonomy::lca_depth(const std::string& a, const std::string& b, RootMode mode) const {
    const TaxonomyNode& na = require(a);
    const TaxonomyNode& nb = require(b);
    if (na.domain != nb.domain) {
        if (mode == RootMode::PerDomain) {
            throw Error(ErrorCode::NoCommonRoot,
                        "nodes in domains '" + na.domain + "' and '" + nb.domain + "'");
        }
        return 1; // only the virtual root is shared
    }
    auto pa = path_to_root(a, mode);
    auto pb = path_to_root(b, mode);
    size_t shared = 0;
    size_t limit = std::min(pa.size(), pb.size());
    while (shared < limit && pa[shared] == pb[shared]) ++shared;
    return static_cast<int>(shared);
}

double Taxonomy::structure_weight(const std::string& a, const std::string& b,
                                  RootMode mode) const {
    int lca = lca_depth(a, b, mode);
    int da = depth(a, mode);
    int db = depth(b, mode);
    return 2.0 * static_cast<double>(lca) / static_cast<double>(da + db);
}

bool Taxonomy::is_descendant(const std::string& maybe_descendant,
                             const std::string& ancestor) const {
    require(ancestor);
    const TaxonomyNode* cur = &require(maybe_descendant);
    size_t guard = nodes_.size() + 1, steps = 0;
    while (cur->parent) {
        if (++steps > guard) {
            throw Error(ErrorCode::WouldCreateCycle, "cycle detected under '" + ancestor + "'");
        }
        if (*cur->parent == ancestor) return true;
        cur = &nodes_.at(*cur->parent);
    }
    return false;
}

void Taxonomy::merge_nodes(const std::string& keep_id, const std::string& drop_id) {
    TaxonomyNode& keep = const_cast<TaxonomyNode&>(require(keep_id));
    const TaxonomyNode drop = require(drop_id); // copy; we erase the original
    if (keep_id == drop_id) {
        throw Error(ErrorCode::WouldCreateCycle, "cannot merge a node into itself");
    }
    if (is_descendant(keep_id, drop_id)) {
        throw Error(ErrorCode::WouldCreateCycle,
                    "keep '" + keep_id + "' is a descendant of drop '" + drop_id + "'");
    }

    // Reparent drop's children (order preserved).
    std::vector<std::string> moved = children(drop_id);
    for (const auto& child_id : moved) {
        TaxonomyNode& child = nodes_.at(child_id);
        child.parent = keep_id;
        children_[keep_id].push_back(child_id);
    }
    children_.erase(drop_id);

    // Cross-domain merge relabels the moved subtree.
    if (keep.domain != drop.domain) {
        std::vector<std::string> stack = moved;
        while (!stack.empty()) {
            std::string id = stack.back();
            stack.pop_back();
            nodes_.at(id).domain = keep.domain;
            for (const auto& c : children(id)) stack.push_back(c);
        }
    }

    keep.aliases.push_back(drop.label);
    for (const auto& a : drop.aliases) keep.aliases.push_back(a);

    // Detach drop from its own parent / domain registry.
    if (drop.parent) {
        auto& sibs = children_[*drop.parent];
        sibs.erase(std::remove(sibs.begin(), sibs.end(), drop_id), sibs.end());
    } else {
        domain_root_.erase(drop.domain);
        domain_order_.erase(std::remove(domain_order_.begin(), domain_order_.end(), drop.domain),
                            domain_order_.end());
    }
    insertion_order_.erase(
        std::remove(insertion_order_.begin(), insertion_order_.end(), drop_id),
        insertion_order_.end());
    nodes_.erase(drop_id);
}

void Taxonomy::reparent(const std::string& child_id, const std::string& new_parent_id) {
    TaxonomyNode& child = const_cast<TaxonomyNode&>(require(child_id));
    const TaxonomyNode& parent = require(new_parent_id);
    if (child_id == new_parent_id || is_descendant(new_parent_id, child_id)) {
        throw Error(ErrorCode::WouldCreateCycle,
                    "reparenting '" + child_id + "' under its own subtree");
    }
    if (parent.domain != child.domain) {
        throw Error(ErrorCode::DomainMismatch,
                    "cannot reparent across domains without a merge");
    }
    if (!child.parent) {
        throw Error(ErrorCode::InvalidEdit, "cannot reparent a domain root");
    }
    auto& old_sibs = children_[*child.parent];
    old_sibs.erase(std::remove(old_sibs.begin(), old_sibs.end(), child_id), old_sibs.end());
    child.parent = new_parent_id;
    children_[new_parent_id].push_back(child_id);
}

StructuralStats Taxonomy::structural_stats(RootMode mode) const {
    if (nodes_.empty()) {
        throw Error(ErrorCode::EmptyTaxonomy, "structural stats of an empty taxonomy");
    }
    StructuralStats stats;
    long long leaf_depth_sum = 0;
    long long leaf_count = 0;
    long long total_children = 0;
    long long internal_nodes = 0;
    for (const auto& id : insertion_order_) {
        int d = depth(id, mode);
        stats.max_depth = std::max(stats.max_depth, d);
        auto it = children_.find(id);
        size_t nc = (it == children_.end()) ? 0 : it->second.size();
        if (nc == 0) {
            leaf_depth_sum += d;
            ++leaf_count;
        } else {
            total_children += static_cast<long long>(nc);
            ++internal_nodes;
        }
    }
    if (mode == RootMode::Global) {
        // the virtual root is an internal node over the domain roots
        total_children += static_cast<long long>(domain_order_.size());
        ++internal_nodes;
    }
    stats.avg_depth = leaf_count ? static_cast<double>(leaf_depth_sum) / leaf_count : 0.0;
    stats.branch_factor =
        internal_nodes ? static_cast<double>(total_children) / internal_nodes : 0.0;
    return stats;
}

std::vector<std::string> Taxonomy::validate(bool strict_domains) const {
    std::vector<std::string> bad;
    std::unordered_map<std::string, int> roots_per_domain;
    for (const auto& id : insertion_order_) {
        const TaxonomyNode& n = nodes_.at(id);
        if (trim_copy(n.label).empty()) bad.push_back("empty label on node " + id);
        if (strict_domains && !is_canonical_domain(n.domain)) {
            bad.push_back("non-canonical domain '" + n.domain + "' on node " + id);
        }
        if (n.parent) {
            auto it = nodes_.find(*n.parent);
            if (it == nodes_.end()) {
                bad.push_back("dangling parent '" + *n.parent + "' on node " + id);
            } else if (it->second.domain != n.domain) {
                bad.push_back("domain mismatch between " + id + " and parent " + *n.parent);
            }
        } else {
            roots_per_domain[n.domain]++;
            auto it = domain_root_.find(n.domain);
            if (it == domain_root_.end() || it->second != id) {
                bad.push_back("unregistered root " + id + " for domain " + n.domain);
            }
        }
    }
    for (const auto& [domain, count] : roots_per_domain) {
        if (count != 1) {
            bad.push_back("domain '" + domain + "' has " + std::to_string(count) + " roots");
        }
    }
    for (const auto& [domain, root] : domain_root_) {
        if (!nodes_.count(root)) bad.push_back("domain '" + domain + "' root id missing");
    }
    // cycle check: every node must reach a root
    for (const auto& id : insertion_order_) {
        const TaxonomyNode* cur = &nodes_.at(id);
        size_t steps = 0;
        while (cur->parent) {
            if (++steps > nodes_.size()) {
                bad.push_back("cycle reachable from node " + id);
                break;
            }
            auto it = nodes_.find(*cur->parent);
            if (it == nodes_.end()) break; // already reported as dangling
            cur = &it->second;
        }
    }
    return bad;
}

std::string Taxonomy::allocate_id() {
    char buf[16];
    while (true) {
        ++id_counter_;
        std::snprintf(buf, sizeof(buf), "n%04llu", static_cast<unsigned long long>(id_counter_));
        if (!nodes_.count(buf)) return buf;
    }
}

void Taxonomy::insert_unattached(TaxonomyNode node) {
    if (nodes_.count(node.id)) {
        throw Error(ErrorCode::DuplicateId, "node id '" + node.id + "' already present");
    }
    if (node.parent) children_[*node.parent].push_back(node.id);
    insertion_order_.push_back(node.id);
    nodes_.emplace(node.id, std::move(node));
}

nlohmann::json Taxonomy::to_json() const {
    nlohmann::json domains = nlohmann::json::array();
    for (const auto& domain : domain_order_) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& id : insertion_order_) {
            const TaxonomyNode& n = nodes_.at(id);
            if (n.domain != domain) continue;
            nlohmann::json jn = {
                {"id", n.id},
                {"label", n.label},
                {"definition", n.definition},
                {"parent_id", n.parent ? nlohmann::json(*n.parent) : nlohmann::json(nullptr)},
                {"provenance", provenance_name(n.provenance)},
            };
            if (!n.aliases.empty()) jn["aliases"] = n.aliases;
            nodes.push_back(std::move(jn));
        }
        domains.push_back({
            {"name", domain},
            {"description", domain_description(domain)},
            {"nodes", std::move(nodes)},
        });
    }
    return nlohmann::json{{"domains", std::move(domains)}};
}

Taxonomy Taxonomy::from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("domains") || !doc["domains"].is_array()) {
        throw Error(ErrorCode::SchemaViolation, "taxonomy document must have a domains array");
    }
    Taxonomy tax;
    for (const auto& jd : doc["domains"]) {
        std::string name = jd.at("name").get<std::string>();
        tax.domain_desc_[name] = jd.value("description", "");
        for (const auto& jn : jd.at("nodes")) {
            TaxonomyNode n;
            n.id = jn.at("id").get<std::string>();
            n.label = jn.at("label").get<std::string>();
            n.definition = jn.value("definition", "");
            n.domain = name;
            if (jn.contains("parent_id") && !jn["parent_id"].is_null()) {
                n.parent = jn["parent_id"].get<std::string>();
            }
            n.provenance = provenance_from_name(jn.value("provenance", "ingested"));
            if (jn.contains("aliases")) {
                n.aliases = jn["aliases"].get<std::vector<std::string>>();
            }
            if (trim_copy(n.label).empty()) {
                throw Error(ErrorCode::SchemaViolation, "empty label on node " + n.id);
            }
            if (!n.parent) {
                if (tax.domain_root_.count(name)) {
                    throw Error(ErrorCode::SchemaViolation,
                                "domain '" + name + "' has multiple roots");
                }
                tax.domain_root_[name] = n.id;
                tax.domain_order_.push_back(name);
            }
            tax.insert_unattached(std::move(n));
        }
    }
    auto bad = tax.validate(false);
    if (!bad.empty()) {
        throw Error(ErrorCode::SchemaViolation, "invalid taxonomy: " + bad.front());
    }
    return tax;
}

void Taxonomy::save(const std::string& path) const {
    write_file_atomic(path, to_json().dump(2) + "\n");
}

Taxonomy Taxonomy::load(const std::string& path) {
    return from_json(load_json_file(path));
}

} // namespace histax
