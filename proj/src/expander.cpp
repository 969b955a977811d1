#include "histax/expander.hpp"

#include <algorithm>
#include <map>

namespace histax {

namespace {

std::vector<std::string> non_root_ids(const Taxonomy& tax) {
    std::vector<std::string> out;
    for (const auto& id : tax.node_ids()) {
        if (!tax.node(id).is_root()) out.push_back(id);
    }
    return out;
}

long long descendant_count(const Taxonomy& tax, const std::string& id) {
    long long count = 0;
    std::vector<std::string> stack = tax.children(id);
    while (!stack.empty()) {
        std::string cur = stack.back();
        stack.pop_back();
        ++count;
        for (const auto& c : tax.children(cur)) stack.push_back(c);
    }
    return count;
}

} // namespace

std::vector<DuplicatePair> find_duplicate_pairs(const Taxonomy& taxonomy,
                                                const std::vector<std::string>& node_ids,
                                                double h, ProviderGateway& gateway) {
    if (h <= 0.0 || h >= 1.0) {
        throw Error(ErrorCode::ConfigInvalid, "duplicate threshold must lie in (0,1)");
    }
    std::vector<DuplicatePair> pairs;
    if (node_ids.size() < 2) return pairs;
    std::vector<std::string> texts;
    texts.reserve(node_ids.size());
    for (const auto& id : node_ids) texts.push_back(node_embed_text(taxonomy.node(id)));
    auto vectors = gateway.embed(texts);
    for (size_t i = 0; i < node_ids.size(); ++i) {
        for (size_t j = i + 1; j < node_ids.size(); ++j) {
            double sim = cosine_similarity(vectors[i], vectors[j]);
            if (sim > h) {
                DuplicatePair p;
                p.a = std::min(node_ids[i], node_ids[j]);
                p.b = std::max(node_ids[i], node_ids[j]);
                p.similarity = sim;
                pairs.push_back(std::move(p));
            }
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const DuplicatePair& x, const DuplicatePair& y) {
        if (x.similarity != y.similarity) return x.similarity > y.similarity;
        if (x.a != y.a) return x.a < y.a;
        return x.b < y.b;
    });
    return pairs;
}

ResolutionOutcome resolve_duplicate(Taxonomy& taxonomy, const DuplicatePair& pair,
                                    const AgentRole& judger, ProviderGateway& gateway,
                                    const std::string& scope,
                                    std::vector<nlohmann::json>* edit_log,
                                    std::vector<std::string>* warnings) {
    if (!taxonomy.contains(pair.a) || !taxonomy.contains(pair.b)) {
        if (warnings) {
            warnings->push_back("skipping stale pair " + pair.a + "/" + pair.b +
                                " (already merged)");
        }
        return ResolutionOutcome::SkippedStale;
    }
    const TaxonomyNode& na = taxonomy.node(pair.a);
    const TaxonomyNode& nb = taxonomy.node(pair.b);

    ProviderRequest req;
    req.role = judger;
    req.template_id = "judge";
    req.kind = RequestKind::Chat;
    req.variables = {
        {"label_a", na.label},
        {"definition_a", na.definition},
        {"domain_a", na.domain},
        {"domain_description_a", taxonomy.domain_description(na.domain)},
        {"descendants_a", std::to_string(descendant_count(taxonomy, pair.a))},
        {"label_b", nb.label},
        {"definition_b", nb.definition},
        {"domain_b", nb.domain},
        {"domain_description_b", taxonomy.domain_description(nb.domain)},
        {"descendants_b", std::to_string(descendant_count(taxonomy, pair.b))},
    };

    std::string keep_id;
    std::string via = "judger";
    try {
        keep_id = gateway.chat_parsed<std::string>(req, [&](const std::string& text) {
            nlohmann::json doc = parse_json_reply(text);
            std::string choice = doc.is_object() ? doc.value("keep", "") : doc.get<std::string>();
            if (choice == "A" || choice == "a" || choice == na.label) return pair.a;
            if (choice == "B" || choice == "b" || choice == nb.label) return pair.b;
            throw Error(ErrorCode::MalformedResponse, "keep must name A or B");
        });
    } catch (const Error& e) {
        if (e.code() != ErrorCode::MalformedResponse) throw;
        via = "fallback";
        if (na.domain != nb.domain) {
            // cross-domain fallback: keep the node in the smaller domain
            size_t size_a = taxonomy.node_ids_in_domain(na.domain).size();
            size_t size_b = taxonomy.node_ids_in_domain(nb.domain).size();
            if (size_a != size_b) {
                keep_id = size_a < size_b ? pair.a : pair.b;
            } else {
                keep_id = na.label != nb.label ? (na.label < nb.label ? pair.a : pair.b) : pair.a;
            }
        } else {
            long long da = descendant_count(taxonomy, pair.a);
            long long db = descendant_count(taxonomy, pair.b);
            if (da != db) {
                keep_id = da > db ? pair.a : pair.b;
            } else if (na.label != nb.label) {
                keep_id = na.label < nb.label ? pair.a : pair.b;
            } else {
                keep_id = pair.a;
            }
        }
        if (warnings) {
            warnings->push_back("judger stayed malformed for " + na.label + "/" + nb.label +
                                "; deterministic fallback kept " + keep_id);
        }
    }

    std::string drop_id = keep_id == pair.a ? pair.b : pair.a;
    // Never merge a node into its own descendant; swap so the ancestor wins.
    if (taxonomy.is_descendant(keep_id, drop_id)) {
        std::swap(keep_id, drop_id);
        if (warnings) {
            warnings->push_back("swapped keep/drop for " + na.label + "/" + nb.label +
                                " to avoid a cycle");
        }
    }
    const TaxonomyNode& drop = taxonomy.node(drop_id);
    nlohmann::json record = {
        {"op", "merge"},
        {"scope", scope},
        {"keep", keep_id},
        {"drop", drop_id},
        {"keep_label", taxonomy.node(keep_id).label},
        {"drop_label", drop.label},
        {"drop_parent", drop.parent ? nlohmann::json(*drop.parent) : nlohmann::json(nullptr)},
        {"moved_children", taxonomy.children(drop_id)},
        {"similarity", pair.similarity},
        {"via", via},
    };
    taxonomy.merge_nodes(keep_id, drop_id);
    if (edit_log) edit_log->push_back(std::move(record));
    return ResolutionOutcome::Merged;
}

LayerEdits expand_layer(const Taxonomy& taxonomy, const std::vector<std::string>& layer_nodes,
                        const DomainSpec& domain, const AgentRole& expander,
                        ProviderGateway& gateway) {
    if (layer_nodes.empty()) {
        throw Error(ErrorCode::EmptyInput, "expand_layer over an empty layer");
    }
    // Layer payload plus the union of the layer's children.
    nlohmann::json layer_json = nlohmann::json::array();
    bool top_layer = true;
    std::vector<std::string> child_ids;
    for (const auto& id : layer_nodes) {
        const TaxonomyNode& n = taxonomy.node(id);
        layer_json.push_back({{"id", id}, {"label", n.label}, {"definition", n.definition}});
        if (!n.parent || !taxonomy.node(*n.parent).is_root()) top_layer = false;
        for (const auto& c : taxonomy.children(id)) child_ids.push_back(c);
    }
    nlohmann::json children_json = nlohmann::json::array();
    for (const auto& id : child_ids) {
        const TaxonomyNode& n = taxonomy.node(id);
        children_json.push_back({{"id", id}, {"label", n.label}, {"definition", n.definition}});
    }

    ProviderRequest req;
    req.role = expander;
    req.template_id = "expand";
    req.kind = RequestKind::Chat;
    req.variables = {
        {"domain", domain.name},
        {"domain_description", domain.description},
        {"layer_nodes", layer_json.dump()},
        {"child_nodes", children_json.dump()},
    };
    nlohmann::json doc = gateway.chat_parsed<nlohmann::json>(req, [](const std::string& text) {
        nlohmann::json d = parse_json_reply(text);
        if (!d.is_object()) {
            throw Error(ErrorCode::MalformedResponse, "edit set must be a JSON object");
        }
        return d;
    });

    // Resolvers accept a node id or an exact label within the given scope.
    auto resolve_in = [&](const nlohmann::json& ref,
                          const std::vector<std::string>& scope) -> std::optional<std::string> {
        if (!ref.is_string()) return std::nullopt;
        std::string key = ref.get<std::string>();
        for (const auto& id : scope) {
            if (id == key) return id;
        }
        for (const auto& id : scope) {
            if (taxonomy.node(id).label == key) return id;
        }
        return std::nullopt;
    };

    // Parents of the layer (the level above), for sibling placement.
    std::vector<std::string> layer_parents;
    for (const auto& id : layer_nodes) {
        const auto& n = taxonomy.node(id);
        if (n.parent &&
            std::find(layer_parents.begin(), layer_parents.end(), *n.parent) ==
                layer_parents.end()) {
            layer_parents.push_back(*n.parent);
        }
    }

    LayerEdits edits;
    for (const auto& js : doc.value("siblings", nlohmann::json::array())) {
        NewSibling s;
        s.label = js.value("label", "");
        s.definition = js.value("definition", "");
        if (s.label.empty()) {
            edits.dropped.push_back("sibling without label");
            continue;
        }
        if (js.contains("parent")) {
            auto parent = resolve_in(js["parent"], layer_parents);
            if (!parent) {
                edits.dropped.push_back("sibling '" + s.label + "' names an unknown parent");
                continue;
            }
            s.parent = *parent;
        } else if (top_layer && layer_parents.size() == 1) {
            s.parent = layer_parents.front(); // the domain root
        } else {
            edits.dropped.push_back("sibling '" + s.label +
                                    "' needs a parent below the top layer");
            continue;
        }
        edits.siblings.push_back(s);
    }

    for (const auto& ji : doc.value("intermediates", nlohmann::json::array())) {
        NewIntermediate m;
        m.label = ji.value("label", "");
        m.definition = ji.value("definition", "");
        if (m.label.empty()) {
            edits.dropped.push_back("intermediate without label");
            continue;
        }
        auto parent = resolve_in(ji.contains("parent") ? ji["parent"] : nlohmann::json(),
                                 layer_nodes);
        if (!parent) {
            edits.dropped.push_back("intermediate '" + m.label + "' names an unknown parent");
            continue;
        }
        m.parent = *parent;
        bool ok = true;
        for (const auto& jc : ji.value("children", nlohmann::json::array())) {
            auto child = resolve_in(jc, child_ids);
            if (!child) {
                edits.dropped.push_back("intermediate '" + m.label +
                                        "' adopts an unknown child");
                ok = false;
                break;
            }
            m.children.push_back(*child);
        }
        if (!ok) continue;
        edits.intermediates.push_back(m);
    }

    for (const auto& jr : doc.value("reassign", nlohmann::json::array())) {
        ReassignChild r;
        auto child = resolve_in(jr.contains("child") ? jr["child"] : nlohmann::json(), child_ids);
        if (!child) {
            edits.dropped.push_back("reassign names an unknown child");
            continue;
        }
        r.child = *child;
        // target may be an existing layer node or a node created by this edit
        // set; new labels are resolved at application time
        if (!jr.contains("parent") || !jr["parent"].is_string()) {
            edits.dropped.push_back("reassign for '" + taxonomy.node(r.child).label +
                                    "' names no parent");
            continue;
        }
        auto parent = resolve_in(jr["parent"], layer_nodes);
        if (parent) {
            r.new_parent = *parent;
        } else {
            r.new_parent = jr["parent"].get<std::string>(); // label of a new node
        }
        edits.reassignments.push_back(r);
    }
    return edits;
}

void apply_layer_edits(Taxonomy& taxonomy, const std::string& domain, const LayerEdits& edits,
                       std::vector<nlohmann::json>* edit_log,
                       std::vector<std::string>* warnings) {
    std::map<std::string, std::string> new_by_label; // labels created by this edit set

    for (const auto& s : edits.siblings) {
        if (!s.parent) continue;
        TaxonomyNode node;
        node.id = taxonomy.allocate_id();
        node.label = s.label;
        node.definition = s.definition;
        node.domain = domain;
        node.provenance = Provenance::Expanded;
        std::string id = node.id;
        taxonomy.add_node(std::move(node), *s.parent);
        new_by_label[s.label] = id;
        if (edit_log) {
            edit_log->push_back({{"op", "new_sibling"},
                                 {"id", id},
                                 {"domain", domain},
                                 {"label", s.label},
                                 {"definition", s.definition},
                                 {"parent", *s.parent}});
        }
    }

    for (const auto& m : edits.intermediates) {
        TaxonomyNode node;
        node.id = taxonomy.allocate_id();
        node.label = m.label;
        node.definition = m.definition;
        node.domain = domain;
        node.provenance = Provenance::Expanded;
        std::string id = node.id;
        try {
            taxonomy.add_node(std::move(node), m.parent);
        } catch (const Error& e) {
            if (warnings) warnings->push_back(std::string("intermediate dropped: ") + e.what());
            continue;
        }
        std::vector<std::string> adopted;
        for (const auto& child : m.children) {
            try {
                taxonomy.reparent(child, id);
                adopted.push_back(child);
            } catch (const Error& e) {
                if (warnings) {
                    warnings->push_back("intermediate '" + m.label + "' could not adopt " +
                                        child + ": " + e.what());
                }
            }
        }
        new_by_label[m.label] = id;
        if (edit_log) {
            edit_log->push_back({{"op", "new_intermediate"},
                                 {"id", id},
                                 {"domain", domain},
                                 {"label", m.label},
                                 {"definition", m.definition},
                                 {"parent", m.parent},
                                 {"children", adopted}});
        }
    }

    for (const auto& r : edits.reassignments) {
        std::string target = r.new_parent;
        if (!taxonomy.contains(target)) {
            auto it = new_by_label.find(target);
            if (it == new_by_label.end()) {
                if (warnings) {
                    warnings->push_back("reassign of " + r.child + " to unknown parent '" +
                                        target + "' dropped");
                }
                continue;
            }
            target = it->second;
        }
        std::string from = taxonomy.node(r.child).parent.value_or("");
        try {
            taxonomy.reparent(r.child, target);
        } catch (const Error& e) {
            if (warnings) warnings->push_back(std::string("reassign dropped: ") + e.what());
            continue;
        }
        if (edit_log) {
            edit_log->push_back({{"op", "reassign"},
                                 {"child", r.child},
                                 {"from", from},
                                 {"to", target}});
        }
    }

    if (warnings) {
        for (const auto& d : edits.dropped) warnings->push_back("invalid edit: " + d);
    }
}

namespace {

// One dedup pass over a node scope; returns merges performed.
int dedup_scope(Taxonomy& tax, const std::vector<std::string>& ids, double h,
                const AgentRole& judger, ProviderGateway& gateway, const std::string& scope,
                bool cross_only, std::vector<nlohmann::json>* log,
                std::vector<std::string>* warnings) {
    auto pairs = find_duplicate_pairs(tax, ids, h, gateway);
    int merges = 0;
    for (const auto& pair : pairs) {
        if (!tax.contains(pair.a) || !tax.contains(pair.b)) continue;
        bool same_domain = tax.node(pair.a).domain == tax.node(pair.b).domain;
        if (cross_only == same_domain) continue;
        if (resolve_duplicate(tax, pair, judger, gateway, scope, log, warnings) ==
            ResolutionOutcome::Merged) {
            ++merges;
        }
    }
    return merges;
}

} // namespace

ExpansionOutput run_expansion(const Taxonomy& input, const RunConfig& config,
                              ProviderGateway& gateway) {
    auto invariants = input.validate();
    if (!invariants.empty()) {
        throw Error(ErrorCode::SchemaViolation,
                    "expansion input fails invariants: " + invariants.front());
    }
    ExpansionOutput out;
    out.taxonomy = input;
    Taxonomy& tax = out.taxonomy;
    const double h = config.threshold;
    const AgentRole& judger = config.role(RoleName::Judger);
    const AgentRole& expander = config.role(RoleName::Expander);

    // (1) within-domain dedup, domain by domain
    for (const auto& domain : std::vector<std::string>(tax.domain_order())) {
        if (!tax.has_domain(domain)) continue;
        std::vector<std::string> ids;
        for (const auto& id : tax.node_ids_in_domain(domain)) {
            if (!tax.node(id).is_root()) ids.push_back(id);
        }
        out.within_domain_merges += dedup_scope(tax, ids, h, judger, gateway, "within", false,
                                                &out.edit_log, &out.warnings);
    }

    // (2) cross-domain dedup over everything at once
    out.cross_domain_merges += dedup_scope(tax, non_root_ids(tax), h, judger, gateway, "cross",
                                           true, &out.edit_log, &out.warnings);

    // (3) top-down layer sweep per domain
    const auto& specs = default_domain_specs();
    for (const auto& domain : std::vector<std::string>(tax.domain_order())) {
        if (!tax.has_domain(domain)) continue;
        DomainSpec spec{domain, tax.domain_description(domain)};
        for (const auto& s : specs) {
            if (s.name == domain) spec = s;
        }
        for (int layer = 1; layer <= 32; ++layer) {
            std::vector<std::string> layer_nodes;
            for (const auto& id : tax.node_ids_in_domain(domain)) {
                if (tax.depth(id) == layer + 1) layer_nodes.push_back(id);
            }
            if (layer_nodes.empty()) break;
            LayerEdits edits = expand_layer(tax, layer_nodes, spec, expander, gateway);
            apply_layer_edits(tax, domain, edits, &out.edit_log, &out.warnings);
        }
    }

    // (4) final global dedup, within and cross reported separately
    for (const auto& domain : std::vector<std::string>(tax.domain_order())) {
        if (!tax.has_domain(domain)) continue;
        std::vector<std::string> ids;
        for (const auto& id : tax.node_ids_in_domain(domain)) {
            if (!tax.node(id).is_root()) ids.push_back(id);
        }
        out.global_within_merges += dedup_scope(tax, ids, h, judger, gateway, "global-within",
                                                false, &out.edit_log, &out.warnings);
    }
    out.global_cross_merges += dedup_scope(tax, non_root_ids(tax), h, judger, gateway,
                                           "global-cross", true, &out.edit_log, &out.warnings);

    auto bad = tax.validate();
    if (!bad.empty()) {
        throw Error(ErrorCode::SchemaViolation, "expansion broke invariants: " + bad.front());
    }
    return out;
}

Taxonomy replay_edit_log(Taxonomy base, const std::vector<nlohmann::json>& edit_log) {
    for (const auto& entry : edit_log) {
        std::string op = entry.value("op", "");
        if (op == "merge") {
            base.merge_nodes(entry.at("keep").get<std::string>(),
                             entry.at("drop").get<std::string>());
        } else if (op == "new_sibling" || op == "new_intermediate") {
            TaxonomyNode node;
            node.id = entry.at("id").get<std::string>();
            node.label = entry.at("label").get<std::string>();
            node.definition = entry.value("definition", "");
            node.domain = entry.at("domain").get<std::string>();
            node.provenance = Provenance::Expanded;
            base.add_node(std::move(node), entry.at("parent").get<std::string>());
            if (op == "new_intermediate") {
                for (const auto& jc : entry.value("children", nlohmann::json::array())) {
                    base.reparent(jc.get<std::string>(), entry.at("id").get<std::string>());
                }
            }
        } else if (op == "reassign") {
            base.reparent(entry.at("child").get<std::string>(),
                          entry.at("to").get<std::string>());
        } else if (op == "insert") {
            TaxonomyNode node;
            node.id = entry.at("id").get<std::string>();
            node.label = entry.at("label").get<std::string>();
            node.definition = entry.value("definition", "");
            node.domain = entry.at("domain").get<std::string>();
            node.provenance = Provenance::Enriched;
            base.add_node(std::move(node), entry.at("parent").get<std::string>());
        } else {
            throw Error(ErrorCode::InvalidEdit, "unknown edit op '" + op + "'");
        }
    }
    return base;
}

std::vector<DuplicatePair> find_surviving_duplicates(const Taxonomy& taxonomy, double h,
                                                     ProviderGateway& gateway) {
    return find_duplicate_pairs(taxonomy, non_root_ids(taxonomy), h, gateway);
}

} // namespace histax
