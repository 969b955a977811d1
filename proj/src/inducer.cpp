#include "histax/inducer.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace histax {

namespace {

nlohmann::json domains_as_json(const std::vector<DomainSpec>& specs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : specs) {
        arr.push_back({{"name", d.name}, {"description", d.description}});
    }
    return arr;
}

} // namespace

ExtractionResult extract_events(const std::string& book, const std::string& chapter,
                                const std::string& chapter_text,
                                const std::vector<AgentRole>& extractor_roles,
                                ProviderGateway& gateway) {
    if (normalize_ws(chapter_text).empty()) {
        throw Error(ErrorCode::EmptyInput, "chapter '" + chapter + "' is empty");
    }
    if (extractor_roles.empty()) {
        throw Error(ErrorCode::ConfigInvalid, "no extractor roles configured");
    }
    ExtractionResult result;
    size_t failures = 0;
    for (const auto& role : extractor_roles) {
        ProviderRequest req;
        req.role = role;
        req.template_id = "extract";
        req.kind = RequestKind::Chat;
        req.variables = {{"book", book}, {"chapter", chapter}, {"text", chapter_text}};
        try {
            auto records = gateway.chat_parsed<std::vector<EventRecord>>(
                req, [&](const std::string& text) {
                    nlohmann::json doc = parse_json_reply(text);
                    if (!doc.is_array()) {
                        throw Error(ErrorCode::MalformedResponse, "expected an array of events");
                    }
                    std::vector<EventRecord> out;
                    for (const auto& je : doc) {
                        EventRecord r;
                        r.event_type = normalize_ws(je.value("event_type", ""));
                        r.trigger = je.value("trigger", "");
                        r.text = je.value("text", "");
                        if (r.text.empty()) r.text = chapter_text;
                        if (r.event_type.empty()) {
                            throw Error(ErrorCode::MalformedResponse,
                                        "event without event_type");
                        }
                        r.book = book;
                        r.chapter = chapter;
                        r.extractor = role.model_id;
                        out.push_back(std::move(r));
                    }
                    return out;
                });
            for (auto& r : records) result.records.push_back(std::move(r));
        } catch (const Error& e) {
            ++failures;
            result.warnings.push_back("extractor " + role.model_id + " failed on " + book + "/" +
                                      chapter + ": " + e.what());
        }
    }
    if (failures == extractor_roles.size()) {
        throw Error(ErrorCode::AllExtractorsFailed,
                    "every extractor failed on " + book + "/" + chapter);
    }
    return result;
}

std::string classify_domain(const std::string& event_type,
                            const std::vector<std::string>& sample_texts,
                            const std::vector<DomainSpec>& domain_specs,
                            const AgentRole& classifier, ProviderGateway& gateway) {
    if (sample_texts.empty()) {
        throw Error(ErrorCode::EmptyInput, "classification needs at least one sample text");
    }
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : sample_texts) samples.push_back(s);

    ProviderRequest req;
    req.role = classifier;
    req.template_id = "classify";
    req.kind = RequestKind::Chat;
    req.variables = {
        {"event_type", event_type},
        {"samples", samples.dump()},
        {"domains", domains_as_json(domain_specs).dump()},
    };
    return gateway.chat_parsed<std::string>(req, [&](const std::string& text) {
        nlohmann::json doc = parse_json_reply(text);
        std::string domain =
            doc.is_object() ? doc.value("domain", "") : doc.get<std::string>();
        for (const auto& d : domain_specs) {
            if (d.name == domain) return domain;
        }
        throw Error(ErrorCode::MalformedResponse, "'" + domain + "' is not a known domain");
    });
}

namespace {

// Working-set entry during induction. Children reference earlier entries.
struct StagedNode {
    std::string id;
    std::string label;
    std::string definition;
    long long weight = 0; // corpus frequency covered by the subtree
    std::vector<size_t> children; // indices into the staging vector
};

struct ParsedParent {
    std::string label;
    std::string definition;
    std::vector<std::string> children;
};

std::vector<ParsedParent> parse_parent_list(const std::string& text) {
    nlohmann::json doc = parse_json_reply(text);
    if (!doc.is_array()) {
        throw Error(ErrorCode::MalformedResponse, "expected an array of parent nodes");
    }
    std::vector<ParsedParent> out;
    for (const auto& jp : doc) {
        ParsedParent p;
        p.label = normalize_ws(jp.value("label", ""));
        p.definition = jp.value("definition", "");
        if (p.label.empty()) {
            throw Error(ErrorCode::MalformedResponse, "parent without label");
        }
        if (jp.contains("children")) {
            for (const auto& jc : jp["children"]) {
                p.children.push_back(normalize_ws(jc.get<std::string>()));
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

nlohmann::json items_json(const std::vector<StagedNode>& staging,
                          const std::vector<size_t>& items) {
    nlohmann::json arr = nlohmann::json::array();
    for (size_t idx : items) {
        arr.push_back({{"label", staging[idx].label}, {"definition", staging[idx].definition}});
    }
    return arr;
}

nlohmann::json proposals_json(const std::vector<StagedNode>& staging,
                              const std::vector<ParsedParent>& proposals) {
    nlohmann::json arr = nlohmann::json::array();
    (void)staging;
    for (const auto& p : proposals) {
        arr.push_back({{"label", p.label},
                       {"definition", p.definition},
                       {"children", p.children}});
    }
    return arr;
}

// Exact-label match within `scope`; first unclaimed match wins.
std::optional<size_t> match_child(const std::vector<StagedNode>& staging,
                                  const std::vector<size_t>& scope, const std::string& label,
                                  const std::vector<bool>& claimed) {
    for (size_t idx : scope) {
        if (staging[idx].label == label && !claimed[idx]) return idx;
    }
    return std::nullopt;
}

} // namespace

InducedDomain induce_domain_taxonomy(const DomainSpec& domain,
                                     const std::vector<std::string>& event_types,
                                     const std::map<std::string, long long>& frequency,
                                     const std::vector<AgentRole>& generator_roles,
                                     const AgentRole& merger_role, ProviderGateway& gateway,
                                     Taxonomy& taxonomy) {
    if (event_types.empty()) {
        throw Error(ErrorCode::EmptyInput, "domain '" + domain.name + "' has no event types");
    }
    if (generator_roles.empty()) {
        throw Error(ErrorCode::ConfigInvalid, "no generator roles configured");
    }

    InducedDomain result;
    std::vector<StagedNode> staging;

    // Leaves, ordered by corpus frequency desc then label asc.
    std::vector<std::string> ordered = event_types;
    std::stable_sort(ordered.begin(), ordered.end(),
                     [&frequency](const std::string& a, const std::string& b) {
                         long long fa = frequency.count(a) ? frequency.at(a) : 0;
                         long long fb = frequency.count(b) ? frequency.at(b) : 0;
                         if (fa != fb) return fa > fb;
                         return a < b;
                     });
    std::vector<size_t> working;
    for (const auto& type : ordered) {
        StagedNode leaf;
        leaf.id = taxonomy.allocate_id();
        leaf.label = type;
        leaf.weight = frequency.count(type) ? frequency.at(type) : 0;
        staging.push_back(std::move(leaf));
        working.push_back(staging.size() - 1);
    }

    int stall = 0;
    while (true) {
        ++result.rounds;

        // Round-robin partition over the rank order (working is kept ranked).
        std::vector<std::vector<size_t>> partitions(generator_roles.size());
        for (size_t i = 0; i < working.size(); ++i) {
            partitions[i % generator_roles.size()].push_back(working[i]);
        }

        std::vector<ParsedParent> proposals;
        for (size_t g = 0; g < generator_roles.size(); ++g) {
            if (partitions[g].empty()) continue;
            ProviderRequest req;
            req.role = generator_roles[g];
            req.template_id = "generate";
            req.kind = RequestKind::Chat;
            req.variables = {
                {"domain", domain.name},
                {"domain_description", domain.description},
                {"items", items_json(staging, partitions[g]).dump()},
            };
            auto all_children_known = [&](const std::vector<ParsedParent>& parents) {
                std::vector<bool> no_claims(staging.size(), false);
                for (const auto& p : parents) {
                    for (const auto& c : p.children) {
                        if (!match_child(staging, partitions[g], c, no_claims)) return false;
                    }
                }
                return true;
            };
            // One re-prompt on bad JSON or unknown child strings; after that
            // the parents are kept and orphans stay at this level.
            std::vector<ParsedParent> parsed;
            bool accepted = false;
            for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
                if (attempt == 1) req.variables["_retry"] = "1";
                ChatResult reply = gateway.chat(req);
                std::vector<ParsedParent> candidate;
                try {
                    candidate = parse_parent_list(reply.text);
                } catch (const Error&) {
                    continue; // keep any earlier parse
                }
                parsed = std::move(candidate);
                if (all_children_known(parsed)) accepted = true;
            }
            if (parsed.empty()) {
                result.warnings.push_back("generator " + generator_roles[g].model_id +
                                          " produced no usable parents in round " +
                                          std::to_string(result.rounds));
            } else if (!accepted) {
                result.warnings.push_back("generator " + generator_roles[g].model_id +
                                          " listed unknown children in round " +
                                          std::to_string(result.rounds));
            }
            for (auto& p : parsed) proposals.push_back(std::move(p));
        }

        // Merger unifies the round's proposals; it sees only the parents.
        std::vector<ParsedParent> refined;
        if (!proposals.empty()) {
            ProviderRequest req;
            req.role = merger_role;
            req.template_id = "merge";
            req.kind = RequestKind::Chat;
            req.variables = {
                {"domain", domain.name},
                {"proposals", proposals_json(staging, proposals).dump()},
            };
            refined = gateway.chat_parsed<std::vector<ParsedParent>>(req, parse_parent_list);
        }

        // Build the next working set: refined parents claim children by exact
        // label; unclaimed items carry over to the next level.
        std::vector<bool> claimed(staging.size(), false);
        std::vector<size_t> next;
        for (const auto& p : refined) {
            StagedNode parent;
            parent.label = p.label;
            parent.definition = p.definition;
            for (const auto& c : p.children) {
                auto idx = match_child(staging, working, c, claimed);
                if (!idx) {
                    result.warnings.push_back("merger child '" + c + "' unmatched in round " +
                                              std::to_string(result.rounds));
                    continue;
                }
                claimed[*idx] = true;
                parent.children.push_back(*idx);
                parent.weight += staging[*idx].weight;
            }
            if (parent.children.empty()) {
                result.warnings.push_back("dropping childless parent '" + p.label +
                                          "' in round " + std::to_string(result.rounds));
                continue;
            }
            parent.id = taxonomy.allocate_id();
            staging.push_back(std::move(parent));
            next.push_back(staging.size() - 1);
        }
        for (size_t idx : working) {
            if (!claimed[idx]) next.push_back(idx);
        }
        std::stable_sort(next.begin(), next.end(), [&staging](size_t a, size_t b) {
            if (staging[a].weight != staging[b].weight) {
                return staging[a].weight > staging[b].weight;
            }
            return staging[a].label < staging[b].label;
        });

        if (static_cast<int>(next.size()) < kInductionStopWidth) {
            working = std::move(next);
            break;
        }
        if (next.size() >= working.size()) {
            if (++stall >= 2) {
                throw Error(ErrorCode::NonConvergence,
                            "domain '" + domain.name + "' stopped shrinking at width " +
                                std::to_string(next.size()));
            }
        } else {
            stall = 0;
        }
        if (result.rounds >= kInductionRoundCap) {
            throw Error(ErrorCode::NonConvergence,
                        "domain '" + domain.name + "' still at width " +
                            std::to_string(next.size()) + " after " +
                            std::to_string(result.rounds) + " rounds");
        }
        working = std::move(next);
    }

    result.top_width = static_cast<int>(working.size());

    // Materialize: root first, then levels downward.
    TaxonomyNode root;
    root.id = taxonomy.allocate_id();
    root.label = domain.name;
    root.definition = domain.description;
    root.domain = domain.name;
    root.provenance = Provenance::Induced;
    taxonomy.add_domain_root(std::move(root), domain.description);
    const std::string root_id = taxonomy.domain_root(domain.name);

    std::vector<std::pair<size_t, std::string>> queue; // staged index, parent id
    for (size_t idx : working) queue.emplace_back(idx, root_id);
    for (size_t q = 0; q < queue.size(); ++q) {
        auto [idx, parent_id] = queue[q];
        const StagedNode& staged = staging[idx];
        TaxonomyNode node;
        node.id = staged.id;
        node.label = staged.label;
        node.definition = staged.definition;
        node.domain = domain.name;
        node.provenance = Provenance::Induced;
        taxonomy.add_node(std::move(node), parent_id);
        for (size_t child : staged.children) queue.emplace_back(child, staged.id);
    }
    return result;
}

InductionOutput run_induction(const std::vector<EventRecord>& events, const RunConfig& config,
                              ProviderGateway& gateway) {
    if (events.empty()) {
        throw Error(ErrorCode::EmptyInput, "no events to induce from");
    }
    InductionOutput out;
    out.classified_events = events;
    auto frequency = event_type_frequency(events);

    // Distinct types in first-appearance order; up to three sample texts each.
    std::vector<std::string> types;
    std::map<std::string, std::vector<std::string>> samples;
    std::map<std::string, std::string> preassigned;
    for (const auto& e : events) {
        std::string type = normalize_ws(e.event_type);
        if (!samples.count(type)) types.push_back(type);
        auto& list = samples[type];
        if (list.size() < 3) list.push_back(e.text);
        if (!e.domain.empty() && !preassigned.count(type)) preassigned[type] = e.domain;
    }

    const auto& specs = default_domain_specs();
    const AgentRole& classifier = config.role(RoleName::Classifier);
    std::map<std::string, std::vector<std::string>> by_domain;
    std::map<std::string, std::string> type_domain;
    for (const auto& type : types) {
        std::string domain;
        auto pre = preassigned.find(type);
        if (pre != preassigned.end() && is_canonical_domain(pre->second)) {
            domain = pre->second;
        } else {
            domain = classify_domain(type, samples[type], specs, classifier, gateway);
        }
        type_domain[type] = domain;
        by_domain[domain].push_back(type);
    }
    for (auto& e : out.classified_events) {
        e.domain = type_domain[normalize_ws(e.event_type)];
    }

    const auto& generators = config.role_list(RoleName::Generator);
    const AgentRole& merger = config.role(RoleName::Merger);
    for (const auto& spec : specs) {
        auto it = by_domain.find(spec.name);
        if (it == by_domain.end() || it->second.empty()) continue;
        out.per_domain[spec.name] = induce_domain_taxonomy(spec, it->second, frequency,
                                                           generators, merger, gateway,
                                                           out.taxonomy);
        for (const auto& w : out.per_domain[spec.name].warnings) {
            out.warnings.push_back(spec.name + ": " + w);
        }
    }
    return out;
}

} // namespace histax
