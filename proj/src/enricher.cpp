#include "histax/enricher.hpp"

#include <algorithm>

#include "histax/domains.hpp"

namespace histax {

const char* candidate_source_name(CandidateSource s) {
    switch (s) {
        case CandidateSource::Freq:     return "freq";
        case CandidateSource::Topic:    return "topic";
        case CandidateSource::Relation: return "relation";
    }
    return "freq";
}

std::vector<CandidateEvent> collect_frequent(const std::vector<EventRecord>& events,
                                             int f_threshold) {
    if (f_threshold < 1) {
        throw Error(ErrorCode::ConfigInvalid, "frequency threshold must be >= 1");
    }
    auto counts = event_type_frequency(events);
    std::vector<std::pair<std::string, long long>> qualifying;
    for (const auto& [type, count] : counts) {
        if (count > f_threshold) qualifying.emplace_back(type, count);
    }
    std::sort(qualifying.begin(), qualifying.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<CandidateEvent> out;
    for (const auto& [type, count] : qualifying) {
        CandidateEvent c;
        c.label = type;
        c.source = CandidateSource::Freq;
        c.origin_ref = type;
        (void)count;
        out.push_back(std::move(c));
    }
    return out;
}

namespace {

std::string candidate_embed_text(const CandidateEvent& c) {
    if (c.definition.empty()) return c.label;
    return c.label + "：" + c.definition;
}

std::vector<CandidateEvent> parse_candidates(const std::string& text, CandidateSource source,
                                             const std::string& origin) {
    nlohmann::json doc = parse_json_reply(text);
    if (!doc.is_array()) {
        throw Error(ErrorCode::MalformedResponse, "expected an array of event types");
    }
    std::vector<CandidateEvent> out;
    for (const auto& je : doc) {
        CandidateEvent c;
        c.label = normalize_ws(je.value("label", ""));
        c.definition = je.value("definition", "");
        c.source = source;
        c.origin_ref = origin;
        if (c.label.empty()) {
            throw Error(ErrorCode::MalformedResponse, "event type without label");
        }
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace

std::vector<CandidateEvent> conceptualize(const std::vector<TopicEntry>& topics,
                                          const AgentRole& conceptualizer,
                                          ProviderGateway& gateway,
                                          std::vector<std::string>* warnings) {
    std::vector<CandidateEvent> out;
    for (const auto& topic : topics) {
        nlohmann::json words(topic.top_words);
        ProviderRequest req;
        req.role = conceptualizer;
        req.template_id = "conceptualize_topic";
        req.kind = RequestKind::Chat;
        req.variables = {
            {"label", topic.label},
            {"top_words", words.dump()},
        };
        std::string origin = "topic:" + std::to_string(topic.id);
        try {
            auto candidates = gateway.chat_parsed<std::vector<CandidateEvent>>(
                req, [&](const std::string& text) {
                    return parse_candidates(text, CandidateSource::Topic, origin);
                });
            if (candidates.empty() && warnings) {
                warnings->push_back("topic '" + topic.label + "' yielded no event types");
            }
            for (auto& c : candidates) out.push_back(std::move(c));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::MalformedResponse) throw;
            if (warnings) {
                warnings->push_back("skipping topic '" + topic.label + "': " + e.what());
            }
        }
    }
    return out;
}

std::vector<CandidateEvent> conceptualize(const std::vector<RelationEntry>& relations,
                                          const AgentRole& conceptualizer,
                                          ProviderGateway& gateway,
                                          std::vector<std::string>* warnings) {
    std::vector<CandidateEvent> out;
    for (const auto& relation : relations) {
        ProviderRequest req;
        req.role = conceptualizer;
        req.template_id = "conceptualize_relation";
        req.kind = RequestKind::Chat;
        req.variables = {
            {"name", relation.name},
            {"source", relation.source},
        };
        std::string origin = "relation:" + relation.name;
        try {
            auto candidates = gateway.chat_parsed<std::vector<CandidateEvent>>(
                req, [&](const std::string& text) {
                    return parse_candidates(text, CandidateSource::Relation, origin);
                });
            if (candidates.empty() && warnings) {
                warnings->push_back("relation '" + relation.name + "' yielded no event types");
            }
            for (auto& c : candidates) out.push_back(std::move(c));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::MalformedResponse) throw;
            if (warnings) {
                warnings->push_back("skipping relation '" + relation.name + "': " + e.what());
            }
        }
    }
    return out;
}

std::vector<CandidateEvent> build_candidate_set(const std::vector<CandidateEvent>& freq,
                                                const std::vector<CandidateEvent>& topic_derived,
                                                const std::vector<CandidateEvent>& relation_derived,
                                                double h, ProviderGateway& gateway) {
    if (h <= 0.0 || h >= 1.0) {
        throw Error(ErrorCode::ConfigInvalid, "dedup threshold must lie in (0,1)");
    }
    std::vector<CandidateEvent> ordered;
    for (const auto& c : freq) ordered.push_back(c);
    for (const auto& c : topic_derived) ordered.push_back(c);
    for (const auto& c : relation_derived) ordered.push_back(c);
    if (ordered.empty()) return {};

    std::vector<std::string> texts;
    texts.reserve(ordered.size());
    for (const auto& c : ordered) texts.push_back(candidate_embed_text(c));
    auto vectors = gateway.embed(texts);

    std::vector<CandidateEvent> survivors;
    std::vector<size_t> survivor_idx;
    for (size_t i = 0; i < ordered.size(); ++i) {
        bool duplicate = false;
        for (size_t s : survivor_idx) {
            if (ordered[s].label == ordered[i].label ||
                cosine_similarity(vectors[s], vectors[i]) > h) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) {
            survivors.push_back(ordered[i]);
            survivor_idx.push_back(i);
        }
    }
    return survivors;
}

PositionDecision position_candidate(Taxonomy& taxonomy, const CandidateEvent& candidate,
                                    const AgentRole& enricher, ProviderGateway& gateway,
                                    double h, std::vector<std::string>* warnings) {
    if (taxonomy.empty()) {
        throw Error(ErrorCode::EmptyTaxonomy, "cannot position into an empty taxonomy");
    }

    // (1) domain prediction over the domains present in the taxonomy
    nlohmann::json domains = nlohmann::json::array();
    for (const auto& d : taxonomy.domain_order()) {
        domains.push_back({{"name", d}, {"description", taxonomy.domain_description(d)}});
    }
    ProviderRequest predict;
    predict.role = enricher;
    predict.template_id = "predict_domain";
    predict.kind = RequestKind::Chat;
    predict.variables = {
        {"label", candidate.label},
        {"definition", candidate.definition},
        {"domains", domains.dump()},
    };
    std::string domain = gateway.chat_parsed<std::string>(predict, [&](const std::string& text) {
        nlohmann::json doc = parse_json_reply(text);
        std::string d = doc.is_object() ? doc.value("domain", "") : doc.get<std::string>();
        if (!taxonomy.has_domain(d)) {
            throw Error(ErrorCode::MalformedResponse, "'" + d + "' is not a taxonomy domain");
        }
        return d;
    });

    PositionDecision decision;
    decision.domain = domain;

    // (2) mechanical redundancy check against the predicted domain
    auto domain_ids = taxonomy.node_ids_in_domain(domain);
    std::vector<std::string> texts;
    for (const auto& id : domain_ids) texts.push_back(node_embed_text(taxonomy.node(id)));
    auto node_vecs = gateway.embed(texts);
    auto cand_vec = gateway.embed_one(candidate_embed_text(candidate));
    double best = -2.0;
    size_t best_idx = 0;
    for (size_t i = 0; i < domain_ids.size(); ++i) {
        double sim = cosine_similarity(cand_vec, node_vecs[i]);
        if (sim > best) {
            best = sim;
            best_idx = i;
        }
    }
    decision.max_similarity = best;
    if (best > h) {
        decision.inserted = false;
        decision.node_id = domain_ids[best_idx];
        return decision;
    }

    // (3) the enricher names an existing parent in the predicted domain
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& id : domain_ids) {
        const TaxonomyNode& n = taxonomy.node(id);
        nodes.push_back({{"id", id}, {"label", n.label}, {"definition", n.definition}});
    }
    ProviderRequest place;
    place.role = enricher;
    place.template_id = "position";
    place.kind = RequestKind::Chat;
    place.variables = {
        {"domain", domain},
        {"label", candidate.label},
        {"definition", candidate.definition},
        {"nodes", nodes.dump()},
    };
    std::string parent_id;
    try {
        parent_id = gateway.chat_parsed<std::string>(place, [&](const std::string& text) {
            nlohmann::json doc = parse_json_reply(text);
            std::string ref = doc.is_object() ? doc.value("parent", "") : doc.get<std::string>();
            for (const auto& id : domain_ids) {
                if (id == ref) return id;
            }
            for (const auto& id : domain_ids) {
                if (taxonomy.node(id).label == ref) return id;
            }
            throw Error(ErrorCode::MalformedResponse,
                        "'" + ref + "' is not a node of domain " + domain);
        });
    } catch (const Error& e) {
        if (e.code() != ErrorCode::MalformedResponse) throw;
        parent_id = taxonomy.domain_root(domain);
        decision.fallback_root = true;
        if (warnings) {
            warnings->push_back("enricher named no valid parent for '" + candidate.label +
                                "'; attached under the " + domain + " root");
        }
    }

    TaxonomyNode node;
    node.id = taxonomy.allocate_id();
    node.label = candidate.label;
    node.definition = candidate.definition;
    node.domain = domain;
    node.provenance = Provenance::Enriched;
    decision.inserted = true;
    decision.node_id = node.id;
    decision.parent_id = parent_id;
    decision.parent_is_enriched =
        taxonomy.node(parent_id).provenance == Provenance::Enriched;
    taxonomy.add_node(std::move(node), parent_id);
    return decision;
}

EnrichmentOutput run_enrichment(const Taxonomy& input, const std::vector<EventRecord>& events,
                                const std::vector<TopicEntry>& topics,
                                const std::vector<RelationEntry>& relations,
                                const RunConfig& config, ProviderGateway& gateway) {
    auto invariants = input.validate();
    if (!invariants.empty()) {
        throw Error(ErrorCode::SchemaViolation,
                    "enrichment input fails invariants: " + invariants.front());
    }
    EnrichmentOutput out;
    out.taxonomy = input;

    const AgentRole& conceptualizer = config.role(RoleName::Conceptualizer);
    const AgentRole& enricher = config.role(RoleName::Enricher);

    auto freq = collect_frequent(events, config.frequency_threshold);
    auto from_topics = conceptualize(topics, conceptualizer, gateway, &out.warnings);
    auto from_relations = conceptualize(relations, conceptualizer, gateway, &out.warnings);
    auto candidates =
        build_candidate_set(freq, from_topics, from_relations, config.threshold, gateway);

    for (const auto& candidate : candidates) {
        PositionDecision decision = position_candidate(out.taxonomy, candidate, enricher,
                                                       gateway, config.threshold, &out.warnings);
        nlohmann::json record = {
            {"candidate", candidate.label},
            {"definition", candidate.definition},
            {"source", candidate_source_name(candidate.source)},
            {"origin", candidate.origin_ref},
            {"domain", decision.domain},
            {"max_similarity", decision.max_similarity},
        };
        if (decision.inserted) {
            record["op"] = "insert";
            record["id"] = decision.node_id;
            record["label"] = candidate.label;
            record["parent"] = decision.parent_id;
            record["parent_is_enriched"] = decision.parent_is_enriched;
            record["fallback_root"] = decision.fallback_root;
            ++out.inserted;
        } else {
            record["op"] = "duplicate";
            record["of"] = decision.node_id;
            ++out.duplicates;
        }
        out.decision_log.push_back(std::move(record));
    }

    auto bad = out.taxonomy.validate();
    if (!bad.empty()) {
        throw Error(ErrorCode::SchemaViolation, "enrichment broke invariants: " + bad.front());
    }
    return out;
}

Taxonomy replay_decision_log(Taxonomy base, const std::vector<nlohmann::json>& decision_log) {
    for (const auto& entry : decision_log) {
        if (entry.value("op", "") != "insert") continue;
        TaxonomyNode node;
        node.id = entry.at("id").get<std::string>();
        node.label = entry.at("candidate").get<std::string>();
        node.definition = entry.value("definition", "");
        node.domain = entry.at("domain").get<std::string>();
        node.provenance = Provenance::Enriched;
        base.add_node(std::move(node), entry.at("parent").get<std::string>());
    }
    return base;
}

} // namespace histax
