#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "histax/config.hpp"
#include "histax/gateway.hpp"
#include "histax/ingest.hpp"
#include "histax/taxonomy.hpp"

namespace histax {

enum class CandidateSource { Freq, Topic, Relation };

const char* candidate_source_name(CandidateSource s);

struct CandidateEvent {
    std::string label;
    std::string definition;
    CandidateSource source = CandidateSource::Freq;
    std::string origin_ref; // originating type / topic id / relation name
};

// Event types whose corpus count strictly exceeds f_threshold, ordered by
// count desc then label asc.
std::vector<CandidateEvent> collect_frequent(const std::vector<EventRecord>& events,
                                             int f_threshold);

// Turns topics into explicit event types; a topic may yield several.
// A malformed reply skips that entry with a warning.
std::vector<CandidateEvent> conceptualize(const std::vector<TopicEntry>& topics,
                                          const AgentRole& conceptualizer,
                                          ProviderGateway& gateway,
                                          std::vector<std::string>* warnings);

std::vector<CandidateEvent> conceptualize(const std::vector<RelationEntry>& relations,
                                          const AgentRole& conceptualizer,
                                          ProviderGateway& gateway,
                                          std::vector<std::string>* warnings);

// Union then semantic dedup, processed freq -> topic -> relation so corpus
// evidence outranks derived concepts on ties.
std::vector<CandidateEvent> build_candidate_set(const std::vector<CandidateEvent>& freq,
                                                const std::vector<CandidateEvent>& topic_derived,
                                                const std::vector<CandidateEvent>& relation_derived,
                                                double h, ProviderGateway& gateway);

struct PositionDecision {
    bool inserted = false;
    std::string domain;        // predicted domain
    std::string node_id;       // duplicate-of node, or the new node's id
    std::string parent_id;     // set when inserted
    double max_similarity = 0; // against the predicted domain pre-insertion
    bool parent_is_enriched = false; // insertion chained onto an earlier candidate
    bool fallback_root = false;      // enricher could not name a valid parent
};

// Predict domain, mechanical redundancy check against that domain, then ask
// the enricher for a parent. An unusable parent after the re-prompt attaches
// the candidate under the domain root with a warning.
PositionDecision position_candidate(Taxonomy& taxonomy, const CandidateEvent& candidate,
                                    const AgentRole& enricher, ProviderGateway& gateway,
                                    double h, std::vector<std::string>* warnings);

struct EnrichmentOutput {
    Taxonomy taxonomy;
    std::vector<nlohmann::json> decision_log;
    std::vector<std::string> warnings;
    int inserted = 0;
    int duplicates = 0;
};

EnrichmentOutput run_enrichment(const Taxonomy& input, const std::vector<EventRecord>& events,
                                const std::vector<TopicEntry>& topics,
                                const std::vector<RelationEntry>& relations,
                                const RunConfig& config, ProviderGateway& gateway);

// Replays the inserted decisions on a checkpoint.
Taxonomy replay_decision_log(Taxonomy base, const std::vector<nlohmann::json>& decision_log);

} // namespace histax
