#pragma once

#include <map>
#include <string>
#include <vector>

#include "histax/config.hpp"
#include "histax/domains.hpp"
#include "histax/gateway.hpp"
#include "histax/ingest.hpp"
#include "histax/taxonomy.hpp"

namespace histax {

// Top-level width a domain must shrink below before induction stops.
inline constexpr int kInductionStopWidth = 10;
inline constexpr int kInductionRoundCap = 6;

struct ExtractionResult {
    std::vector<EventRecord> records;
    std::vector<std::string> warnings; // per-extractor failures, isolated
};

// Runs every extractor over the chapter and unions the results, tagging each
// record with its extractor's model id. A failing extractor is skipped with
// a warning; AllExtractorsFailed only if none succeed.
ExtractionResult extract_events(const std::string& book, const std::string& chapter,
                                const std::string& chapter_text,
                                const std::vector<AgentRole>& extractor_roles,
                                ProviderGateway& gateway);

// Assigns one of the eight canonical domains. A label outside the set after
// the one re-prompt is MalformedResponse.
std::string classify_domain(const std::string& event_type,
                            const std::vector<std::string>& sample_texts,
                            const std::vector<DomainSpec>& domain_specs,
                            const AgentRole& classifier, ProviderGateway& gateway);

struct InducedDomain {
    int rounds = 0;
    int top_width = 0;
    std::vector<std::string> warnings;
};

// Bottom-up induction for one domain: the event types become leaves, each
// round generators propose parents over a round-robin partition and the
// merger unifies them, until the working width drops under ten. Builds the
// domain tree directly into `taxonomy`.
InducedDomain induce_domain_taxonomy(const DomainSpec& domain,
                                     const std::vector<std::string>& event_types,
                                     const std::map<std::string, long long>& frequency,
                                     const std::vector<AgentRole>& generator_roles,
                                     const AgentRole& merger_role, ProviderGateway& gateway,
                                     Taxonomy& taxonomy);

struct InductionOutput {
    Taxonomy taxonomy;
    std::vector<EventRecord> classified_events;
    std::map<std::string, InducedDomain> per_domain;
    std::vector<std::string> warnings;
};

// classify + induce over a full event set.
InductionOutput run_induction(const std::vector<EventRecord>& events, const RunConfig& config,
                              ProviderGateway& gateway);

} // namespace histax
