#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "histax/gateway.hpp"

namespace histax {

// One extracted event instance.
struct EventRecord {
    std::string text;
    std::string event_type;
    std::string trigger;
    std::string book;
    std::string chapter;
    std::string extractor;
    std::string domain; // empty until classified

    nlohmann::json to_json() const;
};

struct TopicEntry {
    int id = 0;
    std::string label;
    std::vector<std::string> top_words;
};

struct RelationEntry {
    std::string name;
    std::string source;
};

// Collapses runs of ASCII whitespace and trims the ends; CJK text is
// untouched.
std::string normalize_ws(const std::string& s);

struct LoadReport {
    std::vector<std::string> warnings; // e.g. trigger not found in text
};

// JSON-lines of EventRecord. Malformed lines are collected and reported
// together as one SchemaViolation naming every offending line.
std::vector<EventRecord> load_events(const std::string& path, LoadReport* report = nullptr);

std::vector<TopicEntry> load_topics(const std::string& path);
std::vector<RelationEntry> load_relations(const std::string& path);

void save_events(const std::string& path, const std::vector<EventRecord>& events);

// Exact multiplicities of whitespace-normalized event types.
std::map<std::string, long long> event_type_frequency(const std::vector<EventRecord>& events);

// Greedy semantic dedup in descending-frequency order (ties: lexicographic):
// a type survives iff its similarity to every earlier survivor is <= h.
std::vector<std::string> dedup_event_types(const std::vector<std::string>& types,
                                           const std::map<std::string, long long>& frequency,
                                           double h, ProviderGateway& gateway);

// Convenience overload counting each type once.
std::vector<std::string> dedup_event_types(const std::vector<std::string>& types, double h,
                                           ProviderGateway& gateway);

} // namespace histax
