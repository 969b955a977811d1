#include "histax/ingest.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "histax/jsonio.hpp"

namespace histax {

std::string normalize_ws(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = false;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out += ' ';
        in_space = false;
        out += c;
    }
    return out;
}

nlohmann::json EventRecord::to_json() const {
    nlohmann::json j = {
        {"text", text},         {"event_type", event_type}, {"trigger", trigger},
        {"book", book},         {"chapter", chapter},       {"extractor", extractor},
    };
    if (!domain.empty()) j["domain"] = domain;
    return j;
}

std::vector<EventRecord> load_events(const std::string& path, LoadReport* report) {
    if (!file_exists(path)) {
        throw Error(ErrorCode::FileMissing, "events file '" + path + "'");
    }
    auto lines = load_jsonl_file(path);
    std::vector<EventRecord> out;
    std::vector<std::string> errors;
    for (const auto& [lineno, doc] : lines) {
        if (!doc.is_object()) {
            errors.push_back("line " + std::to_string(lineno) + ": not an object");
            continue;
        }
        EventRecord r;
        r.text = doc.value("text", "");
        r.event_type = doc.value("event_type", "");
        r.trigger = doc.value("trigger", "");
        r.book = doc.value("book", "");
        r.chapter = doc.value("chapter", "");
        r.extractor = doc.value("extractor", "");
        r.domain = doc.value("domain", "");
        if (normalize_ws(r.event_type).empty()) {
            errors.push_back("line " + std::to_string(lineno) + ": missing event_type");
            continue;
        }
        if (normalize_ws(r.text).empty()) {
            errors.push_back("line " + std::to_string(lineno) + ": missing text");
            continue;
        }
        if (report && !r.trigger.empty() && r.text.find(r.trigger) == std::string::npos) {
            report->warnings.push_back("line " + std::to_string(lineno) +
                                       ": trigger not found in text (normalized extraction?)");
        }
        out.push_back(std::move(r));
    }
    if (!errors.empty()) {
        std::string joined;
        for (const auto& e : errors) {
            if (!joined.empty()) joined += "; ";
            joined += e;
        }
        throw Error(ErrorCode::SchemaViolation, "'" + path + "': " + joined);
    }
    return out;
}

std::vector<TopicEntry> load_topics(const std::string& path) {
    if (!file_exists(path)) {
        throw Error(ErrorCode::FileMissing, "topics file '" + path + "'");
    }
    nlohmann::json doc = load_json_file(path);
    if (!doc.is_array()) {
        throw Error(ErrorCode::SchemaViolation, "'" + path + "' must be a JSON array");
    }
    std::vector<TopicEntry> out;
    for (const auto& jt : doc) {
        TopicEntry t;
        t.id = jt.value("id", 0);
        t.label = jt.value("label", "");
        if (jt.contains("top_words")) {
            t.top_words = jt["top_words"].get<std::vector<std::string>>();
        }
        if (normalize_ws(t.label).empty()) {
            throw Error(ErrorCode::SchemaViolation,
                        "'" + path + "': topic " + std::to_string(t.id) + " has no label");
        }
        if (t.top_words.empty()) {
            throw Error(ErrorCode::SchemaViolation,
                        "'" + path + "': topic '" + t.label + "' has no top_words");
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<RelationEntry> load_relations(const std::string& path) {
    if (!file_exists(path)) {
        throw Error(ErrorCode::FileMissing, "relations file '" + path + "'");
    }
    nlohmann::json doc = load_json_file(path);
    if (!doc.is_array()) {
        throw Error(ErrorCode::SchemaViolation, "'" + path + "' must be a JSON array");
    }
    std::vector<RelationEntry> out;
    for (const auto& jr : doc) {
        RelationEntry r;
        r.name = jr.value("name", "");
        r.source = jr.value("source", "");
        if (normalize_ws(r.name).empty()) {
            throw Error(ErrorCode::SchemaViolation, "'" + path + "': relation with empty name");
        }
        out.push_back(std::move(r));
    }
    return out;
}

void save_events(const std::string& path, const std::vector<EventRecord>& events) {
    std::ostringstream out;
    for (const auto& e : events) out << e.to_json().dump() << "\n";
    write_file_atomic(path, out.str());
}

std::map<std::string, long long> event_type_frequency(const std::vector<EventRecord>& events) {
    std::map<std::string, long long> counts;
    for (const auto& e : events) {
        counts[normalize_ws(e.event_type)]++;
    }
    return counts;
}

std::vector<std::string> dedup_event_types(const std::vector<std::string>& types,
                                           const std::map<std::string, long long>& frequency,
                                           double h, ProviderGateway& gateway) {
    if (h <= 0.0 || h >= 1.0) {
        throw Error(ErrorCode::ConfigInvalid, "dedup threshold must lie in (0,1)");
    }
    // distinct normalized types, processed by frequency desc then label asc
    std::vector<std::string> distinct;
    for (const auto& t : types) {
        std::string n = normalize_ws(t);
        if (n.empty()) continue;
        if (std::find(distinct.begin(), distinct.end(), n) == distinct.end()) {
            distinct.push_back(n);
        }
    }
    std::stable_sort(distinct.begin(), distinct.end(),
                     [&frequency](const std::string& a, const std::string& b) {
                         long long fa = frequency.count(a) ? frequency.at(a) : 0;
                         long long fb = frequency.count(b) ? frequency.at(b) : 0;
                         if (fa != fb) return fa > fb;
                         return a < b;
                     });
    if (distinct.empty()) return {};

    auto embedded = gateway.embed(distinct);
    std::vector<std::string> survivors;
    std::vector<const EmbeddingVector*> survivor_vecs;
    for (size_t i = 0; i < distinct.size(); ++i) {
        bool duplicate = false;
        for (const auto* sv : survivor_vecs) {
            if (cosine_similarity(*sv, embedded[i]) > h) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) {
            survivors.push_back(distinct[i]);
            survivor_vecs.push_back(&embedded[i]);
        }
    }
    return survivors;
}

std::vector<std::string> dedup_event_types(const std::vector<std::string>& types, double h,
                                           ProviderGateway& gateway) {
    std::map<std::string, long long> ones;
    for (const auto& t : types) ones[normalize_ws(t)] = 1;
    return dedup_event_types(types, ones, h, gateway);
}

} // namespace histax
