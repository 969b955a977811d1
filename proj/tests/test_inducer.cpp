#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "histax/domains.hpp"
#include "histax/inducer.hpp"
#include "histax/jsonio.hpp"
#include "test_support.hpp"

using histax::AgentRole;
using histax::Error;
using histax::ErrorCode;
using histax::RoleName;
using histax::Taxonomy;
using namespace testsupport;

namespace {

nlohmann::json extract_response(std::initializer_list<const char*> types) {
    nlohmann::json arr = nlohmann::json::array();
    for (const char* t : types) {
        arr.push_back({{"event_type", t}, {"trigger", t}, {"text", std::string("關於") + t}});
    }
    return arr;
}

const histax::DomainSpec& military_spec() {
    for (const auto& s : histax::default_domain_specs()) {
        if (s.name == "Military") return s;
    }
    throw std::runtime_error("unreachable");
}

} // namespace

TEST_CASE("extract_events unions extractor outputs with extractor tags") {
    nlohmann::json fixtures = {
        {"chat",
         {{"extract",
           {{{"match", {{"_model", "model-a"}}}, {"response", extract_response({"叛亂", "圍城"})}},
            {{"match", {{"_model", "model-b"}}},
             {"response", extract_response({"冊封", "和親", "會盟"})}}}}}},
    };
    auto rig = make_mock(fixtures);
    std::vector<AgentRole> extractors = {make_role(RoleName::Extractor, "model-a"),
                                         make_role(RoleName::Extractor, "model-b")};
    auto result = histax::extract_events("書一", "卷一", "某年某月……", extractors, *rig.gateway);
    CHECK(result.records.size() == 5);
    std::set<std::string> tags;
    for (const auto& r : result.records) tags.insert(r.extractor);
    CHECK(tags == std::set<std::string>{"model-a", "model-b"});
    CHECK(result.warnings.empty());
}

TEST_CASE("one failing extractor is isolated with a warning") {
    nlohmann::json fixtures = {
        {"chat",
         {{"extract",
           {{{"match", {{"_model", "model-a"}}},
             {"response", extract_response({"叛亂", "圍城"})}}}}}},
    };
    auto rig = make_mock(fixtures);
    std::vector<AgentRole> extractors = {make_role(RoleName::Extractor, "model-a"),
                                         make_role(RoleName::Extractor, "model-b")};
    auto result = histax::extract_events("書一", "卷一", "某年某月……", extractors, *rig.gateway);
    CHECK(result.records.size() == 2);
    REQUIRE(result.warnings.size() == 1);
    CHECK(result.warnings[0].find("model-b") != std::string::npos);
}

TEST_CASE("all extractors failing raises AllExtractorsFailed") {
    auto rig = make_mock(nlohmann::json{{"chat", nlohmann::json::object()}});
    std::vector<AgentRole> extractors = {make_role(RoleName::Extractor, "model-a")};
    try {
        histax::extract_events("書一", "卷一", "text", extractors, *rig.gateway);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::AllExtractorsFailed);
    }
}

TEST_CASE("identical fixtures for all extractors keep duplicates") {
    nlohmann::json fixtures = {
        {"chat", {{"extract", {{{"default", true}, {"response", extract_response({"叛亂"})}}}}}},
    };
    auto rig = make_mock(fixtures);
    std::vector<AgentRole> extractors = {make_role(RoleName::Extractor, "model-a"),
                                         make_role(RoleName::Extractor, "model-b"),
                                         make_role(RoleName::Extractor, "model-c")};
    auto result = histax::extract_events("書一", "卷一", "text", extractors, *rig.gateway);
    CHECK(result.records.size() == 3); // dedup is deferred
}

TEST_CASE("classify_domain returns a scripted canonical domain") {
    nlohmann::json fixtures = {
        {"chat",
         {{"classify",
           {{{"match", {{"event_type", "冊封使節"}}}, {"response", {{"domain", "Diplomacy"}}}}}}}},
    };
    auto rig = make_mock(fixtures);
    auto domain = histax::classify_domain("冊封使節", {"遣使冊封"}, histax::default_domain_specs(),
                                          make_role(RoleName::Classifier), *rig.gateway);
    CHECK(domain == "Diplomacy");
}

TEST_CASE("a label outside the eight domains is MalformedResponse after one re-prompt") {
    nlohmann::json fixtures = {
        {"chat",
         {{"classify", {{{"default", true}, {"response", {{"domain", "Weather"}}}}}}}},
    };
    auto rig = make_mock(fixtures);
    size_t before = rig.transcript->records_written();
    try {
        histax::classify_domain("風災", {"大風"}, histax::default_domain_specs(),
                                make_role(RoleName::Classifier), *rig.gateway);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MalformedResponse);
    }
    CHECK(rig.transcript->records_written() - before == 2);
}

TEST_CASE("batch classification partition sizes equal the fixture ground truth") {
    // 40 synthetic types, scripted to land 10/10/12/8 across four domains
    nlohmann::json rules = nlohmann::json::array();
    std::map<std::string, int> truth;
    std::vector<std::string> types;
    const char* domains[4] = {"Politics", "Military", "Society", "Ritual"};
    int sizes[4] = {10, 10, 12, 8};
    int counter = 0;
    for (int d = 0; d < 4; ++d) {
        for (int i = 0; i < sizes[d]; ++i) {
            std::string type = "type-" + std::to_string(counter++);
            types.push_back(type);
            truth[domains[d]]++;
            rules.push_back({{"match", {{"event_type", type}}},
                             {"response", {{"domain", domains[d]}}}});
        }
    }
    auto rig = make_mock(nlohmann::json{{"chat", {{"classify", rules}}}});
    std::map<std::string, int> got;
    for (const auto& type : types) {
        got[histax::classify_domain(type, {"sample"}, histax::default_domain_specs(),
                                    make_role(RoleName::Classifier), *rig.gateway)]++;
    }
    CHECK(got == truth);
}

TEST_CASE("induction collapses 24 leaves over two rounds into a depth-3 tree") {
    // round 1: 24 -> 12 (still >= 10, so a second round runs); round 2: 12 -> 3
    std::vector<std::string> leaves;
    std::map<std::string, long long> freq;
    for (int i = 0; i < 24; ++i) {
        leaves.push_back("leaf-" + std::to_string(i));
        freq[leaves.back()] = 24 - i; // rank order == index order
    }
    nlohmann::json round1 = nlohmann::json::array();
    for (int p = 0; p < 12; ++p) {
        nlohmann::json children = nlohmann::json::array();
        children.push_back("leaf-" + std::to_string(2 * p));
        children.push_back("leaf-" + std::to_string(2 * p + 1));
        round1.push_back({{"label", "mid-" + std::to_string(p)},
                          {"definition", "mid level"},
                          {"children", children}});
    }
    nlohmann::json round2 = nlohmann::json::array();
    for (int p = 0; p < 3; ++p) {
        nlohmann::json children = nlohmann::json::array();
        for (int k = 0; k < 4; ++k) children.push_back("mid-" + std::to_string(4 * p + k));
        round2.push_back({{"label", "top-" + std::to_string(p)},
                          {"definition", "top level"},
                          {"children", children}});
    }
    nlohmann::json fixtures = {
        {"chat",
         {{"generate", {{{"response", round1}}, {{"response", round2}}}},
          {"merge", {{{"response", round1}}, {{"response", round2}}}}}},
    };
    auto rig = make_mock(fixtures);
    Taxonomy tax;
    auto result = histax::induce_domain_taxonomy(
        military_spec(), leaves, freq, {make_role(RoleName::Generator, "gen")},
        make_role(RoleName::Merger, "merge"), *rig.gateway, tax);

    CHECK(result.rounds == 2);
    CHECK(result.top_width == 3);
    CHECK(tax.node_count() == 1 + 3 + 12 + 24);
    CHECK(tax.structural_stats().max_depth == 4); // root + top + mid + leaf

    // every node carries a definition except raw leaves
    std::set<std::string> leaf_labels;
    for (const auto& id : tax.node_ids()) {
        const auto& n = tax.node(id);
        if (tax.children(id).empty()) leaf_labels.insert(n.label);
    }
    CHECK(leaf_labels == std::set<std::string>(leaves.begin(), leaves.end()));
}

TEST_CASE("fewer than ten types still get one generation round") {
    std::vector<std::string> leaves;
    std::map<std::string, long long> freq;
    for (int i = 0; i < 7; ++i) {
        leaves.push_back("small-" + std::to_string(i));
        freq[leaves.back()] = 1;
    }
    nlohmann::json parents = nlohmann::json::array();
    nlohmann::json c1 = nlohmann::json::array();
    nlohmann::json c2 = nlohmann::json::array();
    for (int i = 0; i < 4; ++i) c1.push_back("small-" + std::to_string(i));
    for (int i = 4; i < 7; ++i) c2.push_back("small-" + std::to_string(i));
    parents.push_back({{"label", "group-a"}, {"definition", "a"}, {"children", c1}});
    parents.push_back({{"label", "group-b"}, {"definition", "b"}, {"children", c2}});
    nlohmann::json fixtures = {
        {"chat",
         {{"generate", {{{"default", true}, {"response", parents}}}},
          {"merge", {{{"default", true}, {"response", parents}}}}}},
    };
    auto rig = make_mock(fixtures);
    Taxonomy tax;
    auto result = histax::induce_domain_taxonomy(
        military_spec(), leaves, freq, {make_role(RoleName::Generator)},
        make_role(RoleName::Merger), *rig.gateway, tax);
    CHECK(result.rounds == 1);
    CHECK(result.top_width == 2);
    // all leaves sit under abstracted parents, not directly under the root
    for (const auto& id : tax.node_ids()) {
        const auto& n = tax.node(id);
        if (tax.children(id).empty()) {
            CHECK(tax.node(*n.parent).label.substr(0, 5) == "group");
        }
    }
}

TEST_CASE("a mock that never reduces the width raises NonConvergence") {
    std::vector<std::string> leaves;
    std::map<std::string, long long> freq;
    for (int i = 0; i < 12; ++i) {
        leaves.push_back("stuck-" + std::to_string(i));
        freq[leaves.back()] = 1;
    }
    // proposes one parent per item, width never shrinks
    nlohmann::json parents = nlohmann::json::array();
    for (int i = 0; i < 12; ++i) {
        parents.push_back({{"label", "wrap-" + std::to_string(i)},
                           {"definition", ""},
                           {"children", nlohmann::json::array({"stuck-" + std::to_string(i)})}});
    }
    // round 2 wraps the wrappers, and so on; a default rule that always
    // returns matching parents is impossible, so re-wrap by returning the
    // same labels as children of themselves is invalid -> carryover keeps
    // width constant instead
    nlohmann::json fixtures = {
        {"chat",
         {{"generate", {{{"default", true}, {"response", parents}}}},
          {"merge", {{{"default", true}, {"response", parents}}}}}},
    };
    auto rig = make_mock(fixtures);
    Taxonomy tax;
    try {
        histax::induce_domain_taxonomy(military_spec(), leaves, freq,
                                       {make_role(RoleName::Generator)},
                                       make_role(RoleName::Merger), *rig.gateway, tax);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonConvergence);
    }
}

TEST_CASE("round-robin partition by frequency rank reaches each generator") {
    std::vector<std::string> leaves = {"t0", "t1", "t2", "t3", "t4", "t5"};
    std::map<std::string, long long> freq = {{"t0", 6}, {"t1", 5}, {"t2", 4},
                                             {"t3", 3}, {"t4", 2}, {"t5", 1}};
    auto items_for = [](std::initializer_list<const char*> labels) {
        nlohmann::json arr = nlohmann::json::array();
        for (const char* l : labels) arr.push_back({{"label", l}, {"definition", ""}});
        return arr.dump();
    };
    nlohmann::json parent_a = nlohmann::json::array();
    parent_a.push_back({{"label", "even"},
                        {"definition", "even ranks"},
                        {"children", {"t0", "t2", "t4"}}});
    nlohmann::json parent_b = nlohmann::json::array();
    parent_b.push_back({{"label", "odd"},
                        {"definition", "odd ranks"},
                        {"children", {"t1", "t3", "t5"}}});
    nlohmann::json merged = nlohmann::json::array();
    merged.push_back(parent_a[0]);
    merged.push_back(parent_b[0]);
    nlohmann::json fixtures = {
        {"chat",
         {{"generate",
           {{{"match", {{"_model", "gen-a"}, {"items", items_for({"t0", "t2", "t4"})}}},
             {"response", parent_a}},
            {{"match", {{"_model", "gen-b"}, {"items", items_for({"t1", "t3", "t5"})}}},
             {"response", parent_b}}}},
          {"merge", {{{"default", true}, {"response", merged}}}}}},
    };
    auto rig = make_mock(fixtures);
    Taxonomy tax;
    auto result = histax::induce_domain_taxonomy(
        military_spec(), leaves, freq,
        {make_role(RoleName::Generator, "gen-a"), make_role(RoleName::Generator, "gen-b")},
        make_role(RoleName::Merger), *rig.gateway, tax);
    CHECK(result.rounds == 1);
    CHECK(result.top_width == 2);
    // the match rules above only fire for the exact stratified partitions,
    // so reaching here proves the round-robin split
    std::set<std::string> even_children;
    for (const auto& id : tax.node_ids()) {
        const auto& n = tax.node(id);
        if (n.label == "even") {
            for (const auto& c : tax.children(id)) even_children.insert(tax.node(c).label);
        }
    }
    CHECK(even_children == std::set<std::string>{"t0", "t2", "t4"});
}

TEST_CASE("induce subcommand extracts from a chapter tree and writes checkpoints") {
    namespace fs = std::filesystem;
    fs::path scratch = fs::temp_directory_path() / "histax_induce_chapters";
    fs::remove_all(scratch);
    fs::create_directories(scratch / "chapters" / "書一");
    fs::create_directories(scratch / "chapters" / "書二");
    histax::write_file_atomic((scratch / "chapters" / "書一" / "卷一.txt").string(),
                              "某年叛亂起，官軍圍城。");
    histax::write_file_atomic((scratch / "chapters" / "書二" / "卷二.txt").string(),
                              "是歲開科取士。");

    nlohmann::json mil_tree = nlohmann::json::array();
    mil_tree.push_back({{"label", "軍事衝突"},
                        {"definition", "armed conflict"},
                        {"children", {"叛亂", "圍城"}}});
    nlohmann::json pol_tree = nlohmann::json::array();
    pol_tree.push_back(
        {{"label", "選官"}, {"definition", "selection"}, {"children", {"科舉"}}});
    nlohmann::json fixtures = {
        {"chat",
         {{"extract",
           {{{"match", {{"chapter", "卷一"}}}, {"response", extract_response({"叛亂", "圍城"})}},
            {{"match", {{"chapter", "卷二"}}}, {"response", extract_response({"科舉"})}}}},
          {"classify",
           {{{"match", {{"event_type", "叛亂"}}}, {"response", {{"domain", "Military"}}}},
            {{"match", {{"event_type", "圍城"}}}, {"response", {{"domain", "Military"}}}},
            {{"match", {{"event_type", "科舉"}}}, {"response", {{"domain", "Politics"}}}}}},
          {"generate",
           {{{"match", {{"domain", "Military"}}}, {"response", mil_tree}},
            {{"match", {{"domain", "Politics"}}}, {"response", pol_tree}}}},
          {"merge",
           {{{"match", {{"domain", "Military"}}}, {"response", mil_tree}},
            {{"match", {{"domain", "Politics"}}}, {"response", pol_tree}}}}}},
    };
    histax::write_file_atomic((scratch / "fixtures.json").string(), fixtures.dump());
    nlohmann::json config = {
        {"threshold", 0.6},
        {"retry_backoff_ms", 0},
        {"roles",
         {{"extractor",
           {{{"model", "mock-extract-a"}, {"temperature", 0}},
            {{"model", "mock-extract-b"}, {"temperature", 0}},
            {{"model", "mock-extract-c"}, {"temperature", 0}}}},
          {"generator", {{"model", "mock-gen"}, {"temperature", 0}}},
          {"classifier", {{"model", "mock-mid"}, {"temperature", 0}}},
          {"conceptualizer", {{"model", "mock-mid"}, {"temperature", 0}}},
          {"granularity_judge", {{"model", "mock-mid"}, {"temperature", 0}}},
          {"merger", {{"model", "mock-strong"}}},
          {"judger", {{"model", "mock-strong"}}},
          {"expander", {{"model", "mock-strong"}}},
          {"enricher", {{"model", "mock-strong"}}}}},
    };
    histax::write_file_atomic((scratch / "config.json").string(), config.dump());

    std::string cmd = std::string(HISTAX_CLI) + " induce --mock --seed 3" +
                      " --config " + (scratch / "config.json").string() +
                      " --fixtures " + (scratch / "fixtures.json").string() +
                      " --templates " + HISTAX_TEMPLATES_DIR +
                      " --chapters " + (scratch / "chapters").string() +
                      " --run-dir " + (scratch / "run").string() + " > /dev/null 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);

    auto tax = histax::Taxonomy::load((scratch / "run" / "induced.json").string());
    CHECK(tax.has_domain("Military"));
    CHECK(tax.has_domain("Politics"));
    std::set<std::string> leaves;
    for (const auto& id : tax.node_ids()) {
        if (tax.children(id).empty()) leaves.insert(tax.node(id).label);
    }
    CHECK(leaves == std::set<std::string>{"叛亂", "圍城", "科舉"});
    // union of all three extractors, duplicates retained
    auto extracted =
        histax::load_events((scratch / "run" / "events_extracted.jsonl").string());
    CHECK(extracted.size() == 9); // (2 + 1) events x 3 extractors
    auto classified =
        histax::load_events((scratch / "run" / "events_classified.jsonl").string());
    for (const auto& e : classified) CHECK_FALSE(e.domain.empty());
}

TEST_CASE("run_induction classifies types and builds per-domain trees deterministically") {
    auto build_fixtures = [] {
        nlohmann::json classify_rules = nlohmann::json::array();
        classify_rules.push_back(
            {{"match", {{"event_type", "叛亂"}}}, {"response", {{"domain", "Military"}}}});
        classify_rules.push_back(
            {{"match", {{"event_type", "圍城"}}}, {"response", {{"domain", "Military"}}}});
        classify_rules.push_back(
            {{"match", {{"event_type", "科舉"}}}, {"response", {{"domain", "Politics"}}}});
        nlohmann::json mil = nlohmann::json::array();
        mil.push_back({{"label", "軍事衝突"},
                       {"definition", "armed conflict"},
                       {"children", {"叛亂", "圍城"}}});
        nlohmann::json pol = nlohmann::json::array();
        pol.push_back(
            {{"label", "選官"}, {"definition", "selection"}, {"children", {"科舉"}}});
        return nlohmann::json{
            {"chat",
             {{"classify", classify_rules},
              {"generate",
               {{{"match", {{"domain", "Military"}}}, {"response", mil}},
                {{"match", {{"domain", "Politics"}}}, {"response", pol}}}},
              {"merge",
               {{{"match", {{"domain", "Military"}}}, {"response", mil}},
                {{"match", {{"domain", "Politics"}}}, {"response", pol}}}}}},
        };
    };
    auto make_events = [] {
        std::vector<histax::EventRecord> events;
        for (const char* t : {"叛亂", "叛亂", "圍城", "科舉"}) {
            histax::EventRecord r;
            r.event_type = t;
            r.text = std::string("關於") + t;
            events.push_back(r);
        }
        return events;
    };
    histax::RunConfig config = histax::RunConfig::defaults();
    config.roles[RoleName::Generator] = {make_role(RoleName::Generator)};
    config.template_dir = HISTAX_TEMPLATES_DIR;

    auto rig1 = make_mock(build_fixtures());
    auto out1 = histax::run_induction(make_events(), config, *rig1.gateway);
    auto rig2 = make_mock(build_fixtures());
    auto out2 = histax::run_induction(make_events(), config, *rig2.gateway);

    CHECK(out1.taxonomy.to_json() == out2.taxonomy.to_json());
    CHECK(out1.taxonomy.validate(true).empty());
    CHECK(out1.taxonomy.domain_order() ==
          std::vector<std::string>{"Politics", "Military"}); // canonical order
    for (const auto& e : out1.classified_events) CHECK_FALSE(e.domain.empty());
    CHECK(out1.per_domain.at("Military").rounds == 1);
}
