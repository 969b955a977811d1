#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "histax/metrics.hpp"
#include "test_support.hpp"

using histax::Error;
using histax::ErrorCode;
using histax::RootMode;
using histax::Taxonomy;
using histax::TaxonomyNode;
using namespace testsupport;

namespace {

TaxonomyNode make_node(const std::string& id, const std::string& label,
                       const std::string& domain = "Politics") {
    TaxonomyNode n;
    n.id = id;
    n.label = label;
    n.domain = domain;
    return n;
}

// r -> a -> b chain in one domain
Taxonomy chain_tree() {
    Taxonomy tax;
    tax.add_domain_root(make_node("r", "chain-r"), "");
    tax.add_node(make_node("a", "chain-a"), "r");
    tax.add_node(make_node("b", "chain-b"), "a");
    return tax;
}

nlohmann::json vec(std::initializer_list<double> values) { return nlohmann::json(values); }

} // namespace

TEST_CASE("kendall tau-b fixtures") {
    SUBCASE("perfect concordance and discordance") {
        std::vector<double> x = {1, 2, 3, 4};
        std::vector<double> inc = {10, 20, 30, 40};
        std::vector<double> dec = {40, 30, 20, 10};
        CHECK(*histax::kendall_tau_b(x, inc) == 1.0);
        CHECK(*histax::kendall_tau_b(x, dec) == -1.0);
    }
    SUBCASE("tie handling matches the textbook value") {
        std::vector<double> x = {1, 1, 2};
        std::vector<double> y = {1, 2, 3};
        CHECK(*histax::kendall_tau_b(x, y) ==
              doctest::Approx(2.0 / std::sqrt(6.0)).epsilon(1e-15));
    }
    SUBCASE("degenerate inputs return nullopt") {
        std::vector<double> flat = {5, 5, 5};
        std::vector<double> y = {1, 2, 3};
        CHECK_FALSE(histax::kendall_tau_b(flat, y).has_value());
        CHECK_FALSE(histax::kendall_tau_b(y, flat).has_value());
        CHECK_FALSE(histax::kendall_tau_b(std::vector<double>{1}, std::vector<double>{2})
                        .has_value());
    }
}

TEST_CASE("kendall tau-b equals the explicit-counting oracle on random data") {
    std::mt19937 rng(42);
    for (int round = 0; round < 200; ++round) {
        std::uniform_int_distribution<int> len(2, 60);
        std::uniform_int_distribution<int> value(0, 8); // force plenty of ties
        int n = len(rng);
        std::vector<double> x(n), y(n);
        for (int i = 0; i < n; ++i) {
            x[i] = value(rng) / 4.0;
            y[i] = value(rng) / 4.0;
        }
        auto fast = histax::kendall_tau_b(x, y);
        auto brute = brute_force_tau_b(x, y);
        CHECK(fast.has_value() == brute.has_value());
        if (fast && brute) CHECK(*fast == *brute);
    }
}

TEST_CASE("csc: chain with similarity ordered like structure weight gives 1.0") {
    nlohmann::json fixtures = {
        {"embeddings",
         {{"dimension", 3},
          {"vectors",
           {{"chain-r", vec({1.0, 0.0, 0.0})},
            {"chain-a", vec({0.8, 0.6, 0.0})},
            {"chain-b", vec({0.5, 0.866, 0.0})}}}}},
    };
    auto rig = make_mock(fixtures, 7, 3);
    Taxonomy tax = chain_tree();
    auto result = histax::csc(tax, RootMode::PerDomain, *rig.gateway);
    REQUIRE(result.value.has_value());
    CHECK(*result.value == 1.0);
    CHECK(result.pair_count == 3);
}

TEST_CASE("csc: exactly reversed similarity ordering gives -1.0") {
    nlohmann::json fixtures = {
        {"embeddings",
         {{"dimension", 3},
          {"vectors",
           {{"chain-r", vec({1.0, 0.0, 0.0})},
            {"chain-a", vec({0.4, -1.39, 0.0})},
            {"chain-b", vec({0.99, 0.141, 0.0})}}}}},
    };
    auto rig = make_mock(fixtures, 7, 3);
    Taxonomy tax = chain_tree();
    auto result = histax::csc(tax, RootMode::PerDomain, *rig.gateway);
    REQUIRE(result.value.has_value());
    CHECK(*result.value == -1.0);
}

TEST_CASE("csc equals the brute-force pair-of-pairs oracle on random trees, exactly") {
    for (uint64_t seed = 1; seed <= 60; ++seed) {
        std::mt19937 rng(static_cast<unsigned>(seed * 977));
        std::uniform_int_distribution<int> size(5, 15);
        Taxonomy tax = random_tree(rng, size(rng));
        auto rig = make_mock(nlohmann::json::object(), seed, 12);

        auto result = histax::csc(tax, RootMode::PerDomain, *rig.gateway);

        // independent route: naive paths for W, plain-loop cosine for S
        auto ids = tax.node_ids();
        std::vector<std::string> texts;
        for (const auto& id : ids) texts.push_back(histax::node_embed_text(tax.node(id)));
        auto vectors = rig.gateway->embed(texts);
        std::vector<double> w, s;
        for (size_t i = 0; i < ids.size(); ++i) {
            for (size_t j = i + 1; j < ids.size(); ++j) {
                int lca = naive_lca_depth(tax, ids[i], ids[j]);
                int da = static_cast<int>(naive_path(tax, ids[i]).size());
                int db = static_cast<int>(naive_path(tax, ids[j]).size());
                w.push_back(2.0 * lca / static_cast<double>(da + db));
                s.push_back(naive_cosine(vectors[i].values, vectors[j].values));
            }
        }
        auto oracle = brute_force_tau_b(w, s);
        REQUIRE(result.value.has_value() == oracle.has_value());
        if (oracle) CHECK(*result.value == *oracle);
    }
}

TEST_CASE("csc is invariant to node id relabeling and insertion order") {
    std::mt19937 rng(5);
    Taxonomy tax = random_tree(rng, 12);
    auto rig = make_mock(nlohmann::json::object(), 3, 10);
    auto base = histax::csc(tax, RootMode::PerDomain, *rig.gateway);

    // same tree, renamed ids (labels unchanged -> same embeddings)
    Taxonomy renamed;
    {
        auto ids = tax.node_ids();
        std::map<std::string, std::string> rename;
        for (size_t i = 0; i < ids.size(); ++i) {
            rename[ids[i]] = "z" + std::to_string(997 - i);
        }
        for (const auto& id : ids) {
            const auto& n = tax.node(id);
            TaxonomyNode copy;
            copy.id = rename[id];
            copy.label = n.label;
            copy.domain = n.domain;
            if (n.parent) {
                renamed.add_node(std::move(copy), rename[*n.parent]);
            } else {
                renamed.add_domain_root(std::move(copy), "");
            }
        }
    }
    auto after = histax::csc(renamed, RootMode::PerDomain, *rig.gateway);
    REQUIRE(after.value.has_value());
    CHECK(*after.value == *base.value);

    // same tree, children inserted in reverse order -> different pair order
    Taxonomy reordered;
    {
        auto ids = tax.node_ids();
        std::vector<std::string> reversed_children;
        reordered.add_domain_root(
            [&] {
                const auto& n = tax.node(ids.front());
                TaxonomyNode c;
                c.id = n.id;
                c.label = n.label;
                c.domain = n.domain;
                return c;
            }(),
            "");
        // BFS with reversed child order
        std::vector<std::string> queue = {ids.front()};
        for (size_t q = 0; q < queue.size(); ++q) {
            auto children = tax.children(queue[q]);
            for (auto it = children.rbegin(); it != children.rend(); ++it) {
                const auto& n = tax.node(*it);
                TaxonomyNode c;
                c.id = n.id;
                c.label = n.label;
                c.domain = n.domain;
                reordered.add_node(std::move(c), queue[q]);
                queue.push_back(*it);
            }
        }
    }
    auto reordered_result = histax::csc(reordered, RootMode::PerDomain, *rig.gateway);
    REQUIRE(reordered_result.value.has_value());
    CHECK(*reordered_result.value == *base.value);
}

TEST_CASE("csc global mode spans domains through the virtual root") {
    Taxonomy tax = chain_tree();
    tax.add_domain_root(make_node("m", "mil-root", "Military"), "");
    tax.add_node(make_node("m1", "mil-leaf", "Military"), "m");
    auto rig = make_mock(nlohmann::json::object(), 11, 10);
    auto result = histax::csc(tax, RootMode::Global, *rig.gateway);
    CHECK(result.pair_count == 10); // C(5,2) over all real nodes
    CHECK(result.per_domain.empty());
    REQUIRE(result.value.has_value());

    // independent route with +1-shifted depths and lca 1 across domains
    auto ids = tax.node_ids();
    std::vector<std::string> texts;
    for (const auto& id : ids) texts.push_back(histax::node_embed_text(tax.node(id)));
    auto vectors = rig.gateway->embed(texts);
    std::vector<double> w, s;
    for (size_t i = 0; i < ids.size(); ++i) {
        for (size_t j = i + 1; j < ids.size(); ++j) {
            bool same = tax.node(ids[i]).domain == tax.node(ids[j]).domain;
            int lca = same ? naive_lca_depth(tax, ids[i], ids[j]) + 1 : 1;
            int da = static_cast<int>(naive_path(tax, ids[i]).size()) + 1;
            int db = static_cast<int>(naive_path(tax, ids[j]).size()) + 1;
            w.push_back(2.0 * lca / static_cast<double>(da + db));
            s.push_back(naive_cosine(vectors[i].values, vectors[j].values));
        }
    }
    auto oracle = brute_force_tau_b(w, s);
    REQUIRE(oracle.has_value());
    CHECK(*result.value == *oracle);

    // a single-node taxonomy has no pair to rank
    Taxonomy tiny;
    tiny.add_domain_root(make_node("only", "only"), "");
    CHECK_THROWS_AS(histax::csc(tiny, RootMode::Global, *rig.gateway), Error);
}

TEST_CASE("csc per-domain means skip degenerate scopes") {
    Taxonomy tax;
    tax.add_domain_root(make_node("r", "chain-r"), "");
    tax.add_node(make_node("a", "chain-a"), "r");
    tax.add_node(make_node("b", "chain-b"), "a");
    // second domain with a single pair: W has one value -> tau undefined
    tax.add_domain_root(make_node("m", "Military", "Military"), "");
    tax.add_node(make_node("m1", "mil-leaf", "Military"), "m");

    nlohmann::json fixtures = {
        {"embeddings",
         {{"dimension", 3},
          {"vectors",
           {{"chain-r", vec({1.0, 0.0, 0.0})},
            {"chain-a", vec({0.8, 0.6, 0.0})},
            {"chain-b", vec({0.5, 0.866, 0.0})}}}}},
    };
    auto rig = make_mock(fixtures, 7, 3);
    auto result = histax::csc(tax, RootMode::PerDomain, *rig.gateway);
    REQUIRE(result.value.has_value());
    CHECK(*result.value == 1.0); // Military scope reported null, excluded
    CHECK_FALSE(result.per_domain.at("Military").has_value());
    CHECK(result.per_domain.at("Politics").has_value());
}

TEST_CASE("coverage_rate trivial fixtures") {
    Taxonomy tax = chain_tree();
    auto rig = make_mock(nlohmann::json::object(), 7, 8);
    // every held-out type equals a node label -> cosine 1 -> covered
    auto full = histax::coverage_rate(tax, {"chain-a", "chain-b", "chain-a"}, 0.6, *rig.gateway);
    CHECK(full.percent == 100.0);
    CHECK(full.total == 2); // exact-string dedup first

    nlohmann::json fixtures = {
        {"embeddings",
         {{"dimension", 4},
          {"vectors",
           {{"chain-r", vec({1.0, 0.0, 0.0, 0.0})},
            {"chain-a", vec({0.0, 1.0, 0.0, 0.0})},
            {"chain-b", vec({0.0, 0.0, 1.0, 0.0})},
            {"elsewhere", vec({0.0, 0.0, 0.0, 1.0})}}}}},
    };
    auto rig2 = make_mock(fixtures, 7, 4);
    auto none = histax::coverage_rate(chain_tree(), {"elsewhere"}, 0.6, *rig2.gateway);
    CHECK(none.percent == 0.0);

    CHECK_THROWS_AS(histax::coverage_rate(tax, {}, 0.6, *rig.gateway), Error);
}

TEST_CASE("coverage_rate equals the exhaustive max-similarity oracle on 25 mixed types") {
    std::mt19937 rng(9);
    Taxonomy tax = random_tree(rng, 9, "Society");
    auto rig = make_mock(nlohmann::json::object(), 21, 16);
    std::vector<std::string> heldout;
    for (int i = 0; i < 12; ++i) heldout.push_back("node " + std::to_string(1 + (i % 8)));
    for (int i = 0; i < 13; ++i) heldout.push_back("unseen type " + std::to_string(i));

    const double h = 0.6;
    auto result = histax::coverage_rate(tax, heldout, h, *rig.gateway);

    // oracle: exhaustive scan per distinct type
    std::vector<std::string> distinct;
    for (const auto& t : heldout) {
        if (std::find(distinct.begin(), distinct.end(), t) == distinct.end()) {
            distinct.push_back(t);
        }
    }
    auto ids = tax.node_ids();
    long long covered = 0;
    for (const auto& t : distinct) {
        auto tv = rig.gateway->embed({t})[0].values;
        double best = -2.0;
        for (const auto& id : ids) {
            auto nv = rig.gateway->embed({histax::node_embed_text(tax.node(id))})[0].values;
            best = std::max(best, naive_cosine(tv, nv));
        }
        if (best > h) ++covered;
    }
    CHECK(result.covered == covered);
    CHECK(result.total == static_cast<long long>(distinct.size()));
    CHECK(result.percent == 100.0 * covered / static_cast<double>(distinct.size()));
}

TEST_CASE("node_recall and novelty identities and fixtures") {
    auto rig = make_mock(nlohmann::json::object(), 7, 12);
    SUBCASE("self comparison") {
        Taxonomy tax = chain_tree();
        auto recall = histax::node_recall(tax, tax, 0.6, *rig.gateway);
        CHECK(recall.percent == 100.0);
        auto nov = histax::novelty(tax, tax, 0.6, *rig.gateway);
        CHECK(nov.value == 0.0);
    }
    SUBCASE("disjoint orthogonal sets") {
        nlohmann::json fixtures = {
            {"embeddings",
             {{"dimension", 4},
              {"vectors",
               {{"g-root", vec({1.0, 0.0, 0.0, 0.0})},
                {"g-leaf", vec({0.0, 1.0, 0.0, 0.0})},
                {"r-root", vec({0.0, 0.0, 1.0, 0.0})},
                {"r-leaf", vec({0.0, 0.0, 0.0, 1.0})}}}}},
        };
        auto rig2 = make_mock(fixtures, 7, 4);
        Taxonomy gen;
        gen.add_domain_root(make_node("g0", "g-root"), "");
        gen.add_node(make_node("g1", "g-leaf"), "g0");
        Taxonomy ref;
        ref.add_domain_root(make_node("r0", "r-root"), "");
        ref.add_node(make_node("r1", "r-leaf"), "r0");
        CHECK(histax::node_recall(gen, ref, 0.6, *rig2.gateway).percent == 0.0);
        CHECK(histax::novelty(gen, ref, 0.6, *rig2.gateway).value == 1.0);
    }
    SUBCASE("10 generated, 7 unmatched -> novelty 0.7, against the pairwise oracle") {
        // 3 generated nodes share axes with reference nodes, 7 get their own
        nlohmann::json vectors = nlohmann::json::object();
        for (int i = 0; i < 10; ++i) {
            nlohmann::json v = nlohmann::json::array();
            for (int d = 0; d < 16; ++d) v.push_back(d == i ? 1.0 : 0.0);
            vectors["gen " + std::to_string(i)] = v;
        }
        for (int j = 0; j < 4; ++j) {
            nlohmann::json v = nlohmann::json::array();
            // reference axes 0,1,2 overlap generated 0,1,2; axis 12+j otherwise
            int axis = j < 3 ? j : 12;
            for (int d = 0; d < 16; ++d) v.push_back(d == axis ? 1.0 : 0.0);
            vectors["ref " + std::to_string(j)] = v;
        }
        nlohmann::json fixtures = {{"embeddings", {{"dimension", 16}, {"vectors", vectors}}}};
        auto rig3 = make_mock(fixtures, 7, 16);
        Taxonomy gen;
        gen.add_domain_root(make_node("g0", "gen 0"), "");
        for (int i = 1; i < 10; ++i) {
            gen.add_node(make_node("g" + std::to_string(i), "gen " + std::to_string(i)), "g0");
        }
        Taxonomy ref;
        ref.add_domain_root(make_node("r0", "ref 0"), "");
        for (int j = 1; j < 4; ++j) {
            ref.add_node(make_node("r" + std::to_string(j), "ref " + std::to_string(j)), "r0");
        }
        auto nov = histax::novelty(gen, ref, 0.6, *rig3.gateway);
        CHECK(nov.value == doctest::Approx(0.7));
        CHECK(nov.novel == 7);

        // exhaustive pairwise oracle
        long long oracle_novel = 0;
        for (const auto& gid : gen.node_ids()) {
            auto gv = rig3.gateway->embed({histax::node_embed_text(gen.node(gid))})[0].values;
            bool matched = false;
            for (const auto& rid : ref.node_ids()) {
                auto rv =
                    rig3.gateway->embed({histax::node_embed_text(ref.node(rid))})[0].values;
                if (naive_cosine(gv, rv) > 0.6) matched = true;
            }
            if (!matched) ++oracle_novel;
        }
        CHECK(nov.novel == oracle_novel);

        // recall counts are the complement route
        auto recall = histax::node_recall(gen, ref, 0.6, *rig3.gateway);
        CHECK(recall.recalled == 3);
        CHECK(recall.percent + 100.0 * (4 - 3) / 4.0 == 100.0);
    }
}

TEST_CASE("significance identities and the sign fixture") {
    SUBCASE("self comparison is exactly zero") {
        auto rig = make_mock(nlohmann::json::object(), 7, 12);
        Taxonomy tax = chain_tree();
        auto sig =
            histax::significance(tax, tax, {"chain-a", "chain-b"}, 0.6, *rig.gateway);
        CHECK(sig.value == 0.0);
        CHECK(sig.matched_events == 2);
    }
    SUBCASE("|~C|=8, |~T|=10, |R|=20 yields exactly -0.1") {
        const int dim = 20;
        nlohmann::json vectors = nlohmann::json::object();
        auto axis_vec = [](int a, int b) {
            nlohmann::json v = nlohmann::json::array();
            for (int d = 0; d < dim; ++d) {
                v.push_back((d == a || d == b) ? 1.0 : 0.0);
            }
            return v;
        };
        for (int g = 0; g < 8; ++g) vectors["gen node " + std::to_string(g)] = axis_vec(g, g);
        for (int r = 0; r < 10; ++r) {
            vectors["ref node " + std::to_string(r)] = axis_vec(8 + r, 8 + r);
        }
        vectors["gen root"] = axis_vec(18, 18);
        vectors["ref root"] = axis_vec(19, 19);
        for (int e = 0; e < 20; ++e) {
            vectors["event " + std::to_string(e)] = axis_vec(e % 8, 8 + (e % 10));
        }
        nlohmann::json fixtures = {{"embeddings", {{"dimension", dim}, {"vectors", vectors}}}};
        auto rig = make_mock(fixtures, 7, dim);

        Taxonomy gen;
        gen.add_domain_root(make_node("g-root", "gen root"), "");
        for (int g = 0; g < 8; ++g) {
            gen.add_node(make_node("g" + std::to_string(g), "gen node " + std::to_string(g)),
                         "g-root");
        }
        Taxonomy ref;
        ref.add_domain_root(make_node("r-root", "ref root"), "");
        for (int r = 0; r < 10; ++r) {
            ref.add_node(make_node("r" + std::to_string(r), "ref node " + std::to_string(r)),
                         "r-root");
        }
        std::vector<std::string> events;
        for (int e = 0; e < 20; ++e) events.push_back("event " + std::to_string(e));

        auto sig = histax::significance(gen, ref, events, 0.6, *rig.gateway);
        CHECK(sig.matched_events == 20);
        CHECK(sig.distinct_generated == 8);
        CHECK(sig.distinct_reference == 10);
        CHECK(sig.value == -0.1);

        // reversing the roles flips the sign
        auto flipped = histax::significance(ref, gen, events, 0.6, *rig.gateway);
        CHECK(flipped.value == 0.1);
    }
    SUBCASE("no commonly covered event raises EmptyMatchedSet") {
        nlohmann::json fixtures = {
            {"embeddings",
             {{"dimension", 4},
              {"vectors",
               {{"chain-r", vec({1.0, 0.0, 0.0, 0.0})},
                {"chain-a", vec({0.0, 1.0, 0.0, 0.0})},
                {"chain-b", vec({0.0, 1.0, 0.0, 0.0})},
                {"far", vec({0.0, 0.0, 0.0, 1.0})}}}}},
        };
        auto rig = make_mock(fixtures, 7, 4);
        Taxonomy tax = chain_tree();
        try {
            histax::significance(tax, tax, {"far"}, 0.6, *rig.gateway);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::EmptyMatchedSet);
        }
    }
}

TEST_CASE("path_granularity scripted fixtures") {
    auto judge = make_role(histax::RoleName::GranularityJudge);
    SUBCASE("all pairs specific gives 100") {
        nlohmann::json fixtures = {
            {"chat",
             {{"granularity",
               {{{"default", true}, {"response", {{"more_specific", true}}}}}}}},
        };
        auto rig = make_mock(fixtures);
        std::mt19937 rng(31);
        Taxonomy tax = random_tree(rng, 11);
        auto result = histax::path_granularity(tax, judge, *rig.gateway);
        CHECK(result.percent == 100.0);
        CHECK(result.pairs == 10);
    }
    SUBCASE("3 of 4 specific gives 75") {
        Taxonomy tax;
        tax.add_domain_root(make_node("r", "root"), "");
        tax.add_node(make_node("a", "child a"), "r");
        tax.add_node(make_node("b", "child b"), "r");
        tax.add_node(make_node("c", "child c"), "r");
        tax.add_node(make_node("d", "child d"), "r");
        nlohmann::json fixtures = {
            {"chat",
             {{"granularity",
               {{{"match", {{"child_label", "child d"}}},
                 {"response", {{"more_specific", false}}}},
                {{"default", true}, {"response", {{"more_specific", true}}}}}}}},
        };
        auto rig = make_mock(fixtures);
        auto result = histax::path_granularity(tax, judge, *rig.gateway);
        CHECK(result.percent == 75.0);
    }
    SUBCASE("a pair failing twice counts as zero and is listed") {
        Taxonomy tax;
        tax.add_domain_root(make_node("r", "root"), "");
        tax.add_node(make_node("a", "child a"), "r");
        tax.add_node(make_node("b", "child b"), "r");
        nlohmann::json fixtures = {
            {"chat",
             {{"granularity",
               {{{"match", {{"child_label", "child b"}}}, {"response", "not json at all ["}},
                {{"default", true}, {"response", {{"more_specific", true}}}}}}}},
        };
        auto rig = make_mock(fixtures);
        auto result = histax::path_granularity(tax, judge, *rig.gateway);
        CHECK(result.percent == 50.0);
        REQUIRE(result.failed_pairs.size() == 1);
        CHECK(result.failed_pairs[0] == "root -> child b");
    }
    SUBCASE("judgments are cached by labels and definitions") {
        Taxonomy tax;
        tax.add_domain_root(make_node("r", "root"), "");
        tax.add_node(make_node("x1", "mid"), "r");
        tax.add_node(make_node("x2", "mid"), "r"); // same label, distinct node
        nlohmann::json fixtures = {
            {"chat",
             {{"granularity",
               {{{"default", true}, {"response", {{"more_specific", true}}}}}}}},
        };
        auto rig = make_mock(fixtures);
        size_t before = rig.transcript->records_written();
        auto result = histax::path_granularity(tax, judge, *rig.gateway);
        CHECK(result.pairs == 2);
        CHECK(rig.transcript->records_written() - before == 1); // one judged call
    }
}

TEST_CASE("metric report rendering") {
    histax::MetricReport report;
    report.mode = "per-domain";
    report.threshold = 0.6;
    report.structural = {6, 3.93, 2.43};
    histax::CscResult csc;
    csc.value = 0.2784;
    report.csc = csc;

    SUBCASE("stats row format") {
        CHECK(histax::format_stats_row("reference", report.structural) ==
              "| reference | 6 | 3.93 | 2.43 |");
        CHECK(histax::format_stats_row("flat", {3, 3.0, 3.0}) == "| flat | 3 | 3 | 3 |");
    }
    SUBCASE("reference-based fields are absent without a reference") {
        auto j = report.to_json();
        CHECK_FALSE(j.contains("node_recall"));
        CHECK_FALSE(j.contains("novelty"));
        CHECK_FALSE(j.contains("significance"));
        CHECK(j["csc"]["value"] == 0.2784);
    }
    SUBCASE("markdown carries dashes for missing columns") {
        std::string md = report.to_markdown("sample");
        CHECK(md.find("| sample | - | 0.2784 | - | - | - | - |") != std::string::npos);
        CHECK(md.find("| sample | 6 | 3.93 | 2.43 |") != std::string::npos);
    }
}
