#include "histax/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "histax/ingest.hpp"

namespace histax {

namespace {

// Counts strict inversions (a[i] > a[j] for i < j) by merge sort.
long long count_inversions(std::vector<double>& a) {
    size_t n = a.size();
    if (n < 2) return 0;
    std::vector<double> buf(n);
    long long inversions = 0;
    for (size_t width = 1; width < n; width *= 2) {
        for (size_t lo = 0; lo + width < n; lo += 2 * width) {
            size_t mid = lo + width;
            size_t hi = std::min(lo + 2 * width, n);
            size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (a[i] <= a[j]) {
                    buf[k++] = a[i++];
                } else {
                    inversions += static_cast<long long>(mid - i);
                    buf[k++] = a[j++];
                }
            }
            while (i < mid) buf[k++] = a[i++];
            while (j < hi) buf[k++] = a[j++];
            std::copy(buf.begin() + static_cast<long>(lo), buf.begin() + static_cast<long>(hi),
                      a.begin() + static_cast<long>(lo));
        }
    }
    return inversions;
}

long long tie_pair_count(const std::vector<double>& sorted) {
    long long ties = 0;
    size_t i = 0;
    while (i < sorted.size()) {
        size_t j = i + 1;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        long long run = static_cast<long long>(j - i);
        ties += run * (run - 1) / 2;
        i = j;
    }
    return ties;
}

} // namespace

std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw Error(ErrorCode::DimensionMismatch, "tau inputs of unequal length");
    }
    size_t n = x.size();
    if (n < 2) return std::nullopt;

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    long long n0 = static_cast<long long>(n) * (static_cast<long long>(n) - 1) / 2;
    long long ties_x = 0, ties_xy = 0;
    {
        size_t i = 0;
        while (i < n) {
            size_t j = i + 1;
            while (j < n && x[order[j]] == x[order[i]]) ++j;
            long long run = static_cast<long long>(j - i);
            ties_x += run * (run - 1) / 2;
            size_t k = i;
            while (k < j) {
                size_t m = k + 1;
                while (m < j && y[order[m]] == y[order[k]]) ++m;
                long long jr = static_cast<long long>(m - k);
                ties_xy += jr * (jr - 1) / 2;
                k = m;
            }
            i = j;
        }
    }

    std::vector<double> y_in_x_order(n);
    for (size_t i = 0; i < n; ++i) y_in_x_order[i] = y[order[i]];
    long long discordant = count_inversions(y_in_x_order); // leaves the vector sorted

    long long ties_y = tie_pair_count(y_in_x_order);

    long long concordant = n0 - ties_x - ties_y + ties_xy - discordant;
    long long num = concordant - discordant;
    long long den_x = n0 - ties_x;
    long long den_y = n0 - ties_y;
    if (den_x == 0 || den_y == 0) return std::nullopt;
    // equal denominators divide exactly, so perfect (dis)concordance is +-1.0
    if (den_x == den_y) return static_cast<double>(num) / static_cast<double>(den_x);
    return static_cast<double>(num) /
           (std::sqrt(static_cast<double>(den_x)) * std::sqrt(static_cast<double>(den_y)));
}

// ---------------------------------------------------------------------------

namespace {

struct EmbeddedNodes {
    std::vector<std::string> ids;
    std::vector<EmbeddingVector> vectors;
};

EmbeddedNodes embed_taxonomy(const Taxonomy& tax, ProviderGateway& gateway) {
    EmbeddedNodes out;
    out.ids = tax.node_ids();
    std::vector<std::string> texts;
    texts.reserve(out.ids.size());
    for (const auto& id : out.ids) texts.push_back(node_embed_text(tax.node(id)));
    if (!texts.empty()) out.vectors = gateway.embed(texts);
    return out;
}

int parse_granularity_score(const std::string& text) {
    nlohmann::json doc = parse_json_reply(text);
    nlohmann::json value;
    if (doc.is_object()) {
        if (doc.contains("more_specific")) {
            value = doc["more_specific"];
        } else if (doc.contains("score")) {
            value = doc["score"];
        } else {
            throw Error(ErrorCode::MalformedResponse, "no more_specific/score key");
        }
    } else {
        value = doc;
    }
    if (value.is_boolean()) return value.get<bool>() ? 1 : 0;
    if (value.is_number_integer()) {
        int v = value.get<int>();
        if (v == 0 || v == 1) return v;
    }
    throw Error(ErrorCode::MalformedResponse, "granularity score must be 0/1 or boolean");
}

} // namespace

GranularityResult path_granularity(const Taxonomy& taxonomy, const AgentRole& judge,
                                   ProviderGateway& gateway) {
    GranularityResult result;
    std::map<std::string, int> cache;
    std::map<std::string, std::pair<long long, long long>> domain_counts; // specific, pairs
    for (const auto& id : taxonomy.node_ids()) {
        const TaxonomyNode& child = taxonomy.node(id);
        if (!child.parent) continue; // domain roots contribute no judged pair
        const TaxonomyNode& parent = taxonomy.node(*child.parent);
        std::string key = parent.label + "\x1f" + parent.definition + "\x1f" + child.label +
                          "\x1f" + child.definition;
        int score;
        auto hit = cache.find(key);
        if (hit != cache.end()) {
            score = hit->second;
        } else {
            ProviderRequest req;
            req.role = judge;
            req.template_id = "granularity";
            req.kind = RequestKind::Chat;
            req.variables = {
                {"parent_label", parent.label},
                {"parent_definition", parent.definition},
                {"child_label", child.label},
                {"child_definition", child.definition},
            };
            try {
                score = gateway.chat_parsed<int>(req, parse_granularity_score);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::MalformedResponse) throw;
                score = 0;
                result.failed_pairs.push_back(parent.label + " -> " + child.label);
            }
            cache[key] = score;
        }
        ++result.pairs;
        result.specific += score;
        auto& dc = domain_counts[child.domain];
        dc.second += 1;
        dc.first += score;
    }
    if (result.pairs == 0) {
        throw Error(ErrorCode::EmptyTaxonomy, "no parent-child pairs to judge");
    }
    result.percent =
        100.0 * static_cast<double>(result.specific) / static_cast<double>(result.pairs);
    for (const auto& [domain, counts] : domain_counts) {
        result.per_domain[domain] =
            100.0 * static_cast<double>(counts.first) / static_cast<double>(counts.second);
    }
    return result;
}

CscResult csc(const Taxonomy& taxonomy, RootMode mode, ProviderGateway& gateway) {
    if (taxonomy.empty()) {
        throw Error(ErrorCode::EmptyTaxonomy, "csc of an empty taxonomy");
    }
    EmbeddedNodes embedded = embed_taxonomy(taxonomy, gateway);
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < embedded.ids.size(); ++i) index[embedded.ids[i]] = i;

    auto tau_over = [&](const std::vector<std::string>& ids,
                        RootMode w_mode) -> std::pair<std::optional<double>, long long> {
        if (ids.size() < 2) return {std::nullopt, 0};
        std::vector<double> w, s;
        size_t pair_count = ids.size() * (ids.size() - 1) / 2;
        w.reserve(pair_count);
        s.reserve(pair_count);
        for (size_t i = 0; i < ids.size(); ++i) {
            for (size_t j = i + 1; j < ids.size(); ++j) {
                w.push_back(taxonomy.structure_weight(ids[i], ids[j], w_mode));
                s.push_back(cosine_similarity(embedded.vectors[index[ids[i]]],
                                              embedded.vectors[index[ids[j]]]));
            }
        }
        return {kendall_tau_b(w, s), static_cast<long long>(w.size())};
    };

    CscResult result;
    if (mode == RootMode::Global) {
        if (taxonomy.node_count() < 2) {
            throw Error(ErrorCode::DegenerateInput, "csc needs at least two nodes in scope");
        }
        auto [tau, pairs] = tau_over(taxonomy.node_ids(), RootMode::Global);
        result.value = tau; // nullopt marks a degenerate scope
        result.pair_count = pairs;
        return result;
    }
    double sum = 0.0;
    int defined = 0;
    for (const auto& domain : taxonomy.domain_order()) {
        auto ids = taxonomy.node_ids_in_domain(domain);
        auto [tau, pairs] = tau_over(ids, RootMode::PerDomain);
        result.per_domain[domain] = tau;
        result.pair_count += pairs;
        if (tau) {
            sum += *tau;
            ++defined;
        }
    }
    if (defined > 0) result.value = sum / defined;
    return result;
}

CoverageResult coverage_rate(const Taxonomy& taxonomy,
                             const std::vector<std::string>& heldout_event_types, double h,
                             ProviderGateway& gateway) {
    std::vector<std::string> distinct;
    for (const auto& t : heldout_event_types) {
        std::string n = normalize_ws(t);
        if (n.empty()) continue;
        if (std::find(distinct.begin(), distinct.end(), n) == distinct.end()) {
            distinct.push_back(n);
        }
    }
    if (distinct.empty()) {
        throw Error(ErrorCode::EmptyEventSet, "no held-out event types");
    }
    if (taxonomy.empty()) {
        throw Error(ErrorCode::EmptyTaxonomy, "coverage against an empty taxonomy");
    }
    EmbeddedNodes nodes = embed_taxonomy(taxonomy, gateway);
    auto type_vecs = gateway.embed(distinct);

    CoverageResult result;
    result.total = static_cast<long long>(distinct.size());
    std::map<std::string, std::pair<long long, long long>> domain_counts; // covered, total
    for (size_t t = 0; t < distinct.size(); ++t) {
        double best = -2.0;
        size_t best_idx = 0;
        for (size_t i = 0; i < nodes.ids.size(); ++i) {
            double sim = cosine_similarity(type_vecs[t], nodes.vectors[i]);
            if (sim > best) {
                best = sim;
                best_idx = i;
            }
        }
        bool covered = best > h;
        if (covered) ++result.covered;
        const std::string& domain = taxonomy.node(nodes.ids[best_idx]).domain;
        auto& dc = domain_counts[domain];
        dc.second += 1;
        if (covered) dc.first += 1;
    }
    result.percent =
        100.0 * static_cast<double>(result.covered) / static_cast<double>(result.total);
    for (const auto& [domain, counts] : domain_counts) {
        result.per_domain[domain] =
            100.0 * static_cast<double>(counts.first) / static_cast<double>(counts.second);
    }
    return result;
}

RecallResult node_recall(const Taxonomy& generated, const Taxonomy& reference, double h,
                         ProviderGateway& gateway) {
    if (generated.empty() || reference.empty()) {
        throw Error(ErrorCode::EmptyTaxonomy, "node recall needs two non-empty taxonomies");
    }
    EmbeddedNodes gen = embed_taxonomy(generated, gateway);
    EmbeddedNodes ref = embed_taxonomy(reference, gateway);

    RecallResult result;
    result.total = static_cast<long long>(ref.ids.size());
    std::map<std::string, long long> recalled_by_domain;
    for (size_t r = 0; r < ref.ids.size(); ++r) {
        double best = -2.0;
        size_t best_idx = 0;
        for (size_t g = 0; g < gen.ids.size(); ++g) {
            double sim = cosine_similarity(ref.vectors[r], gen.vectors[g]);
            if (sim > best) {
                best = sim;
                best_idx = g;
            }
        }
        if (best > h) {
            ++result.recalled;
            recalled_by_domain[generated.node(gen.ids[best_idx]).domain]++;
        }
    }
    result.percent =
        100.0 * static_cast<double>(result.recalled) / static_cast<double>(result.total);
    for (const auto& [domain, count] : recalled_by_domain) {
        result.per_domain[domain] =
            100.0 * static_cast<double>(count) / static_cast<double>(result.total);
    }
    return result;
}

NoveltyResult novelty(const Taxonomy& generated, const Taxonomy& reference, double h,
                      ProviderGateway& gateway) {
    if (generated.empty() || reference.empty()) {
        throw Error(ErrorCode::EmptyTaxonomy, "novelty needs two non-empty taxonomies");
    }
    EmbeddedNodes gen = embed_taxonomy(generated, gateway);
    EmbeddedNodes ref = embed_taxonomy(reference, gateway);

    NoveltyResult result;
    result.total = static_cast<long long>(gen.ids.size());
    std::map<std::string, std::pair<long long, long long>> domain_counts; // novel, total
    for (size_t g = 0; g < gen.ids.size(); ++g) {
        bool matched = false;
        for (size_t r = 0; r < ref.ids.size() && !matched; ++r) {
            if (cosine_similarity(gen.vectors[g], ref.vectors[r]) > h) matched = true;
        }
        const std::string& domain = generated.node(gen.ids[g]).domain;
        auto& dc = domain_counts[domain];
        dc.second += 1;
        if (!matched) {
            ++result.novel;
            dc.first += 1;
        }
    }
    result.value = static_cast<double>(result.novel) / static_cast<double>(result.total);
    for (const auto& [domain, counts] : domain_counts) {
        result.per_domain[domain] =
            static_cast<double>(counts.first) / static_cast<double>(counts.second);
    }
    return result;
}

SignificanceResult significance(const Taxonomy& generated, const Taxonomy& reference,
                                const std::vector<std::string>& heldout_event_types, double h,
                                ProviderGateway& gateway) {
    std::vector<std::string> distinct;
    for (const auto& t : heldout_event_types) {
        std::string n = normalize_ws(t);
        if (n.empty()) continue;
        if (std::find(distinct.begin(), distinct.end(), n) == distinct.end()) {
            distinct.push_back(n);
        }
    }
    if (distinct.empty()) {
        throw Error(ErrorCode::EmptyEventSet, "no held-out event types");
    }
    EmbeddedNodes gen = embed_taxonomy(generated, gateway);
    EmbeddedNodes ref = embed_taxonomy(reference, gateway);
    auto type_vecs = gateway.embed(distinct);

    auto assign = [](const EmbeddedNodes& nodes,
                     const EmbeddingVector& v) -> std::pair<double, size_t> {
        double best = -2.0;
        size_t best_idx = 0;
        for (size_t i = 0; i < nodes.ids.size(); ++i) {
            double sim = cosine_similarity(v, nodes.vectors[i]);
            if (sim > best) {
                best = sim;
                best_idx = i;
            }
        }
        return {best, best_idx};
    };

    std::vector<std::string> gen_nodes_used, ref_nodes_used;
    SignificanceResult result;
    for (size_t t = 0; t < distinct.size(); ++t) {
        auto [gbest, gidx] = assign(gen, type_vecs[t]);
        auto [rbest, ridx] = assign(ref, type_vecs[t]);
        if (gbest > h && rbest > h) {
            ++result.matched_events;
            if (std::find(gen_nodes_used.begin(), gen_nodes_used.end(), gen.ids[gidx]) ==
                gen_nodes_used.end()) {
                gen_nodes_used.push_back(gen.ids[gidx]);
            }
            if (std::find(ref_nodes_used.begin(), ref_nodes_used.end(), ref.ids[ridx]) ==
                ref_nodes_used.end()) {
                ref_nodes_used.push_back(ref.ids[ridx]);
            }
        }
    }
    if (result.matched_events == 0) {
        throw Error(ErrorCode::EmptyMatchedSet, "no event type is covered by both taxonomies");
    }
    result.distinct_generated = static_cast<long long>(gen_nodes_used.size());
    result.distinct_reference = static_cast<long long>(ref_nodes_used.size());
    result.value = static_cast<double>(result.distinct_generated - result.distinct_reference) /
                   static_cast<double>(result.matched_events);
    return result;
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string fmt_stat(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e9) {
        return std::to_string(static_cast<long long>(v));
    }
    return fmt(v, 2);
}

} // namespace

std::string format_stats_row(const std::string& name, const StructuralStats& stats) {
    return "| " + name + " | " + std::to_string(stats.max_depth) + " | " +
           fmt_stat(stats.avg_depth) + " | " + fmt_stat(stats.branch_factor) + " |";
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json j;
    j["mode"] = mode;
    j["threshold"] = threshold;
    if (path_granularity) {
        nlohmann::json jg = {
            {"percent", path_granularity->percent},
            {"pairs", path_granularity->pairs},
            {"per_domain", path_granularity->per_domain},
        };
        if (!path_granularity->failed_pairs.empty()) {
            jg["failed_pairs"] = path_granularity->failed_pairs;
        }
        j["path_granularity"] = std::move(jg);
    }
    nlohmann::json jc;
    jc["value"] = csc.value ? nlohmann::json(*csc.value) : nlohmann::json(nullptr);
    jc["pair_count"] = csc.pair_count;
    nlohmann::json jd = nlohmann::json::object();
    for (const auto& [domain, tau] : csc.per_domain) {
        jd[domain] = tau ? nlohmann::json(*tau) : nlohmann::json(nullptr);
    }
    jc["per_domain"] = std::move(jd);
    j["csc"] = std::move(jc);
    if (coverage) {
        j["coverage_rate"] = {
            {"percent", coverage->percent},
            {"covered", coverage->covered},
            {"total", coverage->total},
            {"per_domain", coverage->per_domain},
        };
    }
    if (node_recall) {
        j["node_recall"] = {
            {"percent", node_recall->percent},
            {"recalled", node_recall->recalled},
            {"total", node_recall->total},
            {"per_domain", node_recall->per_domain},
        };
    }
    if (novelty) {
        j["novelty"] = {
            {"value", novelty->value},
            {"novel", novelty->novel},
            {"total", novelty->total},
            {"per_domain", novelty->per_domain},
        };
    }
    if (significance) {
        j["significance"] = {
            {"value", significance->value},
            {"distinct_generated", significance->distinct_generated},
            {"distinct_reference", significance->distinct_reference},
            {"matched_events", significance->matched_events},
        };
    }
    j["structural"] = {
        {"max_depth", structural.max_depth},
        {"avg_depth", structural.avg_depth},
        {"branch_factor", structural.branch_factor},
    };
    j["runtime_ms"] = runtime_ms;
    return j;
}

std::string MetricReport::to_markdown(const std::string& name) const {
    std::ostringstream md;
    md << "# Taxonomy evaluation\n\n";
    md << "Mode: " << mode << "; threshold: " << fmt(threshold, 2) << "\n\n";
    md << "| Name | Path Gran. | CSC | Cover. Rate | Node Recall | Novelty | Significance |\n";
    md << "|---|---|---|---|---|---|---|\n";
    md << "| " << name << " | ";
    md << (path_granularity ? fmt(path_granularity->percent, 2) : std::string("-")) << " | ";
    md << (csc.value ? fmt(*csc.value, 4) : std::string("-")) << " | ";
    md << (coverage ? fmt(coverage->percent, 2) : std::string("-")) << " | ";
    md << (node_recall ? fmt(node_recall->percent, 2) : std::string("-")) << " | ";
    md << (novelty ? fmt(novelty->value, 4) : std::string("-")) << " | ";
    md << (significance ? fmt(significance->value, 4) : std::string("-")) << " |\n\n";
    md << "| Name | Max. Dep. | Avg. Dep. | Branch |\n";
    md << "|---|---|---|---|\n";
    md << format_stats_row(name, structural) << "\n";

    std::vector<std::string> domains;
    auto remember = [&domains](const std::string& d) {
        if (std::find(domains.begin(), domains.end(), d) == domains.end()) domains.push_back(d);
    };
    for (const auto& [d, _] : csc.per_domain) remember(d);
    if (path_granularity) {
        for (const auto& [d, _] : path_granularity->per_domain) remember(d);
    }
    if (coverage) {
        for (const auto& [d, _] : coverage->per_domain) remember(d);
    }
    if (node_recall) {
        for (const auto& [d, _] : node_recall->per_domain) remember(d);
    }
    if (novelty) {
        for (const auto& [d, _] : novelty->per_domain) remember(d);
    }
    if (!domains.empty()) {
        std::sort(domains.begin(), domains.end());
        md << "\n## Per-domain\n\n";
        md << "| Domain | Path Gran. | CSC | Cover. Rate | Node Recall | Novelty |\n";
        md << "|---|---|---|---|---|---|\n";
        for (const auto& d : domains) {
            std::string gran = "-", csc_cell = "-", cov = "-", rec = "-", nov = "-";
            if (path_granularity && path_granularity->per_domain.count(d)) {
                gran = fmt(path_granularity->per_domain.at(d), 2);
            }
            auto it = csc.per_domain.find(d);
            if (it != csc.per_domain.end() && it->second) csc_cell = fmt(*it->second, 4);
            if (coverage && coverage->per_domain.count(d)) {
                cov = fmt(coverage->per_domain.at(d), 2);
            }
            if (node_recall && node_recall->per_domain.count(d)) {
                rec = fmt(node_recall->per_domain.at(d), 2);
            }
            if (novelty && novelty->per_domain.count(d)) {
                nov = fmt(novelty->per_domain.at(d), 4);
            }
            md << "| " << d << " | " << gran << " | " << csc_cell << " | " << cov << " | " << rec
               << " | " << nov << " |\n";
        }
    }
    return md.str();
}

MetricReport evaluate(const EvaluateInputs& inputs, ProviderGateway& gateway) {
    if (!inputs.taxonomy) {
        throw Error(ErrorCode::ConfigInvalid, "evaluate needs a taxonomy");
    }
    if (!inputs.granularity_judge) {
        throw Error(ErrorCode::ConfigInvalid, "evaluate needs a granularity judge role");
    }
    auto start = std::chrono::steady_clock::now();
    MetricReport report;
    report.mode = inputs.mode == RootMode::Global ? "global" : "per-domain";
    report.threshold = inputs.threshold;
    report.path_granularity =
        path_granularity(*inputs.taxonomy, *inputs.granularity_judge, gateway);
    report.csc = csc(*inputs.taxonomy, inputs.mode, gateway);
    if (inputs.heldout && !inputs.heldout->empty()) {
        report.coverage =
            coverage_rate(*inputs.taxonomy, *inputs.heldout, inputs.threshold, gateway);
    }
    if (inputs.reference) {
        report.node_recall =
            node_recall(*inputs.taxonomy, *inputs.reference, inputs.threshold, gateway);
        report.novelty = novelty(*inputs.taxonomy, *inputs.reference, inputs.threshold, gateway);
        if (inputs.heldout && !inputs.heldout->empty()) {
            report.significance = significance(*inputs.taxonomy, *inputs.reference,
                                               *inputs.heldout, inputs.threshold, gateway);
        }
    }
    report.structural = inputs.taxonomy->structural_stats(inputs.mode);
    report.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    return report;
}

} // namespace histax
