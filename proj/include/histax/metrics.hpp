#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "histax/gateway.hpp"
#include "histax/taxonomy.hpp"

namespace histax {

// Kendall tau-b over paired value sequences, O(n log n). Returns nullopt
// when either sequence is fully tied (the coefficient is undefined).
std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y);

struct GranularityResult {
    double percent = 0.0;
    long long pairs = 0;
    long long specific = 0;
    std::map<std::string, double> per_domain;
    std::vector<std::string> failed_pairs; // judged 0 after the re-prompt failed
};

// Fraction of parent-child pairs the judge scores as "child more specific",
// as a percent. Judgments are cached by the pair's labels + definitions.
GranularityResult path_granularity(const Taxonomy& taxonomy, const AgentRole& judge,
                                   ProviderGateway& gateway);

struct CscResult {
    std::optional<double> value; // mean of domain taus (per-domain) or global tau
    std::map<std::string, std::optional<double>> per_domain;
    long long pair_count = 0;
};

// Kendall tau-b between structure weights and embedding cosines over all
// unordered node pairs in scope. Degenerate scopes (all weights equal, or
// fewer than two nodes) report nullopt and drop out of the mean.
CscResult csc(const Taxonomy& taxonomy, RootMode mode, ProviderGateway& gateway);

struct CoverageResult {
    double percent = 0.0;
    long long covered = 0;
    long long total = 0;
    std::map<std::string, double> per_domain; // keyed by best-match node domain
};

// Share of distinct held-out event types whose best node cosine strictly
// exceeds h.
CoverageResult coverage_rate(const Taxonomy& taxonomy,
                             const std::vector<std::string>& heldout_event_types, double h,
                             ProviderGateway& gateway);

struct RecallResult {
    double percent = 0.0;
    long long recalled = 0;
    long long total = 0;
    std::map<std::string, double> per_domain; // by the matching generated node's domain
};

// Share of reference nodes matched (cosine > h) by some generated node.
RecallResult node_recall(const Taxonomy& generated, const Taxonomy& reference, double h,
                         ProviderGateway& gateway);

struct NoveltyResult {
    double value = 0.0; // in [0,1]
    long long novel = 0;
    long long total = 0;
    std::map<std::string, double> per_domain; // by the generated node's own domain
};

// Fraction of generated nodes with no reference node above h.
NoveltyResult novelty(const Taxonomy& generated, const Taxonomy& reference, double h,
                      ProviderGateway& gateway);

struct SignificanceResult {
    double value = 0.0;
    long long distinct_generated = 0;
    long long distinct_reference = 0;
    long long matched_events = 0;
};

// Classification delta over event types coverable by both taxonomies: each
// event goes to its argmax-similarity node per taxonomy, and the result is
// (distinct generated nodes - distinct reference nodes) / |matched events|.
// Positive means the generated taxonomy classifies more finely.
SignificanceResult significance(const Taxonomy& generated, const Taxonomy& reference,
                                const std::vector<std::string>& heldout_event_types, double h,
                                ProviderGateway& gateway);

struct MetricReport {
    std::string mode = "per-domain";
    double threshold = 0.6;
    std::optional<GranularityResult> path_granularity;
    CscResult csc;
    std::optional<CoverageResult> coverage;
    std::optional<RecallResult> node_recall;
    std::optional<NoveltyResult> novelty;
    std::optional<SignificanceResult> significance;
    StructuralStats structural;
    long long runtime_ms = 0;

    nlohmann::json to_json() const;
    // Two tables: the metric row and the structural row.
    std::string to_markdown(const std::string& name) const;
};

// One structural-stats table row, shared by MetricReport and the stats
// subcommand. Integers print bare, everything else with two decimals.
std::string format_stats_row(const std::string& name, const StructuralStats& stats);

struct EvaluateInputs {
    const Taxonomy* taxonomy = nullptr;             // required
    const Taxonomy* reference = nullptr;            // optional
    const std::vector<std::string>* heldout = nullptr; // optional event types
    RootMode mode = RootMode::PerDomain;
    double threshold = 0.6;
    const AgentRole* granularity_judge = nullptr;   // required
};

MetricReport evaluate(const EvaluateInputs& inputs, ProviderGateway& gateway);

} // namespace histax
