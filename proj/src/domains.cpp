#include "histax/domains.hpp"

namespace histax {

const std::vector<DomainSpec>& default_domain_specs() {
    static const std::vector<DomainSpec> specs = {
        {"Politics",
         "Events related to state governance, power structures, policy formulation "
         "and implementation, as well as judicial and legal affairs."},
        {"Military",
         "Events related to warfare, military operations, strategic planning, and "
         "army organization and management."},
        {"Diplomacy",
         "Inter-state political and cultural interactions conducted through official "
         "channels, such as envoy missions, tribute relations, and peace negotiations."},
        {"Society",
         "Social activities, cultural practices, customs, and collective events "
         "involving groups, organizations, or institutions beyond the individual level."},
        {"Ritual",
         "Ceremonial and ritual activities conducted by ancient states or royal families."},
        {"Economy-Livelihood",
         "Events related to economic production, resource distribution, daily "
         "subsistence, and state finance."},
        {"Nature",
         "Natural phenomena, related events, and their impacts on human society."},
        {"Individual",
         "Events related to individual life trajectories, identity attributes, "
         "personal behaviors, and social relationships."},
    };
    return specs;
}

bool is_canonical_domain(const std::string& name) {
    return canonical_domain_index(name) >= 0;
}

int canonical_domain_index(const std::string& name) {
    const auto& specs = default_domain_specs();
    for (size_t i = 0; i < specs.size(); ++i) {
        if (specs[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

} // namespace histax
