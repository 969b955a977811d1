#pragma once

#include <string>
#include <vector>

namespace histax {

// One of the eight fixed top-level thematic areas. The descriptions are
// shipped as configuration data: they seed the classifier and domain-
// prediction prompts and define each domain root node.
struct DomainSpec {
    std::string name;
    std::string description;
};

// The canonical eight domains, in report order.
const std::vector<DomainSpec>& default_domain_specs();

bool is_canonical_domain(const std::string& name);

// Position of a domain in the canonical order, or -1 if not canonical.
int canonical_domain_index(const std::string& name);

} // namespace histax
