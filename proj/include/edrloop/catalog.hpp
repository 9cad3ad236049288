#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "edrloop/graph.hpp"

namespace edrloop {

enum class PolicyMode { Detect, Block };

const char* policy_mode_name(PolicyMode m);
PolicyMode policy_mode_from_name(const std::string& name); // throws SchemaError

struct Policy {
    std::string id;
    std::string domain; // endpoint | identity | cloud
    PolicyMode mode = PolicyMode::Block;
    double effectiveness = 0.0; // in (0,1]
    std::vector<std::string> covered_techniques;

    bool covers(const std::string& technique) const {
        return std::find(covered_techniques.begin(), covered_techniques.end(), technique) !=
               covered_techniques.end();
    }
};

struct Technique {
    std::string id;
    double payoff = 0.0;
    std::vector<std::pair<Stage, Stage>> transitions; // allowed (src,dst) stages
};

// Catalog order is load order and doubles as the tie-break order everywhere a
// controller ranks policies.
struct Catalogs {
    std::vector<Policy> policies;
    std::vector<Technique> techniques;

    static Catalogs from_json_text(const std::string& text);
    std::string to_json_text(int indent = -1) const;

    const Policy* find_policy(const std::string& id) const;
    const Technique* find_technique(const std::string& id) const;

    // Policies covering a technique, in catalog order.
    std::vector<const Policy*> policies_covering(const std::string& technique) const;

    bool technique_allows(const Technique& t, Stage src, Stage dst) const;
};

} // namespace edrloop
