#include "edrloop/catalog.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace edrloop {

using nlohmann::json;

const char* policy_mode_name(PolicyMode m) {
    return m == PolicyMode::Block ? "block" : "detect";
}

PolicyMode policy_mode_from_name(const std::string& name) {
    if (name == "block") return PolicyMode::Block;
    if (name == "detect") return PolicyMode::Detect;
    throw SchemaError("mode", "unknown policy mode '" + name + "'");
}

Catalogs Catalogs::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("byte " + std::to_string(e.byte), e.what());
    }
    if (!j.is_object()) throw SchemaError("$", "top level must be an object");

    Catalogs c;
    std::size_t i = 0;
    for (const auto& jp : j.value("policies", json::array())) {
        std::string where = "policies[" + std::to_string(i++) + "]";
        Policy p;
        p.id = jp.value("id", "");
        if (p.id.empty()) throw SchemaError(where + ".id", "expected a non-empty string");
        p.domain = jp.value("domain", "");
        p.mode = policy_mode_from_name(jp.value("mode", "block"));
        p.effectiveness = jp.value("effectiveness", 0.0);
        if (!(p.effectiveness > 0.0 && p.effectiveness <= 1.0))
            throw SchemaError(where + ".effectiveness", "value outside (0,1]");
        for (const auto& t : jp.value("covered_techniques", json::array()))
            p.covered_techniques.push_back(t.get<std::string>());
        if (c.find_policy(p.id)) throw SchemaError(where, "duplicate policy id '" + p.id + "'");
        c.policies.push_back(std::move(p));
    }
    i = 0;
    for (const auto& jt : j.value("techniques", json::array())) {
        std::string where = "techniques[" + std::to_string(i++) + "]";
        Technique t;
        t.id = jt.value("id", "");
        if (t.id.empty()) throw SchemaError(where + ".id", "expected a non-empty string");
        t.payoff = jt.value("payoff", 0.0);
        if (!(t.payoff >= 0.0 && t.payoff <= 1.0))
            throw SchemaError(where + ".payoff", "value outside [0,1]");
        for (const auto& tr : jt.value("transitions", json::array())) {
            if (!tr.is_array() || tr.size() != 2)
                throw SchemaError(where + ".transitions", "expected [src_stage, dst_stage] pairs");
            t.transitions.emplace_back(stage_from_name(tr[0].get<std::string>()),
                                       stage_from_name(tr[1].get<std::string>()));
        }
        if (c.find_technique(t.id)) throw SchemaError(where, "duplicate technique id '" + t.id + "'");
        c.techniques.push_back(std::move(t));
    }
    return c;
}

std::string Catalogs::to_json_text(int indent) const {
    json jp = json::array();
    for (const auto& p : policies) {
        jp.push_back({{"id", p.id},
                      {"domain", p.domain},
                      {"mode", policy_mode_name(p.mode)},
                      {"effectiveness", p.effectiveness},
                      {"covered_techniques", p.covered_techniques}});
    }
    json jt = json::array();
    for (const auto& t : techniques) {
        json trs = json::array();
        for (const auto& [s, d] : t.transitions)
            trs.push_back({stage_name(s), stage_name(d)});
        jt.push_back({{"id", t.id}, {"payoff", t.payoff}, {"transitions", trs}});
    }
    json j{{"policies", jp}, {"techniques", jt}};
    return j.dump(indent);
}

const Policy* Catalogs::find_policy(const std::string& id) const {
    for (const auto& p : policies)
        if (p.id == id) return &p;
    return nullptr;
}

const Technique* Catalogs::find_technique(const std::string& id) const {
    for (const auto& t : techniques)
        if (t.id == id) return &t;
    return nullptr;
}

std::vector<const Policy*> Catalogs::policies_covering(const std::string& technique) const {
    std::vector<const Policy*> out;
    for (const auto& p : policies)
        if (std::find(p.covered_techniques.begin(), p.covered_techniques.end(), technique) !=
            p.covered_techniques.end())
            out.push_back(&p);
    return out;
}

bool Catalogs::technique_allows(const Technique& t, Stage src, Stage dst) const {
    for (const auto& [s, d] : t.transitions)
        if (s == src && d == dst) return true;
    return false;
}

} // namespace edrloop
