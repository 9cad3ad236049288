#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "edrloop/catalog.hpp"
#include "edrloop/harness.hpp"

using namespace edrloop;

TEST_CASE("policy mode names round-trip") {
    CHECK(std::string(policy_mode_name(PolicyMode::Block)) == "block");
    CHECK(std::string(policy_mode_name(PolicyMode::Detect)) == "detect");
    CHECK(policy_mode_from_name("block") == PolicyMode::Block);
    CHECK(policy_mode_from_name("detect") == PolicyMode::Detect);
    CHECK_THROWS_AS(policy_mode_from_name("promote"), SchemaError);
}

TEST_CASE("built-in catalog shape") {
    Catalogs cat = default_catalogs();
    CHECK(cat.policies.size() == 30);
    CHECK(cat.techniques.size() == 66);

    std::set<std::string> pids, tids;
    int block_native = 0;
    for (const auto& p : cat.policies) {
        CHECK(pids.insert(p.id).second);
        CHECK(p.effectiveness > 0.0);
        CHECK(p.effectiveness <= 1.0);
        CHECK((p.domain == "endpoint" || p.domain == "identity" || p.domain == "cloud"));
        CHECK(!p.covered_techniques.empty());
        if (p.mode == PolicyMode::Block) ++block_native;
    }
    CHECK(block_native == 20);
    for (const auto& t : cat.techniques) {
        CHECK(tids.insert(t.id).second);
        CHECK(t.payoff == 0.9); // uniform by construction
        CHECK(!t.transitions.empty());
    }
    // Every covered technique exists in the technique table.
    for (const auto& p : cat.policies)
        for (const auto& tid : p.covered_techniques) CHECK(tids.count(tid) == 1);
}

TEST_CASE("exactly eight techniques have no blocking policy") {
    Catalogs cat = default_catalogs();
    std::set<std::string> uncovered;
    for (const auto& t : cat.techniques) {
        bool blockable = false;
        for (const auto& p : cat.policies)
            if (p.mode == PolicyMode::Block && p.covers(t.id)) blockable = true;
        if (!blockable) uncovered.insert(t.id);
    }
    std::set<std::string> expected = {"T1027", "T1036.005", "T1049", "T1074.002",
                                      "T1119", "T1482",     "T1534", "T1615"};
    CHECK(uncovered == expected);
}

TEST_CASE("lookup helpers") {
    Catalogs cat = default_catalogs();
    REQUIRE(cat.find_policy("ep-macro-block") != nullptr);
    CHECK(cat.find_policy("ep-macro-block")->effectiveness == 0.45);
    CHECK(cat.find_policy("missing") == nullptr);
    REQUIRE(cat.find_technique("T1190") != nullptr);
    CHECK(cat.find_technique("Txxxx") == nullptr);

    auto covering = cat.policies_covering("T1078");
    REQUIRE(covering.size() == 3);
    // Catalog order: the two identity blockers, then the sign-in alert.
    CHECK(covering[0]->id == "id-legacy-auth-block");
    CHECK(covering[1]->id == "id-mfa-enforce");
    CHECK(covering[2]->id == "id-signin-anomaly-alert");
}

TEST_CASE("technique stage transitions") {
    Catalogs cat = default_catalogs();
    const Technique* t1078 = cat.find_technique("T1078");
    REQUIRE(t1078 != nullptr);
    CHECK(cat.technique_allows(*t1078, Stage::Entry, Stage::Foothold));
    CHECK(cat.technique_allows(*t1078, Stage::Foothold, Stage::Lateral));
    CHECK(!cat.technique_allows(*t1078, Stage::Lateral, Stage::Lateral));
    CHECK(!cat.technique_allows(*t1078, Stage::Entry, Stage::Objective));

    const Technique* t1041 = cat.find_technique("T1041");
    REQUIRE(t1041 != nullptr);
    CHECK(cat.technique_allows(*t1041, Stage::Lateral, Stage::Objective));
    CHECK(cat.technique_allows(*t1041, Stage::Foothold, Stage::Objective));
    CHECK(!cat.technique_allows(*t1041, Stage::Entry, Stage::Foothold));
}

TEST_CASE("json round-trip preserves the catalog byte for byte") {
    Catalogs cat = default_catalogs();
    std::string once = cat.to_json_text(2);
    Catalogs again = Catalogs::from_json_text(once);
    CHECK(again.to_json_text(2) == once);
    CHECK(again.policies.size() == cat.policies.size());
    CHECK(again.techniques.size() == cat.techniques.size());
}

TEST_CASE("catalog schema rejections") {
    CHECK_THROWS_AS(Catalogs::from_json_text("[]"), SchemaError);
    CHECK_THROWS_AS(Catalogs::from_json_text(R"({"policies":[{"id":"p","domain":"endpoint",
        "mode":"block","effectiveness":0.0,"covered_techniques":["T1"]}],"techniques":[]})"),
                    SchemaError);
    CHECK_THROWS_AS(Catalogs::from_json_text(R"({"policies":[{"id":"p","domain":"endpoint",
        "mode":"warn","effectiveness":0.4,"covered_techniques":["T1"]}],"techniques":[]})"),
                    SchemaError);
    CHECK_THROWS_AS(Catalogs::from_json_text(R"({"policies":[],"techniques":[
        {"id":"T1","payoff":0.9,"transitions":[["ENTRY"]]}]})"),
                    SchemaError);
    CHECK_THROWS_AS(Catalogs::from_json_text(R"({"policies":[],"techniques":[
        {"id":"T1","payoff":1.5,"transitions":[["ENTRY","FOOTHOLD"]]}]})"),
                    SchemaError);
    CHECK_THROWS_AS(Catalogs::from_json_text(R"({"policies":[
        {"id":"p","domain":"endpoint","mode":"block","effectiveness":0.4,"covered_techniques":["T1"]},
        {"id":"p","domain":"cloud","mode":"detect","effectiveness":0.2,"covered_techniques":["T1"]}],
        "techniques":[]})"),
                    SchemaError);
}
