#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "cage/chain_graph.hpp"
#include "cage/error.hpp"

using namespace cage;

namespace {

const std::vector<std::string> kAdniFeatures = {"AGE", "EDU", "SEX", "APOE4",
                                                "ABETA", "FDG", "PTAU"};

ChainGraph adni_graph() {
    return ChainGraph({{{"AGE", "EDU", "SEX", "APOE4"}, ComponentMode::confounded},
                       {{"ABETA"}, ComponentMode::confounded},
                       {{"FDG", "PTAU"}, ComponentMode::confounded}},
                      kAdniFeatures);
}

}  // namespace

TEST_CASE("valid partition builds") {
    ChainGraph g = adni_graph();
    CHECK(g.component_count() == 3);
    CHECK(g.component(0).members.size() == 4);
    CHECK(g.component_of("ABETA") == 1);
    CHECK(g.component_of("PTAU") == 2);
}

TEST_CASE("partition violations name the offending feature") {
    CHECK_THROWS_WITH_AS(
        ChainGraph({{{"X1"}, ComponentMode::confounded},
                    {{"X1", "X2"}, ComponentMode::interacting}},
                   {"X1", "X2"}),
        doctest::Contains("X1"), Error);
    CHECK_THROWS_WITH_AS(ChainGraph({{{"X1"}, ComponentMode::confounded}}, {"X1", "X2"}),
                         doctest::Contains("X2"), Error);
    CHECK_THROWS_WITH_AS(ChainGraph({{{"X1", "Q"}, ComponentMode::confounded}}, {"X1"}),
                         doctest::Contains("Q"), Error);
    CHECK_THROWS_AS(ChainGraph({{{}, ComponentMode::confounded}}, {}), Error);
}

TEST_CASE("single all-feature component is a valid degenerate graph") {
    ChainGraph g({{{"A", "B", "C"}, ComponentMode::interacting}}, {"A", "B", "C"});
    CHECK(g.component_count() == 1);
    CHECK(g.parents_of(0).empty());
}

TEST_CASE("parents accumulate over earlier components") {
    ChainGraph g = adni_graph();
    CHECK(g.parents_of(0).empty());
    CHECK(g.parents_of(1) == std::vector<std::string>{"AGE", "EDU", "SEX", "APOE4"});
    CHECK(g.parents_of(2) == std::vector<std::string>{"AGE", "EDU", "SEX", "APOE4", "ABETA"});
    CHECK_THROWS_AS(g.parents_of(3), Error);
}

TEST_CASE("parent sets grow strictly along the ordering") {
    ChainGraph g = adni_graph();
    for (std::size_t t = 0; t + 1 < g.component_count(); ++t) {
        auto a = g.parents_of(t);
        auto b = g.parents_of(t + 1);
        CHECK(a.size() < b.size());
        CHECK(std::all_of(a.begin(), a.end(), [&](const std::string& f) {
            return std::find(b.begin(), b.end(), f) != b.end();
        }));
    }
    // every feature sits in exactly one component
    std::size_t total = 0;
    for (std::size_t t = 0; t < g.component_count(); ++t)
        total += g.component(t).members.size();
    CHECK(total == kAdniFeatures.size());
}

TEST_CASE("config files parse and round-trip") {
    std::string text =
        "# partial ordering\n"
        "[component]\n"
        "members = [AGE, EDU, SEX, APOE4]\n"
        "mode = confounded\n"
        "[component]\n"
        "members = [ABETA]\n"
        "mode = confounded\n"
        "[component]\n"
        "members = [FDG, PTAU]\n"
        "mode = interacting\n";
    std::stringstream in(text);
    auto components = ChainGraph::parse_components(in, "adni.chain");
    ChainGraph g(components, kAdniFeatures);
    CHECK(g.component(2).mode == ComponentMode::interacting);

    std::stringstream out;
    g.write_definition(out);
    std::stringstream in2(out.str());
    ChainGraph g2(ChainGraph::parse_components(in2), kAdniFeatures);
    CHECK(g2.component_count() == g.component_count());
    CHECK(g2.component(0).members == g.component(0).members);
}

TEST_CASE("config parse failures") {
    std::stringstream missing_mode("[component]\nmembers = [A]\n");
    CHECK_THROWS_WITH_AS(ChainGraph::parse_components(missing_mode, "x"),
                         doctest::Contains("mode"), Error);
    std::stringstream bad_mode("[component]\nmembers = [A]\nmode = maybe\n");
    CHECK_THROWS_AS(ChainGraph::parse_components(bad_mode, "x"), Error);
    std::stringstream no_block("members = [A]\n");
    CHECK_THROWS_AS(ChainGraph::parse_components(no_block, "x"), Error);
}
