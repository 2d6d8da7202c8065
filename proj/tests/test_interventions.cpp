#include <doctest.h>

#include "poscm/error.hpp"
#include "poscm/interventions.hpp"
#include "poscm/models.hpp"

using namespace poscm;

TEST_CASE("constant edge probability gives half marginals") {
    auto model = discretePoscm({.n = 5, .seed = 3, .edgeLo = 0.5, .edgeHi = 0.5});
    auto mu = supervisingMeasure(*model.spec, {}, 0, 10000, 1);
    REQUIRE(mu.targets.size() == 4);
    for (double m : mu.marginals) CHECK(std::abs(m - 0.5) < 0.02);
    CHECK(mu.n == 10000);
}

TEST_CASE("context intervention shifts the supervising measure") {
    auto spec = realContextChain(4);
    auto mu = supervisingMeasure(*spec, Regime("b", {BetaNode{0, 1.0}}), 0, 10000, 2);
    for (double m : mu.marginals) CHECK(std::abs(m - 0.8) < 0.02);
}

TEST_CASE("value interventions leave the supervising measure unchanged exactly") {
    auto model = discretePoscm({.n = 5, .seed = 8});
    auto base = supervisingMeasure(*model.spec, {}, 1, 2000, 4);
    auto vreg = supervisingMeasure(*model.spec, Regime("v", {VNode{0, 1.0}, VNode{2, 0.0}}), 1, 2000, 4);
    CHECK(base.edgeCounts == vreg.edgeCounts);
    CHECK(base.law.counts() == vreg.law.counts());
    auto r = iiscDetect(base, vreg, 0.01);
    CHECK(!r.changed);
}

TEST_CASE("supervising measure is thread-count independent") {
    auto model = discretePoscm({.n = 4, .seed = 8});
    auto a = supervisingMeasure(*model.spec, {}, 0, 3000, 5, 1);
    auto b = supervisingMeasure(*model.spec, {}, 0, 3000, 5, 4);
    CHECK(a.law.counts() == b.law.counts());
}

TEST_CASE("IISC detection controls size") {
    auto model = discretePoscm({.n = 4, .seed = 6});
    int quiet = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        auto a = supervisingMeasure(*model.spec, {}, 0, 500, 1000 + t);
        auto b = supervisingMeasure(*model.spec, {}, 0, 500, 5000 + t);
        quiet += !iiscDetect(a, b, 0.01).changed;
    }
    CHECK(quiet >= 95);
}

TEST_CASE("IISC detection has power against a context shift") {
    auto spec = realContextChain(4);
    auto a = supervisingMeasure(*spec, Regime("lo", {BetaNode{0, 0.5}}), 0, 10000, 1);
    auto b = supervisingMeasure(*spec, Regime("hi", {BetaNode{0, 0.833}}), 0, 10000, 2);
    auto r = iiscDetect(a, b, 0.01);
    CHECK(r.changed);
    CHECK(r.jointTested);
    CHECK(r.statistic == doctest::Approx(0.2).epsilon(0.15));
}

TEST_CASE("IISC input validation") {
    auto model = discretePoscm({.n = 4, .seed = 6});
    auto small = supervisingMeasure(*model.spec, {}, 0, 20, 1);
    auto big = supervisingMeasure(*model.spec, {}, 0, 200, 1);
    CHECK_THROWS_AS(iiscDetect(small, big, 0.01), StatisticsError);
    auto other = supervisingMeasure(*model.spec, {}, 1, 200, 1);
    CHECK_THROWS_AS(iiscDetect(big, other, 0.01), InvalidArgument);
}

TEST_CASE("edge replacement on an absent edge is a no-op") {
    auto model = discretePoscm({.n = 4, .seed = 12});
    int absent = 0;
    for (int k = 0; k < 300; ++k) {
        auto d = ExogenousDraw::sample(*model.spec, 9, k);
        World base = generate(*model.spec, d);
        if (base.edge(0, 2)) continue;
        ++absent;
        World w = generate(*model.spec, d, Regime("e", {VEdge{0, 2, EdgeReplacement::clamp({1.0, 1.0})}}));
        CHECK(w.value == base.value);
        CHECK(w.context == base.context);
        CHECK(w.adjacency == base.adjacency);
    }
    CHECK(absent > 30);
}

TEST_CASE("edge replacement on a present edge changes only its target channel") {
    auto lhs = distributiveToy(ToySide::RHS);
    Regime inputs("do", {VNode{0, 2.0}, VNode{1, 1.0}, VNode{2, 1.0}});
    auto d = ExogenousDraw::sample(*lhs.spec, 1, 0);
    Regime r = inputs;
    r.add(VEdge{0, 3, EdgeReplacement::clamp({1.0, 3.0})});
    World a = generate(*lhs.spec, d, inputs), b = generate(*lhs.spec, d, r);
    CHECK(b.value[3] == 3.0);
    CHECK(b.value[4] == a.value[4]);
}

TEST_CASE("value edge replacements need a message form") {
    auto spec = realContextChain(3);
    PoscmSpec plain = *spec;
    plain.valueMessageForm.assign(3, false);
    plain.finalize();
    bool raised = false;
    for (int k = 0; k < 50 && !raised; ++k) {
        try {
            generate(plain, ExogenousDraw::sample(plain, 1, k), Regime("e", {VEdge{0, 1, EdgeReplacement::clamp({0.0})}}));
        } catch (const InvalidArgument&) {
            raised = true;
        }
    }
    CHECK(raised);
}

TEST_CASE("context intervention leaves earlier nodes untouched") {
    auto model = discretePoscm({.n = 5, .seed = 13});
    for (int k = 0; k < 100; ++k) {
        auto d = ExogenousDraw::sample(*model.spec, 2, k);
        World a = generate(*model.spec, d);
        World b = generate(*model.spec, d, Regime("b", {BetaNode{2, 1.0 - a.context[2]}}));
        for (NodeId j = 0; j < 2; ++j) {
            CHECK(a.context[j] == b.context[j]);
            CHECK(a.value[j] == b.value[j]);
            for (NodeId i = 0; i < 5; ++i) CHECK(a.edge(j, i) == b.edge(j, i));
        }
    }
}

TEST_CASE("conflicting interventions are rejected") {
    CHECK_THROWS_AS(Regime("x", {VNode{0, 1.0}, VNode{0, 2.0}}), InvalidArgument);
    CHECK_THROWS_AS(Regime("x", {VEdge{0, 1, EdgeReplacement::clamp({1.0})}, VEdge{0, 1, EdgeReplacement::clamp({2.0})}}),
                    InvalidArgument);
}
