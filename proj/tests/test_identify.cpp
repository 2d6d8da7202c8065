#include <doctest.h>

#include <cmath>

#include "poscm/error.hpp"
#include "poscm/identify.hpp"
#include "poscm/models.hpp"

using namespace poscm;

namespace {

InstanceHandle twoNodeUnit(const SpecPtr& spec, bool edge) {
    for (std::uint64_t s = 0;; ++s) {
        InstanceHandle u = freezeInstance(spec, s);
        if (u.groundTruth().edge(0, 1) == edge) return u;
    }
}

ProbeProtocol quickProtocol() {
    ProbeProtocol p;
    p.probesPerSetting = 30;
    p.testAlpha = 1e-4;
    return p;
}

SpecPtr strongDiscrete(std::size_t n, std::uint64_t seed) {
    return discretePoscm({.n = n, .seed = seed, .ampLo = 0.45, .ampHi = 0.45}).spec;
}

}  // namespace

TEST_CASE("structure readout on the two-node instance") {
    auto spec = twoNodeConfounding(0.5, 0.2, 0.8);
    ProbeProtocol protocol;
    auto on = probeStructure(twoNodeUnit(spec, true), protocol, 1);
    CHECK(on.edge(0, 1));
    CHECK(on.tests == 1);
    auto off = twoNodeUnit(spec, false);
    int rejections = 0, falseEdges = 0;
    for (std::uint64_t r = 0; r < 200; ++r) {
        auto readout = probeStructure(off, protocol, 100 + r);
        falseEdges += readout.edge(0, 1);
        rejections += readout.dyads[0].minP < 0.05;
    }
    CHECK(falseEdges <= 6);
    CHECK(rejections <= 16);
}

TEST_CASE("structure readout recovers random discrete instances") {
    int exact = 0;
    ProbeProtocol protocol;
    for (std::uint64_t k = 0; k < 20; ++k) {
        auto model = discretePoscm({.n = 5, .seed = 100 + k});
        auto unit = freezeInstance(model.spec, k);
        auto readout = probeStructure(unit, protocol, k);
        exact += readout.adjacency == unit.groundTruth().adjacency;
    }
    CHECK(exact >= 18);
}

TEST_CASE("incoming and outgoing readouts agree with the full readout") {
    auto spec = strongDiscrete(4, 7);
    auto unit = freezeInstance(spec, 3);
    auto protocol = quickProtocol();
    auto full = probeStructure(unit, protocol, 1);
    CHECK(full.adjacency == unit.groundTruth().adjacency);
    auto in = probeIncoming(unit, protocol, 3, 2);
    auto out = probeOutgoing(unit, protocol, 0, 3);
    CHECK(in.parents(3) == unit.groundTruth().parents(3));
    for (NodeId i = 1; i < 4; ++i) CHECK(out.edge(0, i) == unit.groundTruth().edge(0, i));
}

TEST_CASE("probe protocol validation") {
    auto spec = twoNodeConfounding(0.5, 0.2, 0.8);
    ProbeProtocol p;
    CHECK(p.gridFor(*spec, 0) == Vec{0.0, 1.0});
    p.probesPerSetting = 1;
    CHECK_THROWS_AS(p.validate(*spec), InvalidArgument);
    ProbeProtocol q;
    q.valueGrid = {Vec{0.0, 7.0}, Vec{}};
    CHECK_THROWS(q.validate(*spec));
}

TEST_CASE("structure kernel follows the edge probability table") {
    auto model = discretePoscm({.n = 3, .seed = 5, .ampLo = 0.45, .ampHi = 0.45});
    UnitSampler sampler{model.spec, 11};
    const std::size_t nPer = 2000;
    auto est = estimateStructureKernel(sampler, 0, {0.0, 1.0}, nPer, quickProtocol());
    REQUIRE(est.laws.size() == 2);
    REQUIRE(est.rowTargets == std::vector<NodeId>{1, 2});
    for (int b = 0; b < 2; ++b)
        for (std::size_t t = 0; t < 2; ++t) {
            double p = model.edgeProb(0, est.rowTargets[t], b);
            double hat = 0;
            for (auto [row, c] : est.laws[b].counts())
                if (row >> t & 1) hat += double(c) / nPer;
            CHECK(std::abs(hat - p) < 4 * std::sqrt(p * (1 - p) / nPer));
        }
    CHECK(est.flags.empty());
}

TEST_CASE("structure kernel flags positivity violations") {
    auto model = discretePoscm({.n = 3, .seed = 5, .edgeLo = 1.0, .edgeHi = 1.0, .ampLo = 0.45, .ampHi = 0.45});
    UnitSampler sampler{model.spec, 2};
    auto est = estimateStructureKernel(sampler, 0, {0.0}, 50, quickProtocol());
    CHECK(est.flags.size() == 2);
}

TEST_CASE("context kernel recovers the majority-with-flip law") {
    auto model = discretePoscm({.n = 3, .seed = 5, .edgeLo = 0.6, .edgeHi = 0.8, .ampLo = 0.45, .ampHi = 0.45});
    UnitSampler sampler{model.spec, 3};
    const std::size_t nPer = 1500;
    std::vector<Vec> grid{{0.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
    auto est = estimateContextKernel(sampler, 2, {0, 1}, grid, nPer, quickProtocol());
    REQUIRE(est.laws.size() == 3);
    for (std::size_t c = 0; c < grid.size(); ++c) {
        double p = model.contextProb(2, grid[c]);
        double hat = est.laws[c].probability(1);
        CHECK(std::abs(hat - p) < 4 * std::sqrt(p * (1 - p) / nPer) + 1e-9);
        CHECK(est.conditioningFrequency[c] > 0.2);
    }
    auto root = estimateContextKernel(sampler, 0, {}, {}, nPer, quickProtocol());
    double p0 = model.rootPrior[0];
    CHECK(std::abs(root.laws[0].probability(1) - p0) < 4 * std::sqrt(p0 * (1 - p0) / nPer));
}

TEST_CASE("value kernel on the two-node model") {
    UnitSampler sampler{twoNodeConfounding(0.5, 0.2, 0.8), 4};
    ProbeProtocol protocol;
    protocol.probesPerSetting = 60;
    protocol.testAlpha = 1e-3;
    const std::size_t nPer = 20000;
    auto est = estimateValueKernel(sampler, 1, {0}, {{0.0}, {1.0}}, std::nullopt, nPer, protocol);
    CHECK(std::abs(est.laws[0].probability(1) - 0.2) < 0.01);
    CHECK(std::abs(est.laws[1].probability(1) - 0.8) < 0.01);
    CHECK(std::abs(est.conditioningFrequency[0] - 0.5) < 0.02);
    auto empty = estimateValueKernel(sampler, 1, {}, {}, std::nullopt, nPer, protocol);
    CHECK(std::abs(empty.laws[0].probability(1) - 0.5) < 0.015);
}

TEST_CASE("value kernel with a context condition") {
    auto model = discretePoscm({.n = 2, .seed = 21, .ampLo = 0.45, .ampHi = 0.45});
    UnitSampler sampler{model.spec, 5};
    const std::size_t nPer = 2000;
    for (double b : {0.0, 1.0}) {
        auto est = estimateValueKernel(sampler, 1, {0}, {{0.0}, {1.0}}, b, nPer, quickProtocol());
        for (int v = 0; v < 2; ++v) {
            double p = model.valueProb(1, int(b), Vec{double(v)});
            CHECK(std::abs(est.laws[v].probability(1) - p) < 4 * std::sqrt(p * (1 - p) / nPer));
        }
    }
}

TEST_CASE("kernel estimators reject malformed requests") {
    UnitSampler sampler{twoNodeConfounding(0.5, 0.2, 0.8), 1};
    ProbeProtocol p;
    CHECK_THROWS_AS(estimateValueKernel(sampler, 0, {1}, {{0.0}}, std::nullopt, 10, p), InvalidArgument);
    CHECK_THROWS_AS(estimateValueKernel(sampler, 1, {0}, {{0.0, 1.0}}, std::nullopt, 10, p), InvalidArgument);
    CHECK_THROWS_AS(estimateStructureKernel(sampler, 0, {}, 10, p), InvalidArgument);
}

TEST_CASE("route A/B recovers the two-node message") {
    auto spec = twoNodeConfounding(0.5, 0.2, 0.8);
    auto unit = twoNodeUnit(spec, true);
    std::vector<Vec> clamps;
    for (int k = 0; k <= 20; ++k) clamps.push_back({1.0, k / 20.0});
    auto matches = identifyMessageRouteAB(unit, 1, 0, {0.0, 1.0}, clamps, 10000, {}, 3);
    REQUIRE(matches.size() == 2);
    CHECK(matches[0].estimate[1] == doctest::Approx(0.2));
    CHECK(matches[1].estimate[1] == doctest::Approx(0.8));
    for (const auto& m : matches) {
        CHECK(m.residualP > 0.05);
        CHECK(!m.ambiguous);
    }
}

TEST_CASE("route A/B recovers identity and tanh channels to grid resolution") {
    for (auto kind : {ChannelKind::Identity, ChannelKind::Tanh}) {
        auto spec = channelModel(kind, 0.2);
        auto unit = freezeInstance(spec, 1);
        const double spacing = 0.05;
        std::vector<Vec> clamps;
        for (int k = -22; k <= 22; ++k) clamps.push_back({k * spacing});
        Vec grid{-0.8, -0.4, 0.0, 0.4, 0.8};
        auto matches = identifyMessageRouteAB(unit, 1, 0, grid, clamps, 2000, {}, 7);
        for (const auto& m : matches) CHECK(std::abs(m.estimate[0] - channelMessage(kind, m.v)) <= spacing);
    }
}

TEST_CASE("route A/B flags separated ties") {
    auto spec = channelModel(ChannelKind::Identity, 0.2);
    auto unit = freezeInstance(spec, 1);
    auto split = identifyMessageRouteAB(unit, 1, 0, {0.5}, {{0.5}, {-0.5}, {0.5}}, 2000, {}, 2);
    CHECK(split[0].ambiguous);
    auto run = identifyMessageRouteAB(unit, 1, 0, {0.5}, {{-0.5}, {0.5}, {0.5}}, 2000, {}, 2);
    CHECK(!run[0].ambiguous);
}

TEST_CASE("route C recovers deterministic channels pointwise") {
    for (auto kind : {ChannelKind::Identity, ChannelKind::Tanh}) {
        auto spec = channelModel(kind, 0.0);
        std::vector<ExogenousDraw> blocks;
        for (int b = 0; b < 50; ++b) blocks.push_back(ExogenousDraw::sample(*spec, 8, b));
        Vec grid;
        for (int k = -11; k <= 11; ++k) grid.push_back(k * 0.1);
        auto matches = identifyMessageRouteC(*spec, blocks, 1, 0, grid);
        REQUIRE(matches.size() == 50);
        for (const auto& m : matches) {
            REQUIRE(m.status == ReplayMatch::Status::Matched);
            CHECK(std::abs(m.estimate[0] - channelMessage(kind, m.vj)) <= 1e-9);
        }
    }
}

TEST_CASE("route C skips absent edges and reports missing matches") {
    auto spec = realContextChain(2);
    std::vector<ExogenousDraw> blocks;
    for (int b = 0; b < 60; ++b) blocks.push_back(ExogenousDraw::sample(*spec, 3, b));
    auto matches = identifyMessageRouteC(*spec, blocks, 1, 0, {0.0, 0.01});
    int skipped = 0, noMatch = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        bool edge = generate(*spec, blocks[b]).edge(0, 1);
        if (!edge) {
            CHECK(matches[b].status == ReplayMatch::Status::Skipped);
            ++skipped;
        } else if (matches[b].status == ReplayMatch::Status::NoMatch) {
            ++noMatch;
        }
    }
    CHECK(skipped > 0);
    CHECK(noMatch > 0);
}

TEST_CASE("equivalence of the calibrated two-node pair") {
    auto pair = calibratedConfoundingPair(0.5, 0.2, 0.8, 0.8);
    std::vector<Regime> nodeFamily{Regime("observational"), Regime("do0", {VNode{0, 0.0}}),
                                   Regime("do1", {VNode{0, 1.0}})};
    EquivalenceOptions opt;
    auto same = checkEquivalence(*pair.m, *pair.mPrime, nodeFamily, MeasurementModel::valuesOnly(), opt);
    CHECK(!same.distinguished);
    CHECK(same.tests.size() == 9);

    auto copy = [](double v) {
        return Regime("copy", {VNode{0, v}, VEdge{0, 1, EdgeReplacement::function("presence-value", [](double x) {
                                                           return Vec{1.0, x};
                                                       })}});
    };
    auto edge = checkEquivalence(*pair.m, *pair.mPrime, {copy(0.0), copy(1.0)}, MeasurementModel::valuesOnly(), opt);
    CHECK(edge.distinguished);
    CHECK(edge.channel.starts_with("V["));
}

TEST_CASE("a spec is equivalent to itself with calibrated size") {
    auto spec = discretePoscm({.n = 3, .seed = 2}).spec;
    ProbeProtocol protocol;
    auto family = valueNodeFamily(*spec, protocol);
    CHECK(family.size() == 7);
    int rejections = 0;
    for (std::uint64_t r = 0; r < 20; ++r) {
        EquivalenceOptions opt{.nPer = 2000, .seedA = 10 + r, .seedB = 100 + r};
        rejections += checkEquivalence(*spec, *spec, family, MeasurementModel::valuesOnly(), opt).distinguished;
    }
    CHECK(rejections <= 1);
}

TEST_CASE("identity reparameterization reproduces worlds") {
    auto spec = realContextChain(3);
    auto same = reparameterizeContext(*spec, [](double b) { return b; }, [](double b) { return b; });
    for (int k = 0; k < 30; ++k) {
        auto d = ExogenousDraw::sample(*spec, 5, k);
        World a = generate(*spec, d), b = generate(same, d);
        CHECK(a.value == b.value);
        CHECK(a.context == b.context);
        CHECK(a.adjacency == b.adjacency);
    }
}

TEST_CASE("label-swap reparameterization is hidden from values but not contexts") {
    auto spec = discretePoscm({.n = 3, .seed = 2}).spec;
    auto swap = [](double b) { return 1.0 - b; };
    auto twin = reparameterizeContext(*spec, swap, swap);
    for (int k = 0; k < 30; ++k) {
        auto d = ExogenousDraw::sample(*spec, 5, k);
        World a = generate(*spec, d), b = generate(twin, d);
        CHECK(a.value == b.value);
        for (NodeId i = 0; i < 3; ++i) CHECK(b.context[i] == 1.0 - a.context[i]);
    }
    ProbeProtocol protocol;
    EquivalenceOptions opt{.nPer = 4000};
    auto family = valueNodeFamily(*spec, protocol);
    CHECK(!checkEquivalence(*spec, twin, family, MeasurementModel::valuesOnly(), opt).distinguished);
    CHECK(checkEquivalence(*spec, twin, family, MeasurementModel::contextsAndValues(), opt).distinguished);
}

TEST_CASE("reparameterized structure kernel is the pushed-forward kernel") {
    auto spec = realContextChain(3);
    auto gamma = [](double b) { return b < 0.5 ? 0.4 * b : 0.2 + 1.6 * (b - 0.5); };
    auto gammaInv = [](double c) { return c < 0.2 ? c / 0.4 : 0.5 + (c - 0.2) / 1.6; };
    auto twin = reparameterizeContext(*spec, gamma, gammaInv);
    for (double b = 0; b <= 1.0; b += 0.125) CHECK(twin.edgeProb(0, 1, gamma(b)) == doctest::Approx(spec->edgeProb(0, 1, b)));
}

TEST_CASE("reparameterization rejects maps that leave the domain") {
    auto spec = realContextChain(3);
    CHECK_THROWS_AS(reparameterizeContext(*spec, [](double b) { return 2 * b; }, [](double c) { return c / 2; }),
                    DomainError);
    CHECK_THROWS_AS(reparameterizeContext(*spec, [](double b) { return 1 - b; }, [](double c) { return c; }),
                    DomainError);
}
