#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "poscm/experiments.hpp"
#include "poscm/identify.hpp"
#include "poscm/models.hpp"
#include "poscm/parallel.hpp"
#include "poscm/rng.hpp"
#include "poscm/stats.hpp"

using namespace poscm;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double budgetSeconds;
    std::function<Outcome()> run;
};

unsigned threads() {
    if (const char* env = std::getenv("POSCM_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

// Exact P(V2 = 1) over a midpoint lattice of (U^A_12, U^V_2); every threshold
// of the two-node model falls between lattice points.
double enumerateTwoNode(const PoscmSpec& spec, const Regime& regime) {
    const std::size_t k = 80;
    double hits = 0;
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) {
            double ua = (a + 0.5) / k, u2 = (b + 0.5) / k;
            ExogenousDraw d(2, {0, ua, 0, 0}, {{0.5}, {0.5}}, {{0.5}, {0.5}}, {{0.5}, {u2}});
            hits += generate(spec, d, regime).value[1];
        }
    return hits / (k * k);
}

double monteCarloV2(const PoscmSpec& spec, const Regime& regime, std::size_t n, std::uint64_t seed) {
    double hits = 0;
    for (const auto& w : sampleWorlds(spec, regime, MeasurementModel::valuesOnly(), seed, n, threads()))
        hits += w.world.value[1];
    return hits / static_cast<double>(n);
}

Regime copyEdge(double v) {
    return Regime("copy", {VNode{0, v}, VEdge{0, 1, EdgeReplacement::function("presence-value", [](double x) {
                                                   return Vec{1.0, x};
                                               })}});
}

Outcome twoNodeLevel(bool edgeLevel) {
    auto pair = calibratedConfoundingPair(0.5, 0.2, 0.8, 0.8);
    const std::size_t n = 100000;
    const double tol = edgeLevel ? 0.015 : 0.01;
    bool ok = true;
    double worstMc = 0, worstExact = 0;
    for (int side = 0; side < 2; ++side) {
        const PoscmSpec& spec = side ? *pair.mPrime : *pair.m;
        for (double v : {0.0, 1.0}) {
            Regime r = edgeLevel ? copyEdge(v) : Regime("do", {VNode{0, v}});
            double expected = edgeLevel ? (side ? (v ? 0.9 : 0.1) : (v ? 0.75 : 0.25)) : (v ? 0.65 : 0.35);
            double exact = enumerateTwoNode(spec, r);
            double mc = monteCarloV2(spec, r, n, 100 + 10 * side + static_cast<std::uint64_t>(v));
            worstExact = std::max(worstExact, std::abs(exact - expected));
            worstMc = std::max(worstMc, std::abs(mc - expected));
        }
    }
    ok = worstExact <= 1e-12 && worstMc <= tol;
    std::string detail = fmt("max |MC - target| %.4f (tol %.3f), max |exact - target| %.1e", worstMc, tol, worstExact);
    if (edgeLevel) {
        EquivalenceOptions opt{.nPer = 10000, .alpha = 0.01, .seedA = 7, .seedB = 8, .threads = threads()};
        auto verdict = checkEquivalence(*pair.m, *pair.mPrime, {copyEdge(0.0), copyEdge(1.0)},
                                        MeasurementModel::valuesOnly(), opt);
        ok = ok && verdict.distinguished;
        detail += fmt(", equivalence check %s (min corrected p %.2e)",
                      verdict.distinguished ? "distinguishes" : "does not distinguish", verdict.minCorrectedP);
    }
    return {ok, detail};
}

Outcome toyLaw() {
    auto lhs = distributiveToy(ToySide::LHS), rhs = distributiveToy(ToySide::RHS);
    auto w = [](const DistributiveToy& t, const Regime& r) {
        return generate(*t.spec, ExogenousDraw::sample(*t.spec, 1, 0), r).value[t.w];
    };
    auto inputs = [](double x) { return Regime("do", {VNode{0, x}, VNode{1, 1.0}, VNode{2, 1.0}}); };
    auto clamped = [&](const DistributiveToy& t) {
        Regime r = inputs(2.0);
        r.add(VEdge{t.x, t.firstProduct, EdgeReplacement::clamp({1.0, 3.0})});
        return w(t, r);
    };
    double l2 = w(lhs, inputs(2.0)), r2 = w(rhs, inputs(2.0));
    double l3 = w(lhs, inputs(3.0)), r3 = w(rhs, inputs(3.0));
    double le = clamped(lhs), re = clamped(rhs);
    bool ok = l2 == 4.0 && r2 == 4.0 && l3 == 6.0 && r3 == 6.0 && le == 6.0 && re == 5.0;
    return {ok, fmt("node-do x=2: %g/%g, x=3: %g/%g; edge clamp x'=3: %g (LHS) vs %g (RHS)", l2, r2, l3, r3, le, re)};
}

std::vector<Regime> edgeFamily(const PoscmSpec& spec, const std::vector<Vec>& messages) {
    std::vector<Regime> out;
    for (NodeId i = 0; i < spec.n; ++i)
        for (NodeId j : spec.potentialParents(i))
            for (const Vec& m : messages)
                out.emplace_back("edge", std::vector<Intervention>{VEdge{j, i, EdgeReplacement::clamp(m)}});
    return out;
}

Outcome nonIdentifiability() {
    struct Case {
        const char* name;
        SpecPtr spec;
        std::function<double(double)> gamma, inverse;
        std::vector<Vec> messages;
    };
    auto swap = [](double b) { return 1.0 - b; };
    auto pw = [](double b) { return b < 0.5 ? 0.4 * b : 0.2 + 1.6 * (b - 0.5); };
    auto pwInv = [](double c) { return c < 0.2 ? c / 0.4 : 0.5 + (c - 0.2) / 1.6; };
    std::vector<Case> cases{
        {"label swap", discretePoscm({.n = 3, .seed = 2}).spec, swap, swap, {{1.0, 0.0}, {1.0, 1.0}}},
        {"affine reflection", realContextChain(3), swap, swap, {{-1.0}, {1.0}}},
        {"piecewise linear", realContextChain(3), pw, pwInv, {{-1.0}, {1.0}}},
    };
    bool ok = true;
    std::string detail;
    for (const auto& c : cases) {
        PoscmSpec twin = reparameterizeContext(*c.spec, c.gamma, c.inverse);
        std::vector<Regime> family = valueNodeFamily(*c.spec, ProbeProtocol{});
        auto edges = edgeFamily(*c.spec, c.messages);
        family.insert(family.end(), edges.begin(), edges.end());
        int rejections = 0;
        for (std::uint64_t r = 0; r < 20; ++r) {
            EquivalenceOptions opt{.nPer = 10000, .alpha = 0.01, .seedA = 1000 + r, .seedB = 2000 + r, .threads = threads()};
            rejections += checkEquivalence(*c.spec, twin, family, MeasurementModel::valuesOnly(), opt).distinguished;
        }
        ok = ok && rejections <= 1;
        detail += fmt("%s%s: %d/20 rejections over %zu regimes", detail.empty() ? "" : "; ", c.name, rejections,
                      family.size());
    }
    return {ok, detail};
}

Outcome structureReadout() {
    ProbeProtocol protocol;
    protocol.probesPerSetting = 500;
    const std::size_t instances = 100;
    std::vector<int> exact(instances);
    double minEffect = 1.0;
    std::vector<double> effects(instances);
    parallelFor(instances, threads(), [&](std::size_t k) {
        auto model = discretePoscm({.n = 5, .seed = 500 + k, .ampLo = 0.15, .ampHi = 0.25});
        auto unit = freezeInstance(model.spec, k);
        exact[k] = probeStructure(unit, protocol, k).adjacency == unit.groundTruth().adjacency;
        effects[k] = 2 * *std::min_element(model.amp.begin(), model.amp.end());
    });
    for (double e : effects) minEffect = std::min(minEffect, e);
    int hits = 0;
    for (int e : exact) hits += e;
    return {hits >= 95 && minEffect >= 0.3,
            fmt("%d/%zu instances read out exactly, min edge effect %.3f", hits, instances, minEffect)};
}

double tvBinary(const EmpiricalLaw& law, double p) { return std::abs(law.probability(1) - p); }

std::vector<Vec> binaryGrid(std::size_t k) {
    std::vector<Vec> out;
    for (std::size_t m = 0; m < (std::size_t{1} << k); ++m) {
        Vec v;
        for (std::size_t b = 0; b < k; ++b) v.push_back(static_cast<double>(m >> b & 1));
        out.push_back(v);
    }
    return out;
}

Outcome kernelRecovery() {
    auto model = discretePoscm({.n = 4, .seed = 9, .ampLo = 0.45, .ampHi = 0.45});
    UnitSampler sampler{model.spec, 77, threads()};
    ProbeProtocol protocol;
    protocol.probesPerSetting = 30;
    protocol.testAlpha = 1e-4;
    const std::size_t nPer = 10000;
    double worst[3] = {0, 0, 0};
    std::size_t cells[3] = {0, 0, 0};

    for (NodeId j = 0; j + 1 < 4; ++j) {
        auto est = estimateStructureKernel(sampler, j, {0.0, 1.0}, nPer, protocol);
        for (int b = 0; b < 2; ++b) {
            double tv = 0;
            for (std::size_t row = 0; row < (std::size_t{1} << est.rowTargets.size()); ++row) {
                double p = 1;
                for (std::size_t t = 0; t < est.rowTargets.size(); ++t) {
                    double q = model.edgeProb(j, est.rowTargets[t], b);
                    p *= row >> t & 1 ? q : 1 - q;
                }
                auto it = est.laws[b].counts().find(static_cast<std::int64_t>(row));
                double hat = it == est.laws[b].counts().end() ? 0.0 : double(it->second) / est.laws[b].n();
                tv += 0.5 * std::abs(hat - p);
            }
            worst[0] = std::max(worst[0], tv);
            ++cells[0];
        }
    }
    for (NodeId i = 0; i < 4; ++i) {
        std::vector<NodeId> S;
        for (NodeId s = 0; s < i; ++s) S.push_back(s);
        auto grid = S.empty() ? std::vector<Vec>{} : binaryGrid(S.size());
        auto est = estimateContextKernel(sampler, i, S, grid, nPer, protocol);
        for (std::size_t c = 0; c < est.laws.size(); ++c) {
            double p = S.empty() ? model.rootPrior[i] : model.contextProb(i, grid[c]);
            worst[1] = std::max(worst[1], tvBinary(est.laws[c], p));
            ++cells[1];
        }
    }
    for (NodeId i = 1; i < 4; ++i) {
        std::vector<NodeId> S;
        for (NodeId s = 0; s < i; ++s) S.push_back(s);
        auto grid = binaryGrid(S.size());
        for (int b = 0; b < 2; ++b) {
            auto est = estimateValueKernel(sampler, i, S, grid, double(b), nPer, protocol);
            for (std::size_t c = 0; c < est.laws.size(); ++c) {
                worst[2] = std::max(worst[2], tvBinary(est.laws[c], model.valueProb(i, b, grid[c])));
                ++cells[2];
            }
        }
    }
    bool ok = worst[0] <= 0.03 && worst[1] <= 0.03 && worst[2] <= 0.03;
    return {ok, fmt("max TV structure %.4f (%zu cells), context %.4f (%zu cells), value %.4f (%zu cells)", worst[0],
                    cells[0], worst[1], cells[1], worst[2], cells[2])};
}

Outcome messageRecovery() {
    bool ok = true;
    std::string detail;
    for (auto kind : {ChannelKind::Identity, ChannelKind::Tanh}) {
        const char* name = kind == ChannelKind::Identity ? "identity" : "tanh";
        auto noisy = channelModel(kind, 0.2);
        auto unit = freezeInstance(noisy, 1);
        const double spacing = 0.05;
        std::vector<Vec> clamps;
        for (int k = -22; k <= 22; ++k) clamps.push_back({k * spacing});
        double errAB = 0;
        for (const auto& m : identifyMessageRouteAB(unit, 1, 0, {-0.8, -0.4, 0.0, 0.4, 0.8}, clamps, 2000, {}, 7))
            errAB = std::max(errAB, std::abs(m.estimate[0] - channelMessage(kind, m.v)));

        auto exact = channelModel(kind, 0.0);
        std::vector<ExogenousDraw> blocks;
        for (int b = 0; b < 50; ++b) blocks.push_back(ExogenousDraw::sample(*exact, 8, b));
        Vec grid;
        for (int k = -11; k <= 11; ++k) grid.push_back(k * 0.1);
        double errC = 0;
        std::size_t matched = 0;
        for (const auto& m : identifyMessageRouteC(*exact, blocks, 1, 0, grid)) {
            if (m.status != ReplayMatch::Status::Matched) continue;
            ++matched;
            errC = std::max(errC, std::abs(m.estimate[0] - channelMessage(kind, m.vj)));
        }
        ok = ok && errAB <= spacing && errC <= 1e-9 && matched == blocks.size();
        detail += fmt("%s%s: A/B max error %.4f (spacing %.2f), C max error %.1e over %zu/%zu blocks",
                      detail.empty() ? "" : "; ", name, errAB, spacing, errC, matched, blocks.size());
    }
    return {ok, detail};
}

Outcome experimentAnalogues() {
    const unsigned t = threads();
    Exp1Options o1;
    o1.threads = t;
    Exp2Options o2;
    o2.threads = t;
    Exp3Options o3;
    o3.threads = t;
    Report reports[] = {runExp1(o1), runExp2(o2), runExp3(o3)};
    bool ok = true;
    std::string detail;
    for (const auto& r : reports)
        for (const auto& c : r.checks) {
            ok = ok && c.passed;
            if (!c.passed) detail += (detail.empty() ? "" : "; ") + r.experiment + ": " + c.name + " failed (" + c.detail + ")";
        }
    const Table* ks = reports[0].table("ks");
    double minLatentP = 1, maxObservedP = 0;
    for (const auto& row : ks->rows) {
        minLatentP = std::min(minLatentP, std::stod(row[2]));
        maxObservedP = std::max(maxObservedP, std::stod(row[4]));
    }
    const Table* s2 = reports[1].table("summary");
    const Table* s3 = reports[2].table("sigmoid");
    std::string summary = fmt("exp1 min latent p %.3f, max observed p %.1e; exp2 edge/node MMD ratio %s; exp3 midpoint %s mV "
                              "vs vThr %s mV",
                              minLatentP, maxObservedP, s2->rows[0][2].c_str(), s3->rows[0][1].c_str(),
                              s3->rows[0][0].c_str());
    return {ok, detail.empty() ? summary : summary + "; " + detail};
}

std::vector<double> normals(std::uint64_t key, std::size_t n, double mu = 0.0) {
    rng::KeyedStream s(key);
    std::vector<double> v(n);
    for (auto& x : v) x = mu + s.normal();
    return v;
}

double doubleLoopMmd2(const std::vector<double>& x, const std::vector<double>& y, double sigma) {
    auto k = [sigma](double a, double b) { return std::exp(-(a - b) * (a - b) / (2 * sigma * sigma)); };
    double xx = 0, yy = 0, xy = 0;
    for (double a : x)
        for (double b : x) xx += k(a, b);
    for (double a : y)
        for (double b : y) yy += k(a, b);
    for (double a : x)
        for (double b : y) xy += k(a, b);
    double n = x.size(), m = y.size();
    return xx / (n * n) + yy / (m * m) - 2 * xy / (n * m);
}

Outcome statisticalPlumbing() {
    const double alpha = 0.05;
    const std::size_t reps = 200;
    std::vector<int> ks(reps), mmd(reps);
    parallelFor(reps, threads(), [&](std::size_t k) {
        auto a = normals(31000 + k, 200), b = normals(47000 + k, 200);
        ks[k] = ksTest(EmpiricalLaw::scalar(a), EmpiricalLaw::scalar(b)).pValue < alpha;
        auto x = normals(53000 + k, 50), y = normals(59000 + k, 50);
        std::vector<double> pooled = x;
        pooled.insert(pooled.end(), y.begin(), y.end());
        mmd[k] = mmdPermutationTest(x, y, medianHeuristicBandwidth(pooled), 200, k).pValue < alpha;
    });
    double ksSize = 0, mmdSize = 0;
    for (std::size_t k = 0; k < reps; ++k) {
        ksSize += ks[k];
        mmdSize += mmd[k];
    }
    ksSize /= reps;
    mmdSize /= reps;
    double worstRel = 0;
    for (double shift : {0.5, 1.0, 3.0}) {
        auto x = normals(61, 1500), y = normals(67, 1500, shift);
        double ref = doubleLoopMmd2(x, y, 1.0);
        worstRel = std::max(worstRel, std::abs(mmd2(x, y, 1.0) - ref) / ref);
    }
    bool ok = ksSize <= alpha + 0.03 && mmdSize <= alpha + 0.03 && worstRel <= 0.05;
    return {ok, fmt("KS size %.3f, MMD size %.3f (bound %.2f); MMD vs double loop max relative error %.1e", ksSize,
                    mmdSize, alpha + 0.03, worstRel)};
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<Criterion> criteria{
        {1, "two-node confounding, node level", 10, [] { return twoNodeLevel(false); }},
        {2, "two-node confounding, edge level", 10, [] { return twoNodeLevel(true); }},
        {3, "distributive toy", 1, toyLaw},
        {4, "non-identifiability of context labels", 120, nonIdentifiability},
        {5, "structure readout", 300, structureReadout},
        {6, "kernel recovery", 120, kernelRecovery},
        {7, "message recovery", 60, messageRecovery},
        {8, "experiment analogues", 600, experimentAnalogues},
        {9, "statistical plumbing", 600, statisticalPlumbing},
    };
    std::vector<int> only;
    for (int k = 1; k < argc; ++k) only.push_back(std::atoi(argv[k]));

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("threw: ") + e.what()};
        }
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        bool inBudget = seconds <= c.budgetSeconds;
        bool passed = out.passed && inBudget;
        failed += !passed;
        std::printf("%s [%d] %s (%.2f s, budget %.0f s%s): %s\n", passed ? "PASS" : "FAIL", c.id, c.name, seconds,
                    c.budgetSeconds, inBudget ? "" : ", over budget", out.detail.c_str());
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
