#include "poscm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "poscm/error.hpp"
#include "poscm/parallel.hpp"
#include "poscm/stats.hpp"

namespace poscm {

namespace {

struct Arm {
    LayeredNetSpec net;
    LayeredView view;

    explicit Arm(LayeredNetSpec spec) : net(std::move(spec)), view(layeredView(net)) {}

    LayeredRun run(std::uint64_t seed, const Regime& regime) const {
        return simulateLayered(net, view, ExogenousDraw::sample(*view.spec, seed, 0), regime, net.T, net.dt);
    }

    const std::string& typeName(const World& w, NodeId cell) const {
        const auto& layer = net.layers[view.cells[cell].layer];
        return layer.types.at(static_cast<std::size_t>(w.context[cell])).name;
    }
};

std::string mv(double v) { return formatNumber(v); }

void requireSeeds(const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
}

NodeId clampCell(const Arm& arm, const std::string& layer, std::size_t index) {
    const auto& cells = arm.view.cellsOf(layer, arm.net);
    if (index >= cells.size()) throw ConfigError("clamp index outside layer " + layer);
    return cells[index];
}

double mean(const Vec& xs) { return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size(); }

double sampleSd(const Vec& xs) {
    if (xs.size() < 2) return 0.0;
    double m = mean(xs), ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / (xs.size() - 1));
}

}  // namespace

Report runExp1(const Exp1Options& o) {
    requireSeeds(o.seeds);
    Arm m(o.net), twin(typeSwappedTwin(o.net, o.typedLayer, o.typeA, o.typeB));
    const NodeId clamp = clampCell(m, o.clampLayer, o.clampIndex);
    std::vector<Regime> regimes{Regime("observational", {})};
    for (double v : o.clamps) regimes.emplace_back("do(" + o.clampLayer + "=" + mv(v) + ")", std::vector<Intervention>{VNode{clamp, v}});

    struct Outcome {
        Vec rates;
        Vec labeledV;
    };
    const std::size_t perArm = o.seeds.size() * regimes.size();
    std::vector<Outcome> out(2 * perArm);
    parallelFor(out.size(), o.threads, [&](std::size_t job) {
        const bool isTwin = job >= perArm;
        const Arm& arm = isTwin ? twin : m;
        std::size_t s = (job % perArm) / regimes.size(), r = job % regimes.size();
        LayeredRun run = arm.run(o.seeds[s] + (isTwin ? o.twinSeedOffset : 0), regimes[r]);
        for (NodeId cell = 0; cell < arm.view.cells.size(); ++cell)
            if (o.readoutLayer.empty() || arm.net.layers[arm.view.cells[cell].layer].name == o.readoutLayer)
                out[job].rates.push_back(firingRate(run.traces[cell].samples, o.spikeThreshold, arm.net.dt));
        for (NodeId cell : arm.view.cellsOf(o.typedLayer, arm.net))
            if (arm.typeName(run.structure, cell) == o.typeA)
                out[job].labeledV.push_back(trailingMean(run.traces[cell].samples, 0.5));
    });

    Table t{"ks", {"condition", "latentD", "latentP", "observedD", "observedP", "nM", "nTwin"}, {}, true};
    bool latentQuiet = true, observedRejects = true;
    for (std::size_t r = 0; r < regimes.size(); ++r) {
        Vec ratesM, ratesT, vM, vT;
        for (std::size_t s = 0; s < o.seeds.size(); ++s) {
            const auto& a = out[s * regimes.size() + r];
            const auto& b = out[perArm + s * regimes.size() + r];
            ratesM.insert(ratesM.end(), a.rates.begin(), a.rates.end());
            ratesT.insert(ratesT.end(), b.rates.begin(), b.rates.end());
            vM.insert(vM.end(), a.labeledV.begin(), a.labeledV.end());
            vT.insert(vT.end(), b.labeledV.begin(), b.labeledV.end());
        }
        auto latent = ksTest(EmpiricalLaw::scalar(ratesM), EmpiricalLaw::scalar(ratesT));
        TwoSampleResult observed{1.0, 0.0, TestMethod::KS};
        if (!vM.empty() && !vT.empty()) observed = ksTest(EmpiricalLaw::scalar(vM), EmpiricalLaw::scalar(vT));
        latentQuiet = latentQuiet && latent.pValue > o.alpha;
        observedRejects = observedRejects && observed.pValue <= o.alpha;
        t.addRow({regimes[r].label(), mv(latent.statistic), mv(latent.pValue), mv(observed.statistic),
                  mv(observed.pValue), std::to_string(ratesM.size()), std::to_string(ratesT.size())});
    }
    Report rep{"exp1-twin", {t}, {}};
    rep.checks.push_back({"latent types: no KS rejection", latentQuiet, "alpha " + mv(o.alpha)});
    rep.checks.push_back({"observed types: every KS test rejects", observedRejects, "alpha " + mv(o.alpha)});
    return rep;
}

Report runExp2(const Exp2Options& o) {
    requireSeeds(o.seeds);
    if (o.gTests.empty() || o.clamps.empty()) throw ConfigError("exp2 needs clamp and conductance grids");
    LayeredNetSpec mPrime;
    if (o.selfPair) {
        mPrime = o.net;
    } else {
        auto pair = calibratedDensityPair(o.net, o.pre, o.post, o.blockFraction);
        mPrime = pair.second;
        if (!o.calibrate)
            for (auto& proj : mPrime.projections)
                if (proj.pre == o.pre && proj.post == o.post) proj.synapse = o.net.projection(o.pre, o.post)->synapse;
    }
    Arm m(o.net), mp(mPrime);
    const NodeId clamp = clampCell(m, o.pre, o.clampIndex);
    const auto& preCells = m.view.cellsOf(o.pre, m.net);
    const auto& postCells = m.view.cellsOf(o.post, m.net);

    std::vector<Regime> regimes{Regime("observational", {})};
    std::vector<std::string> kind{""};
    for (double v : o.clamps) {
        regimes.emplace_back("do(" + o.pre + "[" + std::to_string(o.clampIndex) + "]=" + mv(v) + ")",
                             std::vector<Intervention>{VNode{clamp, v}});
        kind.push_back("node-do");
    }
    for (double g : o.gTests) {
        std::vector<Intervention> edges;
        for (NodeId j : preCells)
            for (NodeId i : postCells) edges.push_back(VEdge{j, i, EdgeReplacement::clamp({g})});
        regimes.emplace_back("gTest=" + mv(g), std::move(edges));
        kind.push_back("edge-do");
    }

    const std::size_t perArm = o.seeds.size() * regimes.size();
    std::vector<Vec> steady(2 * perArm);
    parallelFor(steady.size(), o.threads, [&](std::size_t job) {
        const bool second = job >= perArm;
        const Arm& arm = second ? mp : m;
        std::size_t s = (job % perArm) / regimes.size(), r = job % regimes.size();
        LayeredRun run = arm.run(o.seeds[s] + (second ? o.twinSeedOffset : 0), regimes[r]);
        for (NodeId cell : arm.view.cellsOf(o.post, arm.net))
            steady[job].push_back(trailingMean(run.traces[cell].samples, o.window));
    });

    auto effects = [&](std::size_t armBase, std::size_t r) {
        Vec d;
        for (std::size_t s = 0; s < o.seeds.size(); ++s) {
            const Vec& obs = steady[armBase + s * regimes.size()];
            const Vec& in = steady[armBase + s * regimes.size() + r];
            for (std::size_t k = 0; k < in.size(); ++k) d.push_back(in[k] - obs[k]);
        }
        return d;
    };

    Table t{"mmd", {"intervention", "condition", "mmd", "permutationP", "meanEffectM", "meanEffectTwin"}, {}, true};
    std::vector<Vec> effM(regimes.size()), effT(regimes.size());
    Vec pooled;
    for (std::size_t r = 1; r < regimes.size(); ++r) {
        effM[r] = effects(0, r);
        effT[r] = effects(perArm, r);
        pooled.insert(pooled.end(), effM[r].begin(), effM[r].end());
        pooled.insert(pooled.end(), effT[r].begin(), effT[r].end());
    }
    const double sigma = medianHeuristicBandwidth(pooled);
    Vec node, edge;
    for (std::size_t r = 1; r < regimes.size(); ++r) {
        const Vec &a = effM[r], &b = effT[r];
        double value = std::sqrt(std::max(0.0, mmd2(a, b, sigma)));
        auto perm = mmdPermutationTest(a, b, sigma, o.permutations, o.seeds.front() * 7919 + r);
        (kind[r] == "node-do" ? node : edge).push_back(value);
        t.addRow({kind[r], regimes[r].label(), mv(value), mv(perm.pValue), mv(mean(a)), mv(mean(b))});
    }
    double meanNode = mean(node), meanEdge = mean(edge);
    double ratio = meanNode > 0 ? meanEdge / meanNode : std::numeric_limits<double>::infinity();
    Table summary{"summary", {"meanNodeDo", "meanEdgeDo", "ratio", "bandwidth"}, {}};
    summary.addRow({mv(meanNode), mv(meanEdge), mv(ratio), mv(sigma)});
    Report rep{"exp2-confound", {t, summary}, {}};
    rep.checks.push_back({"mean edge-do MMD exceeds mean node-do MMD", meanEdge > meanNode,
                          "edge " + mv(meanEdge) + " node " + mv(meanNode)});
    rep.checks.push_back({"edge/node MMD ratio above threshold", ratio > o.minRatio,
                          "ratio " + mv(ratio) + " threshold " + mv(o.minRatio)});
    return rep;
}

SigmoidFit fitSigmoid(const Vec& x, const Vec& y) {
    if (x.size() != y.size() || x.size() < 4) throw InvalidArgument("sigmoid fit needs at least 4 paired points");
    auto [xlo, xhi] = std::minmax_element(x.begin(), x.end());
    const double lo = *xlo, hi = *xhi, span = hi - lo;
    if (!(span > 0)) throw InvalidArgument("sigmoid fit needs distinct abscissae");

    auto solve = [&](double mid, double slope) {
        // Linear least squares in (lower, amplitude) for fixed shape.
        double sz = 0, szz = 0, sy = 0, szy = 0;
        const double n = static_cast<double>(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) {
            double z = 1.0 / (1.0 + std::exp(-(x[k] - mid) / slope));
            sz += z, szz += z * z, sy += y[k], szy += z * y[k];
        }
        SigmoidFit f{0, 0, mid, slope, 0};
        double det = n * szz - sz * sz;
        if (std::abs(det) < 1e-12) {
            f.lower = sy / n;
        } else {
            f.amplitude = (n * szy - sz * sy) / det;
            f.lower = (sy - f.amplitude * sz) / n;
        }
        for (std::size_t k = 0; k < x.size(); ++k) {
            double r = y[k] - f.lower - f.amplitude / (1.0 + std::exp(-(x[k] - mid) / slope));
            f.sse += r * r;
        }
        return f;
    };

    SigmoidFit best{};
    best.sse = std::numeric_limits<double>::infinity();
    auto scan = [&](double m0, double m1, double dm, double s0, double s1, double ds) {
        for (double mid = m0; mid <= m1 + 1e-12; mid += dm)
            for (double slope = s0; slope <= s1 + 1e-12; slope += ds) {
                SigmoidFit f = solve(mid, slope);
                if (f.sse < best.sse - 1e-15) best = f;
            }
    };
    scan(lo, hi, span / 400.0, span / 200.0, span / 2.0, span / 200.0);
    SigmoidFit coarse = best;
    scan(coarse.midpoint - span / 400.0, coarse.midpoint + span / 400.0, span / 40000.0,
         std::max(span / 2000.0, coarse.slope - span / 200.0), coarse.slope + span / 200.0, span / 20000.0);
    return best;
}

Report runExp3(const Exp3Options& o) {
    requireSeeds(o.seeds);
    if (o.clamps.size() < 4) throw ConfigError("exp3 needs at least 4 clamp levels");
    Report rep{"exp3-kernels", {}, {}};

    Table comp{"composition", {"context", "totalCells"}, {}, true};
    for (const auto& layer : o.net.layers) comp.columns.push_back(layer.name);
    comp.columns.push_back("firstTypeShare");
    for (double c : o.contexts) {
        LayeredNetSpec net = withGlobalContext(o.net, c, o.reference);
        LayeredView view = layeredView(net);
        std::size_t multi = 0, first = 0;
        for (std::uint64_t seed : o.seeds) {
            World w = generateStructure(*view.spec, std::make_shared<const ExogenousDraw>(ExogenousDraw::sample(*view.spec, seed, 0)),
                                        std::make_shared<const Regime>());
            for (NodeId cell = 0; cell < view.cells.size(); ++cell) {
                if (net.layers[view.cells[cell].layer].types.size() < 2) continue;
                ++multi;
                first += w.context[cell] == 0.0;
            }
        }
        std::vector<std::string> row{mv(c), std::to_string(net.cellCount())};
        for (const auto& layer : net.layers) row.push_back(std::to_string(layer.size));
        row.push_back(mv(multi ? static_cast<double>(first) / multi : 0.0));
        comp.addRow(std::move(row));
    }

    Arm arm(o.net);
    const auto& clampCells = arm.view.cellsOf(o.clampLayer, arm.net);
    const auto& readout = arm.view.cellsOf(o.readoutLayer, arm.net);
    std::vector<Regime> regimes{Regime("observational", {})};
    for (double v : o.clamps) {
        std::vector<Intervention> iv;
        for (NodeId cell : clampCells) iv.push_back(VNode{cell, v});
        regimes.emplace_back("do(" + o.clampLayer + "=" + mv(v) + ")", std::move(iv));
    }
    std::vector<Vec> steady(o.seeds.size() * regimes.size());
    parallelFor(steady.size(), o.threads, [&](std::size_t job) {
        LayeredRun run = arm.run(o.seeds[job / regimes.size()], regimes[job % regimes.size()]);
        for (NodeId cell : readout) steady[job].push_back(trailingMean(run.traces[cell].samples, o.window));
    });

    Table curve{"transfer", {"clamp", "meanDeltaV", "sdDeltaV", "cells"}, {}, true};
    Vec means;
    for (std::size_t r = 1; r < regimes.size(); ++r) {
        Vec d;
        for (std::size_t s = 0; s < o.seeds.size(); ++s) {
            const Vec& obs = steady[s * regimes.size()];
            const Vec& in = steady[s * regimes.size() + r];
            for (std::size_t k = 0; k < in.size(); ++k) d.push_back(in[k] - obs[k]);
        }
        means.push_back(mean(d));
        curve.addRow({mv(o.clamps[r - 1]), mv(means.back()), mv(sampleSd(d)), std::to_string(d.size())});
    }

    Vec sorted = o.clamps;
    bool increasing = std::is_sorted(sorted.begin(), sorted.end());
    bool monotone = increasing;
    for (std::size_t k = 1; k < means.size() && monotone; ++k) monotone = means[k] >= means[k - 1];

    const Projection* proj = nullptr;
    for (const auto& p : o.net.projections)
        if (p.pre == o.clampLayer && p.post == o.readoutLayer) proj = &p;
    if (!proj || proj->synapse.empty()) throw ConfigError("no projection from clamp layer to readout layer");
    const double vThr = proj->synapse.begin()->second.vThr;
    SigmoidFit fit = fitSigmoid(o.clamps, means);
    Table fitTable{"sigmoid", {"vThr", "midpoint", "slope", "lower", "amplitude", "sse"}, {}};
    fitTable.addRow({mv(vThr), mv(fit.midpoint), mv(fit.slope), mv(fit.lower), mv(fit.amplitude), mv(fit.sse)});

    rep.tables = {comp, curve, fitTable};
    rep.checks.push_back({"transfer curve nondecreasing", monotone,
                          increasing ? std::to_string(means.size()) + " clamp levels" : "clamp grid not sorted"});
    rep.checks.push_back({"sigmoid midpoint near synaptic threshold",
                          std::abs(fit.midpoint - vThr) <= o.midpointTolerance,
                          "midpoint " + mv(fit.midpoint) + " vThr " + mv(vThr)});
    return rep;
}

}  // namespace poscm
