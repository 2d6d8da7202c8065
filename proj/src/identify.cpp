#include "poscm/identify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "poscm/error.hpp"
#include "poscm/parallel.hpp"
#include "poscm/rng.hpp"

namespace poscm {

namespace {

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

EmpiricalLaw lawFor(const Domain& d, std::vector<double> xs) {
    return d.isFinite() ? EmpiricalLaw::labels(xs) : EmpiricalLaw::scalar(std::move(xs));
}

Regime clampRegime(const Assignment& a, std::string label = {}) {
    Regime r(std::move(label));
    for (auto [node, v] : a) r.add(VNode{node, v});
    return r;
}

std::vector<Assignment> assignmentsFor(const PoscmSpec& spec, const ProbeProtocol& protocol,
                                       const std::vector<NodeId>& others) {
    std::vector<Assignment> out;
    if (!protocol.coClampAssignments.empty()) {
        for (const auto& a : protocol.coClampAssignments) {
            Assignment r;
            for (auto [node, v] : a)
                if (std::find(others.begin(), others.end(), node) != others.end()) r.push_back({node, v});
            out.push_back(std::move(r));
        }
        return out;
    }
    std::vector<Vec> grids;
    std::size_t total = 1;
    for (NodeId o : others) {
        grids.push_back(protocol.gridFor(spec, o));
        total *= grids.back().size();
        if (total > (std::size_t{1} << 40)) break;
    }
    std::size_t count = std::min(total, protocol.maxAssignments);
    for (std::size_t c = 0; c < count; ++c) {
        std::size_t idx = count == total ? c : c * total / count;
        Assignment a;
        for (std::size_t k = 0; k < others.size(); ++k) {
            a.push_back({others[k], grids[k][idx % grids[k].size()]});
            idx /= grids[k].size();
        }
        out.push_back(std::move(a));
    }
    return out;
}

struct DyadPlan {
    NodeId source = 0, target = 0;
    Vec grid;
    std::vector<Assignment> assignments;
    std::vector<std::vector<Regime>> regimes;
    std::size_t tests() const { return assignments.size() * (grid.size() - 1); }
};

DyadPlan planDyad(const PoscmSpec& spec, const ProbeProtocol& protocol, NodeId j, NodeId i) {
    auto others = spec.potentialParents(i);
    others.erase(std::find(others.begin(), others.end(), j));
    DyadPlan plan{j, i, protocol.gridFor(spec, j), assignmentsFor(spec, protocol, others), {}};
    for (const auto& a : plan.assignments) {
        auto& row = plan.regimes.emplace_back();
        for (double v : plan.grid) {
            Assignment full = a;
            full.push_back({j, v});
            row.push_back(clampRegime(full));
        }
    }
    return plan;
}

// Calls visit(p) for each raw p-value of the dyad until it returns false.
template <class Visit>
void walkDyad(const InstanceHandle& unit, const ProbeProtocol& protocol, const DyadPlan& plan, std::uint64_t seed,
              Visit&& visit) {
    const NodeId i = plan.target, j = plan.source;
    const Domain& dom = unit.spec().valueDomain[i];
    for (std::size_t a = 0; a < plan.assignments.size(); ++a) {
        std::vector<EmpiricalLaw> laws;
        for (std::size_t g = 0; g < plan.grid.size(); ++g) {
            const Regime& r = plan.regimes[a][g];
            std::vector<double> xs(protocol.probesPerSetting);
            for (std::size_t k = 0; k < xs.size(); ++k)
                xs[k] = unit.probeNode(i, r, rng::hashKey({seed, i, j, a, g, k}));
            laws.push_back(lawFor(dom, std::move(xs)));
        }
        for (std::size_t g = 1; g < laws.size(); ++g)
            if (!visit(twoSampleTest(laws[0], laws[g]).pValue)) return;
    }
}

std::vector<DyadPlan> incomingPlans(const PoscmSpec& spec, const ProbeProtocol& protocol, NodeId target) {
    std::vector<DyadPlan> plans;
    for (NodeId j : spec.potentialParents(target)) plans.push_back(planDyad(spec, protocol, j, target));
    return plans;
}

StructureReadout probeDyads(const InstanceHandle& unit, const ProbeProtocol& protocol,
                            const std::vector<std::pair<NodeId, NodeId>>& dyads, std::uint64_t seed) {
    const PoscmSpec& spec = unit.spec();
    protocol.validate(spec);
    StructureReadout out;
    out.n = spec.n;
    out.adjacency.assign(spec.n * spec.n, 0);
    std::vector<std::vector<double>> rawP(dyads.size());
    for (std::size_t d = 0; d < dyads.size(); ++d) {
        DyadPlan plan = planDyad(spec, protocol, dyads[d].first, dyads[d].second);
        walkDyad(unit, protocol, plan, seed, [&](double p) {
            rawP[d].push_back(p);
            return true;
        });
        out.tests += rawP[d].size();
    }
    for (std::size_t d = 0; d < dyads.size(); ++d) {
        DyadReadout dr;
        dr.source = dyads[d].first;
        dr.target = dyads[d].second;
        dr.tests = rawP[d].size();
        for (double p : rawP[d]) dr.minP = std::min(dr.minP, p);
        dr.correctedP = bonferroni(dr.minP, out.tests);
        dr.present = dr.correctedP < protocol.testAlpha;
        dr.inconclusive = !dr.present && dr.minP < protocol.testAlpha;
        if (dr.present) out.adjacency[dr.source * spec.n + dr.target] = 1;
        out.dyads.push_back(dr);
    }
    return out;
}

// Same decision as probeIncoming(...).parents(target) == parents, stopping at
// the first dyad whose decision is settled against it.
bool incomingParentsAre(const InstanceHandle& unit, const ProbeProtocol& protocol,
                        const std::vector<DyadPlan>& plans, const std::vector<NodeId>& parents, std::uint64_t seed) {
    std::size_t total = 0;
    for (const auto& plan : plans) total += plan.tests();
    for (const auto& plan : plans) {
        bool want = std::find(parents.begin(), parents.end(), plan.source) != parents.end();
        bool present = false;
        walkDyad(unit, protocol, plan, seed, [&](double p) {
            present = bonferroni(p, total) < protocol.testAlpha;
            return !present;
        });
        if (present != want) return false;
    }
    return true;
}

std::vector<NodeId> sortedCopy(std::vector<NodeId> v) {
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

Vec ProbeProtocol::gridFor(const PoscmSpec& spec, NodeId node) const {
    if (node < valueGrid.size() && !valueGrid[node].empty()) return valueGrid[node];
    const Domain& d = spec.valueDomain.at(node);
    if (d.isFinite()) {
        Vec g;
        for (std::size_t k = 0; k < d.size(); ++k) g.push_back(static_cast<double>(k));
        return g;
    }
    return {d.lo() + 0.25 * (d.hi() - d.lo()), d.lo() + 0.75 * (d.hi() - d.lo())};
}

void ProbeProtocol::validate(const PoscmSpec& spec) const {
    if (probesPerSetting < 30) throw InvalidArgument("probe protocol needs at least 30 probes per setting");
    if (!(testAlpha > 0.0 && testAlpha < 1.0)) throw InvalidArgument("probe protocol alpha must lie in (0, 1)");
    if (valueGrid.size() > spec.n) throw InvalidArgument("probe protocol has grids for unknown nodes");
    for (NodeId i = 0; i < spec.n; ++i) {
        Vec g = gridFor(spec, i);
        if (g.size() < 2) throw InvalidArgument("probe grid of " + spec.nodeName(i) + " needs at least two values");
        for (double v : g)
            if (!spec.valueDomain[i].contains(v))
                throw DomainError("probe grid value " + fmt(v) + " outside the domain of " + spec.nodeName(i));
    }
}

std::vector<NodeId> StructureReadout::parents(NodeId target) const {
    std::vector<NodeId> out;
    for (NodeId j = 0; j < n; ++j)
        if (adjacency[j * n + target]) out.push_back(j);
    return out;
}

StructureReadout probeStructure(const InstanceHandle& unit, const ProbeProtocol& protocol, std::uint64_t seed) {
    const PoscmSpec& spec = unit.spec();
    std::vector<std::pair<NodeId, NodeId>> dyads;
    for (NodeId i : spec.order())
        for (NodeId j : spec.potentialParents(i)) dyads.push_back({j, i});
    return probeDyads(unit, protocol, dyads, seed);
}

StructureReadout probeIncoming(const InstanceHandle& unit, const ProbeProtocol& protocol, NodeId target,
                               std::uint64_t seed) {
    std::vector<std::pair<NodeId, NodeId>> dyads;
    for (NodeId j : unit.spec().potentialParents(target)) dyads.push_back({j, target});
    return probeDyads(unit, protocol, dyads, seed);
}

StructureReadout probeOutgoing(const InstanceHandle& unit, const ProbeProtocol& protocol, NodeId source,
                               std::uint64_t seed) {
    std::vector<std::pair<NodeId, NodeId>> dyads;
    for (NodeId i : unit.spec().laterNodes(source)) dyads.push_back({source, i});
    return probeDyads(unit, protocol, dyads, seed);
}

InstanceHandle UnitSampler::unit(std::uint64_t cell, std::uint64_t k, const Regime& phaseOne) const {
    return freezeInstance(spec, rng::hashKey({seed, cell}), k, phaseOne);
}

KernelEstimate estimateStructureKernel(const UnitSampler& sampler, NodeId j, const Vec& betaGrid, std::size_t nPer,
                                       const ProbeProtocol& protocol) {
    const PoscmSpec& spec = *sampler.spec;
    if (betaGrid.empty()) throw InvalidArgument("structure kernel needs a non-empty context grid");
    if (nPer == 0) throw InvalidArgument("kernel estimation needs nPer >= 1");
    KernelEstimate est;
    est.target = KernelEstimate::Target::Alpha;
    est.node = j;
    est.nPer = nPer;
    est.rowTargets = spec.laterNodes(j);
    if (est.rowTargets.size() > 63) throw InvalidArgument("structure kernel supports at most 63 targets");
    for (std::size_t c = 0; c < betaGrid.size(); ++c) {
        double b = betaGrid[c];
        Regime phaseOne("do(beta)", {BetaNode{j, b}});
        phaseOne.validate(spec);
        std::vector<std::uint64_t> rows(nPer);
        parallelFor(nPer, sampler.threads, [&](std::size_t k) {
            InstanceHandle unit = sampler.unit(c, k, phaseOne);
            StructureReadout r = probeOutgoing(unit, protocol, j, rng::hashKey({sampler.seed, 0xa1, c, k}));
            std::uint64_t bits = 0;
            for (std::size_t t = 0; t < est.rowTargets.size(); ++t)
                if (r.edge(j, est.rowTargets[t])) bits |= std::uint64_t{1} << t;
            rows[k] = bits;
        });
        std::map<std::int64_t, std::size_t> counts;
        std::vector<std::size_t> marg(est.rowTargets.size(), 0);
        for (auto bits : rows) {
            ++counts[static_cast<std::int64_t>(bits)];
            for (std::size_t t = 0; t < marg.size(); ++t) marg[t] += bits >> t & 1;
        }
        for (std::size_t t = 0; t < marg.size(); ++t)
            if (marg[t] == 0 || marg[t] == nPer)
                est.flags.push_back("positivity: edge " + spec.nodeName(j) + "->" + spec.nodeName(est.rowTargets[t]) +
                                    " has empirical frequency " + (marg[t] ? "1" : "0") + " at beta=" + fmt(b));
        est.grid.push_back(Vec{b});
        est.laws.push_back(EmpiricalLaw::fromCounts(std::move(counts)));
        est.unitsExamined.push_back(nPer);
        est.conditioningFrequency.push_back(1.0);
    }
    return est;
}

namespace {

// Examines units k = 0, 1, ... of a cell in index order, in parallel batches,
// and keeps those accepted by `inspect` until `want` are found.
template <class Result, class Inspect>
std::vector<Result> collectAccepted(std::size_t want, std::size_t maxUnits, unsigned threads, Inspect&& inspect,
                                    std::size_t& examined) {
    std::vector<Result> accepted;
    examined = 0;
    while (accepted.size() < want && examined < maxUnits) {
        std::size_t batch = std::min(maxUnits - examined, std::max<std::size_t>(64, 2 * (want - accepted.size())));
        std::vector<std::optional<Result>> slot(batch);
        std::size_t base = examined;
        parallelFor(batch, threads, [&](std::size_t k) { slot[k] = inspect(base + k); });
        for (std::size_t k = 0; k < batch && accepted.size() < want; ++k) {
            ++examined;
            if (slot[k]) accepted.push_back(std::move(*slot[k]));
        }
    }
    return accepted;
}

}  // namespace

KernelEstimate estimateContextKernel(const UnitSampler& sampler, NodeId i, const std::vector<NodeId>& S,
                                     const std::vector<Vec>& betaSGrid, std::size_t nPer, const ProbeProtocol& protocol,
                                     std::size_t maxUnitsPerCell) {
    const PoscmSpec& spec = *sampler.spec;
    if (nPer == 0) throw InvalidArgument("kernel estimation needs nPer >= 1");
    for (NodeId s : S)
        if (!spec.precedes(s, i)) throw InvalidArgument("context kernel parent set must precede the target");
    if (maxUnitsPerCell == 0) maxUnitsPerCell = 50 * nPer;
    std::vector<Vec> grid = betaSGrid.empty() ? std::vector<Vec>{Vec{}} : betaSGrid;
    const auto wantParents = sortedCopy(S);
    protocol.validate(spec);
    const auto plans = incomingPlans(spec, protocol, i);
    KernelEstimate est;
    est.target = KernelEstimate::Target::Context;
    est.node = i;
    est.S = S;
    est.nPer = nPer;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        if (grid[c].size() != S.size()) throw InvalidArgument("context grid point does not match the parent set");
        Regime phaseOne("do(beta_S)");
        for (std::size_t k = 0; k < S.size(); ++k) phaseOne.add(BetaNode{S[k], grid[c][k]});
        phaseOne.validate(spec);
        std::size_t examined = 0;
        auto contexts = collectAccepted<double>(
            nPer, maxUnitsPerCell, sampler.threads,
            [&](std::size_t k) -> std::optional<double> {
                InstanceHandle unit = sampler.unit(0x100 + c, k, phaseOne);
                if (!incomingParentsAre(unit, protocol, plans, wantParents, rng::hashKey({sampler.seed, 0xb2, c, k})))
                    return std::nullopt;
                return unit.readContext(i);
            },
            examined);
        if (contexts.empty())
            throw IdentificationError("empty conditioning cell: no unit had parent set S for " + spec.nodeName(i));
        if (contexts.size() < nPer)
            est.flags.push_back("cell " + std::to_string(c) + " collected " + std::to_string(contexts.size()) + " of " +
                                std::to_string(nPer) + " units");
        est.grid.push_back(grid[c]);
        est.laws.push_back(lawFor(spec.contextDomain[i], std::move(contexts)));
        est.unitsExamined.push_back(examined);
        est.conditioningFrequency.push_back(static_cast<double>(est.laws.back().n()) / static_cast<double>(examined));
    }
    return est;
}

KernelEstimate estimateValueKernel(const UnitSampler& sampler, NodeId i, const std::vector<NodeId>& S,
                                   const std::vector<Vec>& vSGrid, std::optional<double> betaCondition,
                                   std::size_t nPer, const ProbeProtocol& protocol, std::size_t maxUnits) {
    const PoscmSpec& spec = *sampler.spec;
    if (nPer == 0) throw InvalidArgument("kernel estimation needs nPer >= 1");
    for (NodeId s : S)
        if (!spec.precedes(s, i)) throw InvalidArgument("value kernel parent set must precede the target");
    if (betaCondition && !spec.contextDomain[i].contains(*betaCondition))
        throw DomainError("context condition outside the domain of " + spec.nodeName(i));
    if (maxUnits == 0) maxUnits = 50 * nPer;
    std::vector<Vec> grid = vSGrid.empty() ? std::vector<Vec>{Vec{}} : vSGrid;
    std::vector<Regime> cells;
    for (const auto& g : grid) {
        if (g.size() != S.size()) throw InvalidArgument("value grid point does not match the parent set");
        Assignment a;
        for (std::size_t k = 0; k < S.size(); ++k) a.push_back({S[k], g[k]});
        cells.push_back(clampRegime(a, "do(V_S)"));
        cells.back().validate(spec);
    }
    const auto wantParents = sortedCopy(S);
    protocol.validate(spec);
    const auto plans = incomingPlans(spec, protocol, i);
    std::size_t examined = 0;
    auto samples = collectAccepted<Vec>(
        nPer, maxUnits, sampler.threads,
        [&](std::size_t k) -> std::optional<Vec> {
            InstanceHandle unit = sampler.unit(0x200, k);
            if (betaCondition && unit.readContext(i) != *betaCondition) return std::nullopt;
            if (!incomingParentsAre(unit, protocol, plans, wantParents, rng::hashKey({sampler.seed, 0xc3, k})))
                return std::nullopt;
            Vec out(cells.size());
            for (std::size_t c = 0; c < cells.size(); ++c)
                out[c] = unit.probeNode(i, cells[c], rng::hashKey({sampler.seed, 0xc4, k, c}));
            return out;
        },
        examined);
    if (samples.empty())
        throw IdentificationError("empty conditioning cell: no unit matched parent set and context for " +
                                  spec.nodeName(i));
    KernelEstimate est;
    est.target = KernelEstimate::Target::Value;
    est.node = i;
    est.S = S;
    est.nPer = nPer;
    if (samples.size() < nPer)
        est.flags.push_back("collected " + std::to_string(samples.size()) + " of " + std::to_string(nPer) + " units");
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::vector<double> xs;
        xs.reserve(samples.size());
        for (const auto& s : samples) xs.push_back(s[c]);
        est.grid.push_back(grid[c]);
        est.laws.push_back(lawFor(spec.valueDomain[i], std::move(xs)));
        est.unitsExamined.push_back(examined);
        est.conditioningFrequency.push_back(static_cast<double>(samples.size()) / static_cast<double>(examined));
    }
    return est;
}

namespace {

double lawDistance(const EmpiricalLaw& a, const EmpiricalLaw& b) {
    return a.isScalar() ? ksTest(a, b).statistic : totalVariation(a, b);
}

// 95% null quantile of the matching distance between two samples of size n.
double nullQuantile(const EmpiricalLaw& reference, std::size_t n, std::uint64_t seed) {
    if (reference.isScalar()) return 1.358 * std::sqrt(2.0 / static_cast<double>(n));
    std::vector<std::pair<std::int64_t, double>> cdf;
    double acc = 0.0;
    for (auto [l, c] : reference.counts()) {
        acc += static_cast<double>(c) / static_cast<double>(reference.n());
        cdf.push_back({l, acc});
    }
    rng::KeyedStream s(rng::hashKey({seed, 0x9a11}));
    auto draw = [&] {
        std::vector<double> xs(n);
        for (auto& x : xs) {
            double u = s.uniform();
            auto it = std::find_if(cdf.begin(), cdf.end(), [u](auto& e) { return u <= e.second; });
            x = static_cast<double>(it == cdf.end() ? cdf.back().first : it->first);
        }
        return EmpiricalLaw::labels(xs);
    };
    Vec d;
    for (int b = 0; b < 200; ++b) d.push_back(totalVariation(draw(), draw()));
    std::sort(d.begin(), d.end());
    return d[189];
}

}  // namespace

std::vector<MessageMatch> identifyMessageRouteAB(const InstanceHandle& unit, NodeId i, NodeId j, const Vec& vGrid,
                                                 const std::vector<Vec>& clampGrid, std::size_t nPer,
                                                 const Assignment& otherClamps, std::uint64_t seed) {
    const PoscmSpec& spec = unit.spec();
    if (!spec.precedes(j, i)) throw InvalidArgument("message route needs j before i");
    if (!spec.valueMessageForm[i]) throw InvalidArgument("message route needs a message-form target");
    if (vGrid.empty() || clampGrid.empty()) throw InvalidArgument("message route needs non-empty grids");
    if (nPer < 30) throw InvalidArgument("message route needs nPer >= 30");
    const Domain& dom = spec.valueDomain[i];
    auto sampleLaw = [&](const Regime& r, std::uint64_t tag, std::size_t idx) {
        std::vector<double> xs(nPer);
        for (std::size_t k = 0; k < nPer; ++k) xs[k] = unit.probeNode(i, r, rng::hashKey({seed, tag, idx, k}));
        return lawFor(dom, std::move(xs));
    };
    std::vector<EmpiricalLaw> clampLaws;
    for (std::size_t c = 0; c < clampGrid.size(); ++c) {
        Regime r = clampRegime(otherClamps, "clamp");
        r.add(VEdge{j, i, EdgeReplacement::clamp(clampGrid[c])});
        r.validate(spec);
        clampLaws.push_back(sampleLaw(r, 1, c));
    }
    std::vector<MessageMatch> out;
    for (std::size_t g = 0; g < vGrid.size(); ++g) {
        Regime r = clampRegime(otherClamps, "baseline");
        r.add(VNode{j, vGrid[g]});
        r.validate(spec);
        EmpiricalLaw base = sampleLaw(r, 0, g);
        Vec dist;
        for (const auto& law : clampLaws) dist.push_back(lawDistance(base, law));
        std::size_t best = static_cast<std::size_t>(std::min_element(dist.begin(), dist.end()) - dist.begin());
        MessageMatch m;
        m.v = vGrid[g];
        m.clampIndex = best;
        m.estimate = clampGrid[best];
        m.distance = dist[best];
        m.tolerance = 1.5 * nullQuantile(base, nPer, rng::hashKey({seed, g}));
        std::size_t lo = best, hi = best;
        while (lo > 0 && dist[lo - 1] <= dist[best] + m.tolerance) --lo;
        while (hi + 1 < dist.size() && dist[hi + 1] <= dist[best] + m.tolerance) ++hi;
        for (std::size_t c = 0; c < dist.size(); ++c)
            if ((c < lo || c > hi) && dist[c] <= dist[best] + m.tolerance) m.ambiguous = true;
        m.residualP = twoSampleTest(base, clampLaws[best]).pValue;
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<ReplayMatch> identifyMessageRouteC(const PoscmSpec& spec, const std::vector<ExogenousDraw>& blocks,
                                               NodeId i, NodeId j, const Vec& clampGrid, double tolerance) {
    if (!spec.precedes(j, i)) throw InvalidArgument("message route needs j before i");
    if (!spec.valueMessageForm[i]) throw InvalidArgument("message route needs a message-form target");
    if (clampGrid.size() < 2 || !std::is_sorted(clampGrid.begin(), clampGrid.end()))
        throw InvalidArgument("route C needs an increasing clamp grid with at least two points");
    std::vector<ReplayMatch> out;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        auto draw = std::make_shared<const ExogenousDraw>(blocks[b]);
        World base = generate(spec, draw, std::make_shared<const Regime>());
        ReplayMatch rm;
        rm.block = b;
        rm.vj = base.value[j];
        if (!base.edge(j, i)) {
            out.push_back(rm);
            continue;
        }
        if (base.mechanism[i].messages->dim != 1) throw InvalidArgument("route C supports scalar messages only");
        const double target = base.value[i];
        auto response = [&](double m) {
            World w = base;
            generateValues(spec, w, *draw, Regime("clamp", {VEdge{j, i, EdgeReplacement::clamp(Vec{m})}}));
            return w.value[i] - target;
        };
        Vec r;
        for (double m : clampGrid) r.push_back(response(m));
        std::vector<std::size_t> exact;
        std::vector<std::size_t> brackets;
        for (std::size_t k = 0; k < r.size(); ++k)
            if (std::abs(r[k]) <= tolerance) exact.push_back(k);
        for (std::size_t k = 0; k + 1 < r.size(); ++k)
            if (std::abs(r[k]) > tolerance && std::abs(r[k + 1]) > tolerance && (r[k] < 0) != (r[k + 1] < 0))
                brackets.push_back(k);
        std::size_t runs = 0;
        for (std::size_t e = 0; e < exact.size(); ++e)
            if (e == 0 || exact[e] != exact[e - 1] + 1) ++runs;
        std::size_t candidates = runs + brackets.size();
        if (candidates == 0) {
            rm.status = ReplayMatch::Status::NoMatch;
        } else if (candidates > 1) {
            rm.status = ReplayMatch::Status::MultipleMatches;
        } else if (!exact.empty()) {
            std::size_t k = exact[0];
            for (auto e : exact)
                if (std::abs(r[e]) < std::abs(r[k])) k = e;
            rm.estimate = {clampGrid[k]};
            rm.residual = std::abs(r[k]);
            rm.status = ReplayMatch::Status::Matched;
        } else {
            double lo = clampGrid[brackets[0]], hi = clampGrid[brackets[0] + 1];
            double rlo = r[brackets[0]];
            double mid = 0.5 * (lo + hi), rmid = response(mid);
            for (int it = 0; it < 200 && std::abs(rmid) > 1e-13 * (1.0 + std::abs(target)) && hi - lo > 1e-15; ++it) {
                if ((rmid < 0) == (rlo < 0)) {
                    lo = mid;
                    rlo = rmid;
                } else {
                    hi = mid;
                }
                mid = 0.5 * (lo + hi);
                rmid = response(mid);
            }
            rm.estimate = {mid};
            rm.residual = std::abs(rmid);
            rm.status = rm.residual <= tolerance ? ReplayMatch::Status::Matched : ReplayMatch::Status::NoMatch;
        }
        out.push_back(std::move(rm));
    }
    return out;
}

std::vector<Regime> valueNodeFamily(const PoscmSpec& spec, const ProbeProtocol& protocol) {
    std::vector<Regime> out{Regime("observational")};
    for (NodeId i = 0; i < spec.n; ++i)
        for (double v : protocol.gridFor(spec, i))
            out.emplace_back("do(" + spec.nodeName(i) + "=" + spec.valueDomain[i].format(v) + ")",
                             std::vector<Intervention>{VNode{i, v}});
    return out;
}

EquivalenceVerdict checkEquivalence(const PoscmSpec& a, const PoscmSpec& b, const std::vector<Regime>& family,
                                    const MeasurementModel& om, const EquivalenceOptions& options) {
    if (a.n != b.n) throw InvalidArgument("equivalence check needs specs of equal size");
    if (family.empty()) throw InvalidArgument("equivalence check needs at least one regime");
    om.validate();
    for (const auto& r : family) {
        r.validate(a);
        r.validate(b);
    }
    const std::size_t n = a.n;
    EquivalenceVerdict verdict;
    for (std::size_t ri = 0; ri < family.size(); ++ri) {
        const Regime& r = family[ri];
        auto sa = sampleWorlds(a, r, om, rng::hashKey({options.seedA, ri}), options.nPer, options.threads);
        auto sb = sampleWorlds(b, r, om, rng::hashKey({options.seedB, ri}), options.nPer, options.threads);
        auto add = [&](std::string channel, const Domain* dom, auto extract) {
            std::vector<double> xa, xb;
            xa.reserve(sa.size());
            xb.reserve(sb.size());
            for (auto& s : sa) xa.push_back(extract(s.observation));
            for (auto& s : sb) xb.push_back(extract(s.observation));
            bool finite = !dom || dom->isFinite();
            EmpiricalLaw la = finite ? EmpiricalLaw::labels(xa) : EmpiricalLaw::scalar(std::move(xa));
            EmpiricalLaw lb = finite ? EmpiricalLaw::labels(xb) : EmpiricalLaw::scalar(std::move(xb));
            verdict.tests.push_back({r.label(), std::move(channel), twoSampleTest(la, lb), 1.0});
        };
        if (om.includes(Symbol::Value)) {
            for (NodeId i = 0; i < n; ++i)
                add("V[" + a.nodeName(i) + "]", &a.valueDomain[i], [i](const Observation& o) { return (*o.value)[i]; });
            bool allFinite = std::all_of(a.valueDomain.begin(), a.valueDomain.end(), [](auto& d) { return d.isFinite(); });
            double atoms = 1.0;
            for (auto& d : a.valueDomain) atoms *= static_cast<double>(d.size());
            if (options.jointFinite && n > 1 && allFinite && atoms <= 4096.0) {
                add("V[joint]", nullptr, [&a, n](const Observation& o) {
                    double code = 0.0;
                    for (NodeId i = 0; i < n; ++i)
                        code = code * static_cast<double>(a.valueDomain[i].size()) + std::round((*o.value)[i]);
                    return code;
                });
            }
        }
        if (om.includes(Symbol::Context))
            for (NodeId i = 0; i < n; ++i)
                add("beta[" + a.nodeName(i) + "]", &a.contextDomain[i],
                    [i](const Observation& o) { return (*o.context)[i]; });
        if (om.includes(Symbol::Adjacency))
            for (NodeId i = 0; i < n; ++i)
                for (NodeId j = 0; j < n; ++j)
                    if (a.precedes(j, i))
                        add("A[" + a.nodeName(j) + "->" + a.nodeName(i) + "]", nullptr,
                            [j, i, n](const Observation& o) { return static_cast<double>((*o.adjacency)[j * n + i]); });
    }
    for (auto& t : verdict.tests) {
        t.correctedP = bonferroni(t.result.pValue, verdict.tests.size());
        verdict.minCorrectedP = std::min(verdict.minCorrectedP, t.correctedP);
        if (t.correctedP < options.alpha && !verdict.distinguished) {
            verdict.distinguished = true;
            verdict.regime = t.regime;
            verdict.channel = t.channel;
        }
    }
    return verdict;
}

PoscmSpec reparameterizeContext(const PoscmSpec& spec, std::function<double(double)> gamma,
                                std::function<double(double)> gammaInv) {
    if (!gamma || !gammaInv) throw InvalidArgument("reparameterization needs gamma and its inverse");
    for (NodeId i = 0; i < spec.n; ++i) {
        const Domain& d = spec.contextDomain[i];
        Vec pts;
        if (d.isFinite()) {
            for (std::size_t k = 0; k < d.size(); ++k) pts.push_back(static_cast<double>(k));
        } else {
            for (int k = 0; k <= 100; ++k) pts.push_back(d.lo() + (d.hi() - d.lo()) * k / 100.0);
        }
        for (double x : pts) {
            double y = gamma(x);
            if (!d.contains(y))
                throw DomainError("gamma maps context " + fmt(x) + " of " + spec.nodeName(i) + " outside its domain");
            if (std::abs(gammaInv(y) - x) > 1e-9 * (1.0 + std::abs(x)))
                throw DomainError("gammaInv does not invert gamma at " + fmt(x));
        }
    }
    PoscmSpec out = spec;
    if (spec.edgeProb) {
        auto inner = spec.edgeProb;
        out.edgeProb = [inner, gammaInv](NodeId j, NodeId i, double b) { return inner(j, i, gammaInv(b)); };
    }
    if (spec.rowSampler) {
        auto inner = spec.rowSampler;
        out.rowSampler = [inner, gammaInv](NodeId s, double b, std::span<const NodeId> t, std::span<const double> u) {
            return inner(s, gammaInv(b), t, u);
        };
    }
    for (NodeId i = 0; i < spec.n; ++i) {
        if (auto inner = spec.phi[i].sample) {
            out.phi[i].sample = [inner, gamma, gammaInv](const ParentValues& pc, std::span<const double> u) {
                Vec back(pc.values.begin(), pc.values.end());
                for (auto& x : back) x = gammaInv(x);
                return gamma(inner(ParentValues{pc.ids, back}, u));
            };
        }
        if (auto inner = spec.phi[i].messages) {
            auto mf = std::make_shared<MessageForm>();
            mf->dim = inner->dim;
            mf->message = [inner, gammaInv](NodeId s, double x) { return inner->message(s, gammaInv(x)); };
            mf->aggregate = [inner, gamma](const MessageMatrix& m, std::span<const double> u) {
                return gamma(inner->aggregate(m, u));
            };
            out.phi[i].messages = mf;
        }
        auto g = spec.gamma[i];
        out.gamma[i] = [g, gammaInv](double b, std::span<const NodeId> parents, std::span<const double> u) {
            return g(gammaInv(b), parents, u);
        };
    }
    out.finalize();
    return out;
}

ConfoundingPair calibratedConfoundingPair(double p, double q0, double q1, double pPrime) {
    if (!(pPrime > 0.0 && pPrime <= 1.0)) throw InvalidArgument("p' must lie in (0, 1]");
    auto solve = [&](double q) { return ((1.0 - p) / 2.0 + p * q - (1.0 - pPrime) / 2.0) / pPrime; };
    ConfoundingPair pair;
    pair.q0Prime = solve(q0);
    pair.q1Prime = solve(q1);
    const double eps = 1e-12;
    for (double q : {pair.q0Prime, pair.q1Prime})
        if (!(q > eps && q < 1.0 - eps))
            throw InvalidArgument("calibrated q' = " + fmt(q) + " falls outside (0, 1)");
    pair.m = twoNodeConfounding(p, q0, q1);
    pair.mPrime = twoNodeConfounding(pPrime, pair.q0Prime, pair.q1Prime);
    return pair;
}

}  // namespace poscm
