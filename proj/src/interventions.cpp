#include "poscm/interventions.hpp"

#include <algorithm>
#include <set>

#include "poscm/error.hpp"
#include "poscm/parallel.hpp"

namespace poscm {

SupervisingMeasure supervisingMeasure(const PoscmSpec& spec, const Regime& regime, NodeId source, std::size_t n,
                                      std::uint64_t seed, unsigned threads) {
    if (n == 0) throw InvalidArgument("supervising measure needs n >= 1");
    if (source >= spec.n) throw InvalidArgument("supervising measure source out of range");
    auto regimePtr = std::make_shared<const Regime>(regime);
    SupervisingMeasure mu;
    mu.source = source;
    mu.targets = spec.laterNodes(source);
    if (mu.targets.size() > 63) throw InvalidArgument("supervising measure supports at most 63 targets");
    std::vector<std::uint64_t> rows(n);
    parallelFor(n, threads, [&](std::size_t k) {
        auto draw = std::make_shared<const ExogenousDraw>(ExogenousDraw::sample(spec, seed, k));
        World w = generateStructure(spec, draw, regimePtr);
        std::uint64_t bits = 0;
        for (std::size_t t = 0; t < mu.targets.size(); ++t)
            if (w.edge(source, mu.targets[t])) bits |= std::uint64_t{1} << t;
        rows[k] = bits;
    });
    std::map<std::int64_t, std::size_t> counts;
    mu.edgeCounts.assign(mu.targets.size(), 0);
    for (auto bits : rows) {
        ++counts[static_cast<std::int64_t>(bits)];
        for (std::size_t t = 0; t < mu.targets.size(); ++t)
            if (bits >> t & 1) ++mu.edgeCounts[t];
    }
    mu.law = EmpiricalLaw::fromCounts(std::move(counts));
    mu.n = n;
    for (auto c : mu.edgeCounts) mu.marginals.push_back(static_cast<double>(c) / static_cast<double>(n));
    return mu;
}

IiscResult iiscDetect(const SupervisingMeasure& base, const SupervisingMeasure& intervened, double alpha) {
    if (base.source != intervened.source || base.targets != intervened.targets)
        throw InvalidArgument("supervising measures cover different dyads");
    if (base.n < 30 || intervened.n < 30) throw StatisticsError("IISC detection needs at least 30 samples per arm");
    IiscResult r;
    const std::size_t D = base.targets.size();
    std::set<std::int64_t> support;
    for (auto& [l, c] : base.law.counts()) support.insert(l);
    for (auto& [l, c] : intervened.law.counts()) support.insert(l);
    r.jointTested = D > 1 && support.size() <= 32;
    const std::size_t tests = D + (r.jointTested ? 1 : 0);
    double pMin = 1.0;
    for (std::size_t t = 0; t < D; ++t) {
        auto res = binomialTest(base.edgeCounts[t], base.n, intervened.edgeCounts[t], intervened.n);
        r.dyadP.push_back(res.pValue);
        r.statistic = std::max(r.statistic, res.statistic);
        pMin = std::min(pMin, res.pValue);
    }
    if (r.jointTested) {
        r.jointP = chiSquareTest(base.law, intervened.law).pValue;
        pMin = std::min(pMin, r.jointP);
    }
    r.pValue = tests ? bonferroni(pMin, tests) : 1.0;
    r.changed = r.pValue < alpha;
    return r;
}

}  // namespace poscm
