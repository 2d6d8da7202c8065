#pragma once

#include <cstdint>
#include <vector>

#include "poscm/core.hpp"
#include "poscm/stats.hpp"

namespace poscm {

// Empirical law of a source's outgoing edge vector A_{j, >j} (targets in
// tau order). Row patterns are encoded as bitmasks, bit k = targets[k].
struct SupervisingMeasure {
    NodeId source = 0;
    std::vector<NodeId> targets;
    EmpiricalLaw law = EmpiricalLaw::fromCounts({{0, 1}});
    Vec marginals;
    std::vector<std::uint64_t> edgeCounts;
    std::size_t n = 0;
};

SupervisingMeasure supervisingMeasure(const PoscmSpec& spec, const Regime& regime, NodeId source, std::size_t n,
                                      std::uint64_t seed, unsigned threads = 1);

struct IiscResult {
    bool changed = false;
    double statistic = 0.0;  // largest marginal shift
    double pValue = 1.0;     // smallest Bonferroni-corrected p
    Vec dyadP;               // raw per-dyad p-values
    bool jointTested = false;
    double jointP = 1.0;
};

// Per-dyad exact binomial tests plus a joint chi-square over row patterns
// when the pattern support is small, Bonferroni-corrected.
IiscResult iiscDetect(const SupervisingMeasure& base, const SupervisingMeasure& intervened, double alpha);

}  // namespace poscm
