#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "poscm/core.hpp"
#include "poscm/models.hpp"
#include "poscm/stats.hpp"

namespace poscm {

using Assignment = std::vector<std::pair<NodeId, double>>;

struct ProbeProtocol {
    // Per node; an empty grid means "all labels" (finite) or the quartiles of
    // the interval.
    std::vector<Vec> valueGrid;
    // Explicit joint assignments of the other potential parents; when empty
    // the full product of their grids is used (strided down to maxAssignments).
    std::vector<Assignment> coClampAssignments;
    std::size_t probesPerSetting = 500;
    double testAlpha = 0.01;
    std::size_t maxAssignments = 64;

    Vec gridFor(const PoscmSpec& spec, NodeId node) const;
    void validate(const PoscmSpec& spec) const;
};

struct DyadReadout {
    NodeId source = 0, target = 0;
    bool present = false;
    bool inconclusive = false;  // some raw p < alpha but none survives correction
    double minP = 1.0;
    double correctedP = 1.0;
    std::size_t tests = 0;
};

struct StructureReadout {
    std::size_t n = 0;
    std::vector<std::uint8_t> adjacency;
    std::vector<DyadReadout> dyads;
    std::size_t tests = 0;

    bool edge(NodeId s, NodeId t) const { return adjacency.at(s * n + t) != 0; }
    std::vector<NodeId> parents(NodeId target) const;
};

// Two-sample tests of V_i under do(V_j = v, v_-j) vs do(V_j = v', v_-j) for
// every dyad; Bonferroni over all tests of the call.
StructureReadout probeStructure(const InstanceHandle& unit, const ProbeProtocol& protocol, std::uint64_t seed = 0);
StructureReadout probeIncoming(const InstanceHandle& unit, const ProbeProtocol& protocol, NodeId target,
                               std::uint64_t seed = 0);
StructureReadout probeOutgoing(const InstanceHandle& unit, const ProbeProtocol& protocol, NodeId source,
                               std::uint64_t seed = 0);

// Population of stationary units: unit k of a cell is freezeInstance(spec,
// hash(seed, cell), k, phaseOne).
struct UnitSampler {
    SpecPtr spec;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    InstanceHandle unit(std::uint64_t cell, std::uint64_t k, const Regime& phaseOne = {}) const;
};

struct KernelEstimate {
    enum class Target { Alpha, Context, Value };
    Target target = Target::Alpha;
    NodeId node = 0;
    std::vector<NodeId> S;
    std::vector<NodeId> rowTargets;  // alpha: bit k of a row label = rowTargets[k]
    std::vector<Vec> grid;
    std::vector<EmpiricalLaw> laws;
    std::size_t nPer = 0;
    std::vector<std::size_t> unitsExamined;
    std::vector<double> conditioningFrequency;
    std::vector<std::string> flags;
};

KernelEstimate estimateStructureKernel(const UnitSampler& sampler, NodeId j, const Vec& betaGrid, std::size_t nPer,
                                       const ProbeProtocol& protocol);
KernelEstimate estimateContextKernel(const UnitSampler& sampler, NodeId i, const std::vector<NodeId>& S,
                                     const std::vector<Vec>& betaSGrid, std::size_t nPer, const ProbeProtocol& protocol,
                                     std::size_t maxUnitsPerCell = 0);
KernelEstimate estimateValueKernel(const UnitSampler& sampler, NodeId i, const std::vector<NodeId>& S,
                                   const std::vector<Vec>& vSGrid, std::optional<double> betaCondition,
                                   std::size_t nPer, const ProbeProtocol& protocol, std::size_t maxUnits = 0);

struct MessageMatch {
    double v = 0.0;
    Vec estimate;
    std::size_t clampIndex = 0;
    double distance = 0.0;
    double tolerance = 0.0;
    double residualP = 1.0;
    bool ambiguous = false;
};

// Routes A/B on a unit with the edge j -> i present: match the law of V_i
// under do(V_j = v) against constant clamps of the j-slot. `otherClamps`
// fixes the remaining parent values in both arms.
std::vector<MessageMatch> identifyMessageRouteAB(const InstanceHandle& unit, NodeId i, NodeId j, const Vec& vGrid,
                                                 const std::vector<Vec>& clampGrid, std::size_t nPer,
                                                 const Assignment& otherClamps = {}, std::uint64_t seed = 0);

struct ReplayMatch {
    std::size_t block = 0;
    double vj = 0.0;
    Vec estimate;
    enum class Status { Matched, Skipped, NoMatch, MultipleMatches } status = Status::Skipped;
    double residual = 0.0;
};

// Route C on replay blocks (frozen full draws). Scalar messages only; the
// clamp grid brackets the match, then bisection refines it.
std::vector<ReplayMatch> identifyMessageRouteC(const PoscmSpec& spec, const std::vector<ExogenousDraw>& blocks,
                                               NodeId i, NodeId j, const Vec& clampGrid, double tolerance = 1e-9);

struct EquivalenceTest {
    std::string regime;
    std::string channel;
    TwoSampleResult result;
    double correctedP = 1.0;
};

struct EquivalenceVerdict {
    std::vector<EquivalenceTest> tests;
    bool distinguished = false;
    std::string regime;   // first rejecting regime
    std::string channel;  // and channel
    double minCorrectedP = 1.0;
};

struct EquivalenceOptions {
    std::size_t nPer = 10000;
    double alpha = 0.01;
    std::uint64_t seedA = 1;
    std::uint64_t seedB = 2;
    unsigned threads = 1;
    // Adds a joint test over all finite observed values when they fit.
    bool jointFinite = true;
};

EquivalenceVerdict checkEquivalence(const PoscmSpec& a, const PoscmSpec& b, const std::vector<Regime>& family,
                                    const MeasurementModel& om, const EquivalenceOptions& options);

// The empty regime followed by every single V-node clamp over the protocol grid.
std::vector<Regime> valueNodeFamily(const PoscmSpec& spec, const ProbeProtocol& protocol);

// Context reparameterization by a bijection gamma with inverse gammaInv.
// Throws DomainError if gamma leaves the context domains or is not inverted.
PoscmSpec reparameterizeContext(const PoscmSpec& spec, std::function<double(double)> gamma,
                                std::function<double(double)> gammaInv);

struct ConfoundingPair {
    SpecPtr m;
    SpecPtr mPrime;
    double q0Prime = 0.0;
    double q1Prime = 0.0;
};

// Solves (1 - p')/2 + p' q'_v = (1 - p)/2 + p q_v for q'_v.
ConfoundingPair calibratedConfoundingPair(double p, double q0, double q1, double pPrime);

}  // namespace poscm
