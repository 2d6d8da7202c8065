#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "poscm/domain.hpp"
#include "poscm/regime.hpp"

namespace poscm {

// Values (or contexts) of a realized parent set, keyed by parent id.
struct ParentValues {
    std::span<const NodeId> ids;
    std::span<const double> values;

    std::size_t size() const noexcept { return ids.size(); }
    bool contains(NodeId id) const noexcept;
    double at(NodeId id) const;
};

// Gated message matrix for one target node: one d-vector per potential
// parent (tau-order), identically zero where the edge is absent.
struct MessageMatrix {
    std::size_t dim = 0;
    std::vector<NodeId> sources;
    std::vector<Vec> slots;

    const Vec& slot(NodeId source) const;
    static bool isZero(const Vec& m) noexcept;
};

// Message primitives of one node and channel: H_{i<-j} for every potential
// parent j and the aggregator (F_i or Phi_i) over the gated matrix.
struct MessageForm {
    std::size_t dim = 1;
    std::function<Vec(NodeId source, double x)> message;
    std::function<double(const MessageMatrix&, std::span<const double> noise)> aggregate;
};

// Mechanism handle f_i produced by the mechanism operator, tagged with the
// (context, parent set, noise) it was drawn from.
struct Mechanism {
    double context = 0.0;
    std::vector<NodeId> parents;
    Vec noise;
    std::string tag;
    std::function<double(const ParentValues&, std::span<const double> valueNoise)> evaluate;
    std::shared_ptr<const MessageForm> messages;

    bool isMessageForm() const noexcept { return static_cast<bool>(messages); }
};

struct ContextMechanism {
    std::function<double(const ParentValues& parentContexts, std::span<const double> noise)> sample;
    std::shared_ptr<const MessageForm> messages;
};

using EdgeProbability = std::function<double(NodeId source, NodeId target, double sourceContext)>;
// Optional joint sampler for a source's outgoing row (non-product supervising
// measure). Receives one uniform per target, in the order of `targets`.
using EdgeRowSampler = std::function<std::vector<std::uint8_t>(
    NodeId source, double sourceContext, std::span<const NodeId> targets, std::span<const double> uniforms)>;
using MechanismOperator =
    std::function<Mechanism(double context, std::span<const NodeId> parents, std::span<const double> noise)>;

struct NoiseArity {
    std::size_t context = 1;
    std::size_t mechanism = 1;
    std::size_t value = 1;
};

// The generative program. Fill the fields, then call finalize() once; every
// generator entry point requires a finalized spec.
struct PoscmSpec {
    std::size_t n = 0;
    std::vector<std::size_t> tau;  // tau[node] = generation rank
    std::vector<std::string> names;
    std::vector<Domain> contextDomain;
    std::vector<Domain> valueDomain;
    EdgeProbability edgeProb;
    EdgeRowSampler rowSampler;
    std::vector<ContextMechanism> phi;
    std::vector<MechanismOperator> gamma;
    std::vector<NoiseArity> noise;
    // Per-node availability of message primitives (edge interventions).
    std::vector<bool> contextMessageForm;
    std::vector<bool> valueMessageForm;

    void finalize();
    bool finalized() const noexcept { return order_.size() == n && n > 0; }

    const std::vector<NodeId>& order() const;
    std::size_t rank(NodeId node) const { return tau.at(node); }
    bool precedes(NodeId a, NodeId b) const { return tau.at(a) < tau.at(b); }
    std::vector<NodeId> potentialParents(NodeId node) const;
    std::vector<NodeId> laterNodes(NodeId node) const;
    std::string nodeName(NodeId node) const;
    std::optional<NodeId> nodeByName(const std::string& name) const;

private:
    std::vector<NodeId> order_;
};

// Frozen store of all exogenous randomness of one replicate.
class ExogenousDraw {
public:
    static ExogenousDraw sample(const PoscmSpec& spec, std::uint64_t seed, std::uint64_t replicate);

    // Explicit construction (enumeration oracles, hand-built counterexamples).
    // `edgeUniforms` is n*n row-major; only entries with tau(j) < tau(i) are read.
    ExogenousDraw(std::size_t n, std::vector<double> edgeUniforms, std::vector<Vec> contextNoise,
                  std::vector<Vec> mechanismNoise, std::vector<Vec> valueNoise, std::uint64_t seed = 0,
                  std::uint64_t replicate = 0);

    std::size_t size() const noexcept { return n_; }
    double edgeUniform(NodeId source, NodeId target) const { return uA_.at(source * n_ + target); }
    std::span<const double> contextNoise(NodeId node) const { return uBeta_.at(node); }
    std::span<const double> mechanismNoise(NodeId node) const { return uF_.at(node); }
    std::span<const double> valueNoise(NodeId node) const { return uV_.at(node); }
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t replicate() const noexcept { return replicate_; }
    std::uint64_t id() const noexcept;

    // Same Phase I randomness, fresh Phase II value noise keyed by probeKey.
    ExogenousDraw withFreshValueNoise(std::uint64_t probeKey) const;

    bool operator==(const ExogenousDraw&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<double> uA_;
    std::vector<Vec> uBeta_, uF_, uV_;
    std::uint64_t seed_ = 0, replicate_ = 0;
};

// One realized sample (A, beta, f, V) plus the draw and regime behind it.
struct World {
    std::size_t n = 0;
    std::vector<std::uint8_t> adjacency;  // [source * n + target]
    Vec context;
    Vec value;
    std::vector<Mechanism> mechanism;
    std::vector<MessageMatrix> valueMessages;  // filled for message-form nodes
    std::shared_ptr<const ExogenousDraw> draw;
    std::shared_ptr<const Regime> regime;
    std::vector<std::string> warnings;

    bool edge(NodeId source, NodeId target) const { return adjacency.at(source * n + target) != 0; }
    std::vector<NodeId> parents(NodeId target) const;
    std::uint64_t id() const noexcept { return draw ? draw->id() : 0; }
};

// Pure function of (spec, draw, regime): Phase I (structure, contexts),
// mechanism assignment, then Phase II values.
World generate(const PoscmSpec& spec, std::shared_ptr<const ExogenousDraw> draw,
               std::shared_ptr<const Regime> regime);
World generate(const PoscmSpec& spec, const ExogenousDraw& draw, const Regime& regime = {});

// Phase I plus mechanism assignment only; `value` is left empty.
World generateStructure(const PoscmSpec& spec, std::shared_ptr<const ExogenousDraw> draw,
                        std::shared_ptr<const Regime> regime);
// Phase II on an existing structure using `noise` for U^V. Context-level
// interventions in `regime` are rejected.
void generateValues(const PoscmSpec& spec, World& world, const ExogenousDraw& noise, const Regime& regime);

enum class Symbol { Adjacency, Context, Value };

// Elementwise observation channel x -> x~ with `noiseArity` uniforms per entry.
struct Channel {
    std::string name;
    std::size_t noiseArity = 0;
    std::function<double(double x, std::span<const double> u)> apply;

    static Channel identity();
    static Channel gaussian(double sigma);
    // With probability `rate` replaces the label by a uniformly drawn other label.
    static Channel labelFlip(double rate, std::size_t labels);
};

struct MeasurementModel {
    std::set<Symbol> included;
    std::optional<Channel> adjacency;
    std::optional<Channel> context;
    std::optional<Channel> value;

    static MeasurementModel valuesOnly();
    static MeasurementModel contextsAndValues();
    static MeasurementModel everything();
    bool includes(Symbol s) const { return included.contains(s); }
    void validate() const;
};

// Absent channels carry no data.
struct Observation {
    std::optional<std::vector<std::uint8_t>> adjacency;
    std::optional<Vec> context;
    std::optional<Vec> value;
};

Observation observe(const World& world, const MeasurementModel& om, std::uint64_t obsSeed);

struct WorldSample {
    World world;
    Observation observation;
};

// Replicates 0..count-1 of `seed`; element k depends only on (spec, regime,
// om, seed, k).
std::vector<WorldSample> sampleWorlds(const PoscmSpec& spec, const Regime& regime, const MeasurementModel& om,
                                      std::uint64_t seed, std::size_t count, unsigned threads = 1);

// A stationary unit: Phase I outcome (A*, beta*, f*) fixed from one draw and
// probed repeatedly in Phase II with fresh value noise.
class InstanceHandle {
public:
    InstanceHandle(std::shared_ptr<const PoscmSpec> spec, std::shared_ptr<const World> frozen);

    World probe(const Regime& regime, std::uint64_t probeIndex) const;
    // Value of one node under a probe; evaluates nodes only up to its rank.
    double probeNode(NodeId node, const Regime& regime, std::uint64_t probeIndex) const;
    // Context readout (noiseless).
    double readContext(NodeId node) const { return frozen_->context.at(node); }

    const PoscmSpec& spec() const noexcept { return *spec_; }
    std::shared_ptr<const PoscmSpec> specPtr() const noexcept { return spec_; }
    // Ground truth of the frozen unit; for oracles and reporting only.
    const World& groundTruth() const noexcept { return *frozen_; }

private:
    std::shared_ptr<const PoscmSpec> spec_;
    std::shared_ptr<const World> frozen_;
};

InstanceHandle freezeInstance(std::shared_ptr<const PoscmSpec> spec, std::uint64_t seed,
                              std::uint64_t replicate = 0, const Regime& phaseOne = {});

}  // namespace poscm
