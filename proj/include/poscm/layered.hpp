#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "poscm/core.hpp"
#include "poscm/models.hpp"

namespace poscm {

// Graded tanh synapse. Units: conductance in uS (umho), potentials in mV,
// time in ms, currents in nA.
struct SynapseParams {
    double gMax = 0.00256;
    double vThr = -45.0;
    double vSlope = 10.0;
    double tauSyn = 10.0;
    double eRev = 0.0;
    bool signInverting = false;

    void validate() const;
};

inline constexpr double kKineticsFloor = 1e-3;

// tanh((vPre - vThr) / vSlope) rectified to [0, 1).
double synapseSInf(double vPre, const SynapseParams& p);
double synapseStep(double s, double vPre, const SynapseParams& p, double dt);
// +gMax s (vPost - eRev) for sign-inverting synapses, -gMax s (vPost - eRev) otherwise.
double synapticCurrent(double s, double vPost, const SynapseParams& p);

struct CellType {
    std::string name;
    double proportion = 1.0;
};

struct Population {
    std::string name;
    std::size_t size = 0;
    std::vector<CellType> types;
    bool spiking = false;
};

// Feedforward projection between two layers; synapse parameters are keyed by
// the postsynaptic type.
struct Projection {
    std::string pre, post;
    double probability = 0.0;
    std::map<std::string, SynapseParams> synapse;
};

struct SomaParams {
    double gLeak = 0.01;        // uS
    double eLeak = -50.0;       // mV
    double capacitance = 0.1;   // nF
    double leakJitter = 2.0;    // mV, uniform half-width per cell
    double noise = 0.002;       // nA, per-step current noise sd
    double vSpike = -45.0;
    double vReset = -50.0;
    double spikePeak = 20.0;
    double spikeWidth = 1.0;    // ms held at spikePeak
    double refractory = 1.0;    // ms held at vReset after the spike
};

struct Stimulus {
    double amplitudePa = 120.0;
    std::string population = "PR";
    double onset = 0.0;  // ms
};

struct LayeredNetSpec {
    std::vector<Population> layers;
    std::vector<Projection> projections;
    SomaParams soma;
    Stimulus stimulus;
    double T = 200.0;
    double dt = 0.1;
    // Lateral coupling treated as within-layer noise; adds this sd (nA) of
    // noise shared by all cells of a layer. Off by default.
    double withinLayerNoise = 0.0;

    void validate() const;
    std::size_t cellCount() const;
    std::size_t layerIndex(const std::string& name) const;
    const Projection* projection(const std::string& pre, const std::string& post) const;
};

// PR -> HZ -> BC -> AC -> RGC with ON/OFF bipolar and ganglion types.
LayeredNetSpec defaultRetina();

struct CellRef {
    std::size_t layer = 0;
    std::size_t index = 0;  // within the layer
};

// The POSCM view: one node per cell in layer order, contexts are type labels,
// edges follow the layer-pair probabilities and the mechanism is the
// steady-state soma potential given the parents' potentials.
struct LayeredView {
    SpecPtr spec;
    std::vector<CellRef> cells;
    std::vector<std::vector<NodeId>> layerCells;

    std::vector<NodeId> cellsOf(const std::string& layer, const LayeredNetSpec& net) const;
};

LayeredView layeredView(const LayeredNetSpec& net);

struct Trace {
    NodeId cell = 0;
    double dt = 0.1;
    Vec samples;
};

struct LayeredRun {
    World structure;  // Phase I: types and adjacency
    std::vector<Trace> traces;
};

// Phase I from the POSCM view, then forward-Euler integration. VNode clamps
// hold a cell's potential; VEdge clamps set the dyad's gMax to the first
// coordinate of the clamp. Throws SimulationError if |V| exceeds 500 mV.
LayeredRun simulateLayered(const LayeredNetSpec& net, const LayeredView& view, const ExogenousDraw& draw,
                           const Regime& regime, double T, double dt);
LayeredRun simulateLayered(const LayeredNetSpec& net, std::uint64_t seed, const Regime& regime = {});

// Exchanges two type labels of a layer together with their parameters.
LayeredNetSpec typeSwappedTwin(const LayeredNetSpec& net, const std::string& layer, const std::string& typeA,
                               const std::string& typeB);

// Second model blocks a fraction of pre -> post synapses and rescales the rest
// so that probability times gMax is unchanged.
std::pair<LayeredNetSpec, LayeredNetSpec> calibratedDensityPair(const LayeredNetSpec& net, const std::string& pre,
                                                                const std::string& post, double blockFraction = 0.4);

// Global context sweep: population sizes grow with |context - reference| and
// the first type of every multi-type layer gains share.
LayeredNetSpec withGlobalContext(const LayeredNetSpec& net, double context, double reference = -1.2);

// Rows "t,cellId,V".
std::string tracesCsv(const std::vector<Trace>& traces);

}  // namespace poscm
