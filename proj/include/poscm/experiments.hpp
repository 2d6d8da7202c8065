#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poscm/layered.hpp"
#include "poscm/report.hpp"

namespace poscm {

// Type-swapped twin: firing-rate KS tests between M and M' with types latent,
// and steady-potential KS tests on cells carrying one label with types observed.
struct Exp1Options {
    LayeredNetSpec net = defaultRetina();
    std::string typedLayer = "BC";
    std::string typeA = "ON-BC";
    std::string typeB = "OFF-BC";
    std::string clampLayer = "PR";
    std::size_t clampIndex = 0;
    Vec clamps{-60.0, -50.0, -40.0, -30.0};
    // Empty: firing rates of every cell.
    std::string readoutLayer;
    double spikeThreshold = -20.0;
    std::vector<std::uint64_t> seeds{1, 2};
    // M' realizations use seed + offset so the two arms are independent.
    std::uint64_t twinSeedOffset = 1000003;
    double alpha = 0.05;
    unsigned threads = 1;
};

Report runExp1(const Exp1Options& options);

// Calibrated density pair: MMD between per-cell steady-state effects of M and
// M' under single-cell clamps and under conductance replacement on all
// realized pre -> post synapses.
struct Exp2Options {
    LayeredNetSpec net = defaultRetina();
    std::string pre = "PR";
    std::string post = "BC";
    double blockFraction = 0.4;
    // false keeps the surviving conductances unscaled.
    bool calibrate = true;
    // Compares M with itself on independent seeds (null reference).
    bool selfPair = false;
    std::size_t clampIndex = 0;
    Vec clamps{-60.0, -50.0, -40.0, -30.0};
    Vec gTests{0.001, 0.002, 0.004, 0.008};
    std::vector<std::uint64_t> seeds{1, 2};
    std::uint64_t twinSeedOffset = 0;
    double window = 0.5;
    double minRatio = 2.0;
    std::size_t permutations = 200;
    unsigned threads = 1;
};

Report runExp2(const Exp2Options& options);

// Context sweep of population composition and the transfer curve of the mean
// readout-layer effect under bulk clamps of one layer, with a sigmoid fit.
struct Exp3Options {
    LayeredNetSpec net = defaultRetina();
    std::string clampLayer = "BC";
    std::string readoutLayer = "RGC";
    Vec clamps{-70.0, -60.0, -50.0, -40.0, -30.0, -20.0};
    Vec contexts{-1.2, -1.5, -2.0, -2.5, -3.0, -3.5};
    double reference = -1.2;
    std::vector<std::uint64_t> seeds{1, 2};
    double window = 0.5;
    double midpointTolerance = 5.0;
    unsigned threads = 1;
};

Report runExp3(const Exp3Options& options);

struct SigmoidFit {
    double lower = 0.0;
    double amplitude = 0.0;
    double midpoint = 0.0;
    double slope = 1.0;
    double sse = 0.0;
};

// Least squares y = lower + amplitude / (1 + exp(-(x - midpoint) / slope)):
// grid over (midpoint, slope) within the data range, closed form for the
// linear coefficients, then a finer grid around the best cell.
SigmoidFit fitSigmoid(const Vec& x, const Vec& y);

}  // namespace poscm
