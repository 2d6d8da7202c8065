#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>

#include "poscm/core.hpp"

namespace poscm {

using SpecPtr = std::shared_ptr<const PoscmSpec>;

// Two binary nodes V1 -> V2 with A12 ~ Bern(p) and degenerate contexts.
// Without the edge V2 ~ Bern(1/2), with it V2 ~ Bern(q_{V1}). Message form
// H(v) = (1, q_v), F((m1, m2), u) = 1{u < (1 - m1)/2 + m2}. V1 ~ Bern(1/2).
SpecPtr twoNodeConfounding(double p, double q0, double q1);

struct DistributiveToy {
    SpecPtr spec;
    NodeId x = 0, y = 1, z = 2, w = 0;
    // Multiplication node fed by x whose x-channel is clamped in the toy.
    NodeId firstProduct = 0;
};

enum class ToySide { LHS, RHS };

// LHS: s = y + z, W = x * s.  RHS: p1 = x * y, p2 = x * z, W = p1 + p2.
// Deterministic, fixed graph, messages H(v) = (1, v).
DistributiveToy distributiveToy(ToySide side);

// Random discrete POSCM on binary contexts and binary values.
//   edges:    P(A_ji = 1 | beta_j = b) drawn in [edgeLo, edgeHi] per (j, i, b)
//   contexts: roots Bern(rootPrior_i); otherwise majority of parent labels
//             (ties by a fair coin), flipped with probability `flip`
//   values:   P(V_i = 1 | v_S, b) = 1/2 + s(b) amp_i (-1)^{sum v_S}, s(0) = +1,
//             s(1) = -1 (no parents: exponent 0)
// so flipping any single parent changes P(V_i = 1) by 2 amp_i.
struct DiscreteOptions {
    std::size_t n = 5;
    std::uint64_t seed = 1;
    double edgeLo = 0.2, edgeHi = 0.8;
    double ampLo = 0.17, ampHi = 0.25;
    double rootLo = 0.3, rootHi = 0.7;
    double flip = 0.1;
};

struct DiscreteModel {
    SpecPtr spec;
    DiscreteOptions options;
    std::vector<double> edgeTable;  // [(j * n + i) * 2 + b]
    Vec rootPrior;
    Vec amp;

    double edgeProb(NodeId j, NodeId i, int b) const { return edgeTable[(j * spec->n + i) * 2 + b]; }
    // P(V_i = 1 | v_S, beta_i = b).
    double valueProb(NodeId i, int b, std::span<const double> parentValues) const;
    // P(beta_i = 1 | parent contexts b_S); S empty gives the root prior.
    double contextProb(NodeId i, std::span<const double> parentContexts) const;
};

DiscreteModel discretePoscm(const DiscreteOptions& options);

// Real-context chain on n nodes: beta in [0, 1]; roots beta = u, otherwise
// beta = (mean parent context + u) / 2; P(A_ji = 1 | b) = 0.2 + 0.6 b;
// V_i = beta_i + sum_j A_ji w V_j + sigma z(u) with additive d = 1 messages.
SpecPtr realContextChain(std::size_t n, double w = 0.5, double sigma = 0.3);

enum class ChannelKind { Identity, Tanh };

// V0 ~ U(-1, 1) -> V1 with the edge always present, message H(v) = v or
// tanh(v) (d = 1), aggregator F(m, u) = m + sigma z(u).
SpecPtr channelModel(ChannelKind kind, double sigma);
double channelMessage(ChannelKind kind, double v);

}  // namespace poscm
