#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "poscm/core.hpp"

namespace poscm {

// Named scalar function from the catalog: identity, affine(a, b),
// tanh(gain), sin(freq), piecewise-linear(x0, y0, x1, y1, ...).
struct ScalarFn {
    std::string name;
    Vec params;
    std::function<double(double)> fn;

    double operator()(double x) const { return fn(x); }
};

ScalarFn makeScalarFn(const std::string& name, Vec params = {});

// V = sum_{q=0}^{2m} Psi(q + sum_j A_j lambda_j psi(V_j + eta q) + lambdaU psi(U + eta q)),
// with one lambda per potential parent slot (m = lambdas.size()).
struct KasForm {
    ScalarFn Psi = makeScalarFn("identity");
    ScalarFn psi = makeScalarFn("identity");
    double eta = 0.0;
    Vec lambdas;
    double lambdaU = 0.0;

    std::size_t slots() const noexcept { return lambdas.size(); }
    std::size_t dim() const noexcept { return 2 * lambdas.size() + 1; }
};

double kasEvalDirect(const KasForm& form, std::span<const std::uint8_t> adjacencyRow,
                     std::span<const double> parentValues, double uV);

struct KasMessages {
    std::size_t dim = 1;
    std::vector<std::function<Vec(double)>> edge;  // one per slot
    std::function<double(const MessageMatrix&, std::span<const double>)> aggregate;
};

KasMessages kasToMessages(const KasForm& form);
// Gated evaluation through the message functions.
double kasEvalViaMessages(const KasForm& form, std::span<const std::uint8_t> adjacencyRow,
                          std::span<const double> parentValues, double uV);
// Message form for a target whose potential parents (slot order) are `sources`.
std::shared_ptr<const MessageForm> kasMessageForm(const KasForm& form, std::vector<NodeId> sources);

// Sum of per-parent univariate terms plus noise: d = 1 per slot.
std::shared_ptr<const MessageForm> additiveMessageForm(std::function<double(NodeId, double)> term,
                                                        std::function<double(double)> noiseTerm);

// Per-node message parameterization; the value channel is required, the
// context channel is optional. The factory may depend on the node's context.
struct NodeMessageParam {
    std::function<std::shared_ptr<const MessageForm>(double context)> value;
    std::shared_ptr<const MessageForm> context;
    std::string tag;
};

PoscmSpec buildMessagePoscm(const PoscmSpec& spec, const std::vector<NodeMessageParam>& params);

// Bijection on the message space of one node.
struct Gauge {
    std::function<Vec(const Vec&)> g;
    std::function<Vec(const Vec&)> gInv;
};

Gauge affineGauge(double scale, double shift);
// Messages reachable from `inputs` through every source of `form`.
std::vector<Vec> reachableMessages(const MessageForm& form, std::span<const NodeId> sources,
                                   std::span<const double> inputs);
// H' = g o H, F' = F o g^-1 slotwise (absent slots stay zero). Throws if g is
// not invertible on the reachable set.
std::shared_ptr<const MessageForm> gaugeTransform(const MessageForm& form, const Gauge& gauge,
                                                   const std::vector<Vec>& reachable);
// Applies gaugeTransform to the value mechanism of `node` in a message spec.
PoscmSpec gaugeSpec(const PoscmSpec& spec, NodeId node, const Gauge& gauge, std::span<const double> inputs);

double clipBox(double x, double bound);
std::function<double(std::span<const double>)> restrictToCube(std::function<double(std::span<const double>)> fn,
                                                              double lo, double hi);

}  // namespace poscm
