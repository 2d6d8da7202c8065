#include "poscm/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "poscm/error.hpp"
#include "poscm/rng.hpp"

namespace poscm {

namespace {

PoscmSpec blankSpec(std::size_t n, std::vector<std::string> names) {
    PoscmSpec s;
    s.n = n;
    s.tau.resize(n);
    std::iota(s.tau.begin(), s.tau.end(), std::size_t{0});
    s.names = std::move(names);
    s.contextDomain.assign(n, Domain::finite({"*"}));
    s.valueDomain.assign(n, Domain::binary());
    s.phi.assign(n, ContextMechanism{[](const ParentValues&, std::span<const double>) { return 0.0; }, nullptr});
    s.gamma.resize(n);
    s.noise.assign(n, NoiseArity{});
    s.valueMessageForm.assign(n, true);
    s.contextMessageForm.assign(n, false);
    return s;
}

MechanismOperator fixedMessages(std::shared_ptr<const MessageForm> form, std::string tag) {
    return [form, tag](double, std::span<const NodeId>, std::span<const double>) {
        Mechanism m;
        m.tag = tag;
        m.messages = form;
        return m;
    };
}

std::shared_ptr<MessageForm> presenceValueForm(std::function<double(const MessageMatrix&, std::span<const double>)> agg) {
    auto f = std::make_shared<MessageForm>();
    f->dim = 2;
    f->message = [](NodeId, double v) { return Vec{1.0, v}; };
    f->aggregate = std::move(agg);
    return f;
}

}  // namespace

SpecPtr twoNodeConfounding(double p, double q0, double q1) {
    if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("edge probability p must lie in (0, 1]");
    if (!(q0 >= 0.0 && q0 <= 1.0 && q1 >= 0.0 && q1 <= 1.0)) throw InvalidArgument("q0, q1 must lie in [0, 1]");
    PoscmSpec s = blankSpec(2, {"V1", "V2"});
    s.edgeProb = [p](NodeId, NodeId, double) { return p; };

    auto root = std::make_shared<MessageForm>();
    root->dim = 2;
    root->message = [](NodeId, double) { return Vec{0.0, 0.0}; };
    root->aggregate = [](const MessageMatrix&, std::span<const double> u) { return u[0] < 0.5 ? 1.0 : 0.0; };
    s.gamma[0] = fixedMessages(root, "bern-half");

    auto child = std::make_shared<MessageForm>();
    child->dim = 2;
    child->message = [q0, q1](NodeId, double v) { return Vec{1.0, v >= 0.5 ? q1 : q0}; };
    child->aggregate = [](const MessageMatrix& m, std::span<const double> u) {
        const Vec& slot = m.slots.at(0);
        return u[0] < (1.0 - slot[0]) * 0.5 + slot[1] ? 1.0 : 0.0;
    };
    s.gamma[1] = fixedMessages(child, "gated-bernoulli");
    s.finalize();
    return std::make_shared<const PoscmSpec>(std::move(s));
}

DistributiveToy distributiveToy(ToySide side) {
    DistributiveToy toy;
    std::vector<std::string> names{"x", "y", "z"};
    std::set<std::pair<NodeId, NodeId>> edges;
    std::vector<bool> product;
    if (side == ToySide::LHS) {
        names.insert(names.end(), {"s", "W"});
        edges = {{1, 3}, {2, 3}, {0, 4}, {3, 4}};
        product = {false, false, false, false, true};
        toy.w = 4;
        toy.firstProduct = 4;
    } else {
        names.insert(names.end(), {"p1", "p2", "W"});
        edges = {{0, 3}, {1, 3}, {0, 4}, {2, 4}, {3, 5}, {4, 5}};
        product = {false, false, false, true, true, false};
        toy.w = 5;
        toy.firstProduct = 3;
    }
    const std::size_t n = names.size();
    PoscmSpec s = blankSpec(n, names);
    s.valueDomain.assign(n, Domain::interval(-1e9, 1e9));
    s.edgeProb = [edges](NodeId j, NodeId i, double) { return edges.contains({j, i}) ? 1.0 : 0.0; };
    auto rootForm = presenceValueForm([](const MessageMatrix&, std::span<const double> u) { return u[0]; });
    auto sumForm = presenceValueForm([](const MessageMatrix& m, std::span<const double>) {
        double acc = 0.0;
        for (const auto& slot : m.slots)
            if (slot[0] != 0.0) acc += slot[1];
        return acc;
    });
    auto productForm = presenceValueForm([](const MessageMatrix& m, std::span<const double>) {
        double acc = 1.0;
        bool any = false;
        for (const auto& slot : m.slots)
            if (slot[0] != 0.0) {
                acc *= slot[1];
                any = true;
            }
        return any ? acc : 0.0;
    });
    for (NodeId i = 0; i < n; ++i) {
        if (i < 3) s.gamma[i] = fixedMessages(rootForm, "root-uniform");
        else s.gamma[i] = product[i] ? fixedMessages(productForm, "product") : fixedMessages(sumForm, "sum");
    }
    s.finalize();
    toy.spec = std::make_shared<const PoscmSpec>(std::move(s));
    return toy;
}

double DiscreteModel::valueProb(NodeId i, int b, std::span<const double> parentValues) const {
    int parity = 0;
    for (double v : parentValues) parity += v >= 0.5 ? 1 : 0;
    double sign = b == 0 ? 1.0 : -1.0;
    return 0.5 + sign * amp[i] * (parity % 2 ? -1.0 : 1.0);
}

double DiscreteModel::contextProb(NodeId i, std::span<const double> parentContexts) const {
    if (parentContexts.empty()) return rootPrior[i];
    std::size_t ones = 0;
    for (double c : parentContexts) ones += c >= 0.5 ? 1 : 0;
    std::size_t zeros = parentContexts.size() - ones;
    if (ones == zeros) return 0.5;
    return ones > zeros ? 1.0 - options.flip : options.flip;
}

DiscreteModel discretePoscm(const DiscreteOptions& o) {
    if (o.n < 1) throw InvalidArgument("discrete model needs n >= 1");
    if (!(o.edgeLo >= 0.0 && o.edgeLo <= o.edgeHi && o.edgeHi <= 1.0)) throw InvalidArgument("invalid edge range");
    if (!(o.ampLo >= 0.0 && o.ampLo <= o.ampHi && o.ampHi < 0.5)) throw InvalidArgument("invalid amplitude range");
    if (!(o.flip >= 0.0 && o.flip <= 1.0)) throw InvalidArgument("invalid flip rate");
    DiscreteModel model;
    model.options = o;
    const std::size_t n = o.n;
    rng::KeyedStream draw(rng::hashKey({o.seed, 0x646973ULL}));
    model.edgeTable.assign(n * n * 2, 0.0);
    for (NodeId j = 0; j < n; ++j)
        for (NodeId i = j + 1; i < n; ++i)
            for (int b = 0; b < 2; ++b) model.edgeTable[(j * n + i) * 2 + b] = o.edgeLo + (o.edgeHi - o.edgeLo) * draw.uniform();
    for (NodeId i = 0; i < n; ++i) model.rootPrior.push_back(o.rootLo + (o.rootHi - o.rootLo) * draw.uniform());
    for (NodeId i = 0; i < n; ++i) model.amp.push_back(o.ampLo + (o.ampHi - o.ampLo) * draw.uniform());

    std::vector<std::string> names;
    for (NodeId i = 0; i < n; ++i) names.push_back("X" + std::to_string(i));
    PoscmSpec s = blankSpec(n, names);
    s.contextDomain.assign(n, Domain::finite({"a", "b"}));
    for (auto& a : s.noise) a.context = 2;
    auto table = model.edgeTable;
    s.edgeProb = [table, n](NodeId j, NodeId i, double b) { return table[(j * n + i) * 2 + (b >= 0.5 ? 1 : 0)]; };
    for (NodeId i = 0; i < n; ++i) {
        double prior = model.rootPrior[i], flip = o.flip;
        s.phi[i].sample = [prior, flip](const ParentValues& pc, std::span<const double> u) {
            if (pc.size() == 0) return u[1] < prior ? 1.0 : 0.0;
            std::size_t ones = 0;
            for (double c : pc.values) ones += c >= 0.5 ? 1 : 0;
            std::size_t zeros = pc.size() - ones;
            double label = ones == zeros ? (u[1] < 0.5 ? 1.0 : 0.0) : (ones > zeros ? 1.0 : 0.0);
            return u[0] < flip ? 1.0 - label : label;
        };
        double amp = model.amp[i];
        s.gamma[i] = [amp](double context, std::span<const NodeId>, std::span<const double>) {
            double sign = context >= 0.5 ? -1.0 : 1.0;
            Mechanism m;
            m.tag = "parity";
            m.messages = presenceValueForm([sign, amp](const MessageMatrix& mm, std::span<const double> u) {
                int parity = 0;
                for (const auto& slot : mm.slots)
                    if (slot[0] != 0.0 && slot[1] >= 0.5) ++parity;
                double p = 0.5 + sign * amp * (parity % 2 ? -1.0 : 1.0);
                return u[0] < p ? 1.0 : 0.0;
            });
            return m;
        };
    }
    s.finalize();
    model.spec = std::make_shared<const PoscmSpec>(std::move(s));
    return model;
}

SpecPtr realContextChain(std::size_t n, double w, double sigma) {
    if (n < 2) throw InvalidArgument("real-context chain needs n >= 2");
    if (!(sigma > 0.0)) throw InvalidArgument("real-context chain needs sigma > 0");
    std::vector<std::string> names;
    for (NodeId i = 0; i < n; ++i) names.push_back("R" + std::to_string(i));
    PoscmSpec s = blankSpec(n, names);
    s.contextDomain.assign(n, Domain::interval(0.0, 1.0));
    s.valueDomain.assign(n, Domain::interval(-100.0, 100.0));
    for (auto& a : s.noise) a.value = 2;
    s.edgeProb = [](NodeId, NodeId, double b) { return 0.2 + 0.6 * b; };
    for (NodeId i = 0; i < n; ++i) {
        s.phi[i].sample = [](const ParentValues& pc, std::span<const double> u) {
            if (pc.size() == 0) return u[0];
            double mean = std::accumulate(pc.values.begin(), pc.values.end(), 0.0) / static_cast<double>(pc.size());
            return 0.5 * (mean + u[0]);
        };
        s.gamma[i] = [w, sigma](double context, std::span<const NodeId>, std::span<const double>) {
            auto f = std::make_shared<MessageForm>();
            f->dim = 1;
            f->message = [w](NodeId, double v) { return Vec{w * v}; };
            f->aggregate = [context, sigma](const MessageMatrix& m, std::span<const double> u) {
                double acc = context + sigma * rng::normalFromUniforms(u[0], u[1]);
                for (const auto& slot : m.slots) acc += slot[0];
                return acc;
            };
            Mechanism mech;
            mech.tag = "additive";
            mech.messages = f;
            return mech;
        };
    }
    s.finalize();
    return std::make_shared<const PoscmSpec>(std::move(s));
}

double channelMessage(ChannelKind kind, double v) { return kind == ChannelKind::Identity ? v : std::tanh(v); }

SpecPtr channelModel(ChannelKind kind, double sigma) {
    if (!(sigma >= 0.0)) throw InvalidArgument("channel model needs sigma >= 0");
    PoscmSpec s = blankSpec(2, {"S", "T"});
    s.valueDomain = {Domain::interval(-1.0, 1.0), Domain::interval(-10.0, 10.0)};
    s.noise[1].value = 2;
    s.edgeProb = [](NodeId, NodeId, double) { return 1.0; };
    auto root = std::make_shared<MessageForm>();
    root->dim = 1;
    root->message = [](NodeId, double) { return Vec{0.0}; };
    root->aggregate = [](const MessageMatrix&, std::span<const double> u) { return 2.0 * u[0] - 1.0; };
    s.gamma[0] = fixedMessages(root, "uniform");
    auto child = std::make_shared<MessageForm>();
    child->dim = 1;
    child->message = [kind](NodeId, double v) { return Vec{channelMessage(kind, v)}; };
    child->aggregate = [sigma](const MessageMatrix& m, std::span<const double> u) {
        return m.slots.at(0)[0] + sigma * rng::normalFromUniforms(u[0], u[1]);
    };
    s.gamma[1] = fixedMessages(child, kind == ChannelKind::Identity ? "identity-channel" : "tanh-channel");
    s.finalize();
    return std::make_shared<const PoscmSpec>(std::move(s));
}

}  // namespace poscm
