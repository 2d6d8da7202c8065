#include "poscm/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "poscm/error.hpp"
#include "poscm/parallel.hpp"
#include "poscm/rng.hpp"

namespace poscm {

namespace {

enum : std::uint64_t {
    kTagEdge = 1,
    kTagContext = 2,
    kTagMechanism = 3,
    kTagValue = 4,
    kTagProbe = 5,
    kTagObserve = 6,
};

std::string fmtValue(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// Finite domains reject foreign values; real intervals clamp with a warning.
double admit(const Domain& domain, double x, const char* what, const PoscmSpec& spec, NodeId node,
             std::vector<std::string>* warnings) {
    if (!std::isfinite(x))
        throw DomainError(std::string(what) + " of node " + spec.nodeName(node) + " is not finite");
    if (domain.contains(x)) return x;
    if (domain.isFinite())
        throw DomainError(std::string(what) + " of node " + spec.nodeName(node) + " evaluated outside its domain (" +
                          fmtValue(x) + ")");
    double clamped = domain.clamp(x);
    if (warnings)
        warnings->push_back(std::string(what) + " of node " + spec.nodeName(node) + " clamped from " + fmtValue(x) +
                            " to " + fmtValue(clamped));
    return clamped;
}

MessageMatrix gatherMessages(const PoscmSpec& spec, const MessageForm& form, NodeId target,
                             const std::vector<std::uint8_t>& adjacency, const Vec& sourceValues,
                             const Regime& regime, bool contextChannel) {
    MessageMatrix m;
    m.dim = form.dim;
    const auto& order = spec.order();
    std::size_t rank = spec.rank(target);
    m.sources.reserve(rank);
    m.slots.reserve(rank);
    for (std::size_t k = 0; k < rank; ++k) {
        NodeId j = order[k];
        m.sources.push_back(j);
        if (!adjacency[j * spec.n + target]) {
            m.slots.emplace_back(form.dim, 0.0);
            continue;
        }
        const EdgeReplacement* rep = contextChannel ? regime.contextEdge(j, target) : regime.valueEdge(j, target);
        Vec msg = rep ? rep->apply(sourceValues[j]) : form.message(j, sourceValues[j]);
        if (msg.size() != form.dim)
            throw DomainError("message on " + spec.nodeName(j) + "->" + spec.nodeName(target) + " has dimension " +
                              std::to_string(msg.size()) + ", expected " + std::to_string(form.dim));
        m.slots.push_back(std::move(msg));
    }
    return m;
}

template <class NoiseFn>
void runValues(const PoscmSpec& spec, const World& structure, Vec& values, std::vector<MessageMatrix>* messages,
               NoiseFn&& valueNoise, const Regime& regime, std::size_t stopRank,
               std::vector<std::string>* warnings) {
    const auto& order = spec.order();
    const std::size_t n = spec.n;
    values.assign(n, 0.0);
    if (messages) messages->assign(n, MessageMatrix{});
    std::vector<NodeId> parentIds;
    Vec parentVals;
    for (std::size_t k = 0; k < n && k <= stopRank; ++k) {
        NodeId i = order[k];
        if (auto v = regime.valueOverride(i)) {
            values[i] = *v;
            continue;
        }
        const Mechanism& mech = structure.mechanism[i];
        std::span<const double> u = valueNoise(i);
        double out;
        if (mech.isMessageForm()) {
            MessageMatrix mm = gatherMessages(spec, *mech.messages, i, structure.adjacency, values, regime, false);
            out = mech.messages->aggregate(mm, u);
            if (messages) (*messages)[i] = std::move(mm);
        } else {
            parentIds.clear();
            parentVals.clear();
            for (std::size_t kk = 0; kk < k; ++kk) {
                NodeId j = order[kk];
                if (structure.adjacency[j * n + i]) {
                    parentIds.push_back(j);
                    parentVals.push_back(values[j]);
                }
            }
            if (!parentIds.empty() && regime.hasValueEdgeInto(i)) {
                for (NodeId j : parentIds)
                    if (regime.valueEdge(j, i))
                        throw InvalidArgument("value-edge intervention into " + spec.nodeName(i) +
                                              " but its mechanism has no message form");
            }
            out = mech.evaluate(ParentValues{parentIds, parentVals}, u);
        }
        values[i] = admit(spec.valueDomain[i], out, "value", spec, i, warnings);
    }
}

}  // namespace

bool ParentValues::contains(NodeId id) const noexcept {
    return std::find(ids.begin(), ids.end(), id) != ids.end();
}

double ParentValues::at(NodeId id) const {
    for (std::size_t k = 0; k < ids.size(); ++k)
        if (ids[k] == id) return values[k];
    throw InvalidArgument("mechanism asked for non-parent " + std::to_string(id));
}

const Vec& MessageMatrix::slot(NodeId source) const {
    for (std::size_t k = 0; k < sources.size(); ++k)
        if (sources[k] == source) return slots[k];
    throw InvalidArgument("no message slot for source " + std::to_string(source));
}

bool MessageMatrix::isZero(const Vec& m) noexcept {
    return std::all_of(m.begin(), m.end(), [](double x) { return x == 0.0; });
}

void PoscmSpec::finalize() {
    if (n == 0) throw InvalidArgument("spec needs at least one node");
    if (tau.size() != n) throw InvalidArgument("tau must list one rank per node");
    std::vector<NodeId> ord(n, n);
    for (NodeId i = 0; i < n; ++i) {
        if (tau[i] >= n || ord[tau[i]] != n) throw InvalidArgument("tau is not a permutation of 0..n-1");
        ord[tau[i]] = i;
    }
    auto sized = [&](std::size_t got, const char* what) {
        if (got != n) throw InvalidArgument(std::string("spec field '") + what + "' must have one entry per node");
    };
    sized(contextDomain.size(), "contextDomain");
    sized(valueDomain.size(), "valueDomain");
    sized(phi.size(), "phi");
    sized(gamma.size(), "gamma");
    if (names.empty())
        for (NodeId i = 0; i < n; ++i) names.push_back("V" + std::to_string(i));
    sized(names.size(), "names");
    if (noise.empty()) noise.assign(n, NoiseArity{});
    sized(noise.size(), "noise");
    if (contextMessageForm.empty()) contextMessageForm.assign(n, false);
    if (valueMessageForm.empty()) valueMessageForm.assign(n, false);
    sized(contextMessageForm.size(), "contextMessageForm");
    sized(valueMessageForm.size(), "valueMessageForm");
    if (!edgeProb && !rowSampler) throw InvalidArgument("spec needs a structure kernel");
    for (NodeId i = 0; i < n; ++i) {
        if (!phi[i].sample && !phi[i].messages)
            throw InvalidArgument("node " + names[i] + " has no context mechanism");
        if (contextMessageForm[i] && !phi[i].messages)
            throw InvalidArgument("node " + names[i] + " flagged message-form context without messages");
        if (!gamma[i]) throw InvalidArgument("node " + names[i] + " has no mechanism operator");
    }
    order_ = std::move(ord);
}

const std::vector<NodeId>& PoscmSpec::order() const {
    if (!finalized()) throw InvalidArgument("spec used before finalize()");
    return order_;
}

std::vector<NodeId> PoscmSpec::potentialParents(NodeId node) const {
    const auto& ord = order();
    return {ord.begin(), ord.begin() + static_cast<std::ptrdiff_t>(rank(node))};
}

std::vector<NodeId> PoscmSpec::laterNodes(NodeId node) const {
    const auto& ord = order();
    return {ord.begin() + static_cast<std::ptrdiff_t>(rank(node)) + 1, ord.end()};
}

std::string PoscmSpec::nodeName(NodeId node) const {
    if (node < names.size()) return names[node];
    return "#" + std::to_string(node);
}

std::optional<NodeId> PoscmSpec::nodeByName(const std::string& name) const {
    for (NodeId i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    return std::nullopt;
}

ExogenousDraw ExogenousDraw::sample(const PoscmSpec& spec, std::uint64_t seed, std::uint64_t replicate) {
    const std::size_t n = spec.n;
    if (!spec.finalized()) throw InvalidArgument("spec used before finalize()");
    std::vector<double> uA(n * n, 0.0);
    for (NodeId j = 0; j < n; ++j)
        for (NodeId i = 0; i < n; ++i)
            if (spec.precedes(j, i)) uA[j * n + i] = rng::uniform({seed, replicate, kTagEdge, j, i});
    auto fill = [&](std::uint64_t tag, auto arity) {
        std::vector<Vec> out(n);
        for (NodeId i = 0; i < n; ++i) {
            out[i].resize(arity(spec.noise[i]));
            for (std::size_t k = 0; k < out[i].size(); ++k) out[i][k] = rng::uniform({seed, replicate, tag, i, k});
        }
        return out;
    };
    return ExogenousDraw(n, std::move(uA), fill(kTagContext, [](const NoiseArity& a) { return a.context; }),
                         fill(kTagMechanism, [](const NoiseArity& a) { return a.mechanism; }),
                         fill(kTagValue, [](const NoiseArity& a) { return a.value; }), seed, replicate);
}

ExogenousDraw::ExogenousDraw(std::size_t n, std::vector<double> edgeUniforms, std::vector<Vec> contextNoise,
                             std::vector<Vec> mechanismNoise, std::vector<Vec> valueNoise, std::uint64_t seed,
                             std::uint64_t replicate)
    : n_(n),
      uA_(std::move(edgeUniforms)),
      uBeta_(std::move(contextNoise)),
      uF_(std::move(mechanismNoise)),
      uV_(std::move(valueNoise)),
      seed_(seed),
      replicate_(replicate) {
    if (uA_.size() != n * n || uBeta_.size() != n || uF_.size() != n || uV_.size() != n)
        throw InvalidArgument("exogenous draw arrays do not match node count");
}

std::uint64_t ExogenousDraw::id() const noexcept { return rng::hashKey({seed_, replicate_}); }

ExogenousDraw ExogenousDraw::withFreshValueNoise(std::uint64_t probeKey) const {
    ExogenousDraw out = *this;
    for (NodeId i = 0; i < n_; ++i)
        for (std::size_t k = 0; k < out.uV_[i].size(); ++k)
            out.uV_[i][k] = rng::uniform({seed_, replicate_, kTagProbe, probeKey, i, k});
    return out;
}

std::vector<NodeId> World::parents(NodeId target) const {
    std::vector<NodeId> out;
    for (NodeId j = 0; j < n; ++j)
        if (adjacency[j * n + target]) out.push_back(j);
    return out;
}

World generateStructure(const PoscmSpec& spec, std::shared_ptr<const ExogenousDraw> draw,
                        std::shared_ptr<const Regime> regime) {
    if (!draw) throw InvalidArgument("generate needs a draw");
    if (!regime) regime = std::make_shared<Regime>();
    const auto& order = spec.order();
    const std::size_t n = spec.n;
    if (draw->size() != n) throw InvalidArgument("draw does not match spec size");
    regime->validate(spec);

    World w;
    w.n = n;
    w.adjacency.assign(n * n, 0);
    w.context.assign(n, 0.0);
    w.mechanism.resize(n);
    w.draw = draw;
    w.regime = regime;

    std::vector<NodeId> parentIds;
    Vec parentCtx;
    for (std::size_t k = 0; k < n; ++k) {
        NodeId i = order[k];
        if (!spec.rowSampler) {
            for (std::size_t kk = 0; kk < k; ++kk) {
                NodeId j = order[kk];
                double p = spec.edgeProb(j, i, w.context[j]);
                if (!(p >= 0.0 && p <= 1.0))
                    throw DomainError("edge probability for " + spec.nodeName(j) + "->" + spec.nodeName(i) +
                                      " outside [0,1]");
                w.adjacency[j * n + i] = draw->edgeUniform(j, i) < p ? 1 : 0;
            }
        }
        double beta;
        if (auto b = regime->contextOverride(i)) {
            beta = *b;
        } else if (spec.contextMessageForm[i]) {
            const MessageForm& form = *spec.phi[i].messages;
            MessageMatrix mm = gatherMessages(spec, form, i, w.adjacency, w.context, *regime, true);
            beta = form.aggregate(mm, draw->contextNoise(i));
        } else {
            parentIds.clear();
            parentCtx.clear();
            for (std::size_t kk = 0; kk < k; ++kk) {
                NodeId j = order[kk];
                if (w.adjacency[j * n + i]) {
                    parentIds.push_back(j);
                    parentCtx.push_back(w.context[j]);
                }
            }
            beta = spec.phi[i].sample(ParentValues{parentIds, parentCtx}, draw->contextNoise(i));
        }
        w.context[i] = admit(spec.contextDomain[i], beta, "context", spec, i, &w.warnings);

        if (spec.rowSampler && k + 1 < n) {
            std::vector<NodeId> targets(order.begin() + static_cast<std::ptrdiff_t>(k) + 1, order.end());
            Vec uniforms;
            uniforms.reserve(targets.size());
            for (NodeId t : targets) uniforms.push_back(draw->edgeUniform(i, t));
            auto row = spec.rowSampler(i, w.context[i], targets, uniforms);
            if (row.size() != targets.size()) throw InvalidArgument("row sampler returned wrong row length");
            for (std::size_t t = 0; t < targets.size(); ++t) w.adjacency[i * n + targets[t]] = row[t] ? 1 : 0;
        }
    }

    for (std::size_t k = 0; k < n; ++k) {
        NodeId i = order[k];
        parentIds.clear();
        for (std::size_t kk = 0; kk < k; ++kk)
            if (w.adjacency[order[kk] * n + i]) parentIds.push_back(order[kk]);
        auto u = draw->mechanismNoise(i);
        Mechanism mech = spec.gamma[i](w.context[i], parentIds, u);
        if (!mech.evaluate && !mech.messages)
            throw InvalidArgument("mechanism operator of " + spec.nodeName(i) + " returned an empty handle");
        mech.context = w.context[i];
        mech.parents = parentIds;
        mech.noise.assign(u.begin(), u.end());
        w.mechanism[i] = std::move(mech);
    }
    return w;
}

void generateValues(const PoscmSpec& spec, World& world, const ExogenousDraw& noise, const Regime& regime) {
    if (regime.touchesPhaseOne())
        throw InvalidArgument("context-level interventions cannot be applied to a realized structure");
    regime.validate(spec);
    runValues(
        spec, world, world.value, &world.valueMessages, [&](NodeId i) { return noise.valueNoise(i); }, regime,
        spec.n, &world.warnings);
}

World generate(const PoscmSpec& spec, std::shared_ptr<const ExogenousDraw> draw,
               std::shared_ptr<const Regime> regime) {
    if (!regime) regime = std::make_shared<Regime>();
    World w = generateStructure(spec, draw, regime);
    runValues(
        spec, w, w.value, &w.valueMessages, [&](NodeId i) { return draw->valueNoise(i); }, *regime, spec.n,
        &w.warnings);
    return w;
}

World generate(const PoscmSpec& spec, const ExogenousDraw& draw, const Regime& regime) {
    return generate(spec, std::make_shared<ExogenousDraw>(draw), std::make_shared<Regime>(regime));
}

Channel Channel::identity() {
    return Channel{"identity", 0, [](double x, std::span<const double>) { return x; }};
}

Channel Channel::gaussian(double sigma) {
    if (!(sigma >= 0.0)) throw InvalidArgument("gaussian channel needs sigma >= 0");
    return Channel{"gaussian", 2, [sigma](double x, std::span<const double> u) {
                       return x + sigma * rng::normalFromUniforms(u[0], u[1]);
                   }};
}

Channel Channel::labelFlip(double rate, std::size_t labels) {
    if (!(rate >= 0.0 && rate <= 1.0) || labels < 2) throw InvalidArgument("label flip needs rate in [0,1], >=2 labels");
    return Channel{"label-flip", 2, [rate, labels](double x, std::span<const double> u) {
                       if (u[0] >= rate) return x;
                       auto shift = 1 + static_cast<std::size_t>(u[1] * static_cast<double>(labels - 1));
                       return static_cast<double>((static_cast<std::size_t>(x) + shift) % labels);
                   }};
}

MeasurementModel MeasurementModel::valuesOnly() {
    MeasurementModel om;
    om.included = {Symbol::Value};
    om.value = Channel::identity();
    return om;
}

MeasurementModel MeasurementModel::contextsAndValues() {
    MeasurementModel om = valuesOnly();
    om.included.insert(Symbol::Context);
    om.context = Channel::identity();
    return om;
}

MeasurementModel MeasurementModel::everything() {
    MeasurementModel om = contextsAndValues();
    om.included.insert(Symbol::Adjacency);
    om.adjacency = Channel::identity();
    return om;
}

void MeasurementModel::validate() const {
    if (includes(Symbol::Adjacency) && !adjacency) throw InvalidArgument("adjacency included without a channel");
    if (includes(Symbol::Context) && !context) throw InvalidArgument("context included without a channel");
    if (includes(Symbol::Value) && !value) throw InvalidArgument("value included without a channel");
}

Observation observe(const World& world, const MeasurementModel& om, std::uint64_t obsSeed) {
    om.validate();
    Observation obs;
    const std::uint64_t wid = world.id();
    Vec u;
    auto noiseFor = [&](const Channel& ch, std::uint64_t sym, std::uint64_t idx) -> std::span<const double> {
        u.resize(ch.noiseArity);
        for (std::size_t k = 0; k < ch.noiseArity; ++k) u[k] = rng::uniform({obsSeed, wid, kTagObserve, sym, idx, k});
        return u;
    };
    if (om.includes(Symbol::Adjacency)) {
        std::vector<std::uint8_t> a(world.adjacency.size(), 0);
        for (std::size_t idx = 0; idx < a.size(); ++idx) {
            double x = om.adjacency->apply(world.adjacency[idx], noiseFor(*om.adjacency, 0, idx));
            a[idx] = x >= 0.5 ? 1 : 0;
        }
        obs.adjacency = std::move(a);
    }
    if (om.includes(Symbol::Context)) {
        Vec c(world.n);
        for (NodeId i = 0; i < world.n; ++i) c[i] = om.context->apply(world.context[i], noiseFor(*om.context, 1, i));
        obs.context = std::move(c);
    }
    if (om.includes(Symbol::Value)) {
        Vec v(world.n);
        for (NodeId i = 0; i < world.n; ++i) v[i] = om.value->apply(world.value[i], noiseFor(*om.value, 2, i));
        obs.value = std::move(v);
    }
    return obs;
}

std::vector<WorldSample> sampleWorlds(const PoscmSpec& spec, const Regime& regime, const MeasurementModel& om,
                                      std::uint64_t seed, std::size_t count, unsigned threads) {
    if (count == 0) throw InvalidArgument("sampleWorlds needs count >= 1");
    om.validate();
    auto regimePtr = std::make_shared<const Regime>(regime);
    regimePtr->validate(spec);
    const std::uint64_t obsSeed = rng::hashKey({seed, kTagObserve});
    std::vector<WorldSample> out(count);
    parallelFor(count, threads, [&](std::size_t k) {
        auto draw = std::make_shared<const ExogenousDraw>(ExogenousDraw::sample(spec, seed, k));
        out[k].world = generate(spec, draw, regimePtr);
        out[k].observation = observe(out[k].world, om, obsSeed);
    });
    return out;
}

InstanceHandle::InstanceHandle(std::shared_ptr<const PoscmSpec> spec, std::shared_ptr<const World> frozen)
    : spec_(std::move(spec)), frozen_(std::move(frozen)) {
    if (!spec_ || !frozen_) throw InvalidArgument("instance needs a spec and a frozen structure");
}

World InstanceHandle::probe(const Regime& regime, std::uint64_t probeIndex) const {
    if (regime.touchesPhaseOne()) throw InvalidArgument("probes of a frozen instance accept value-level regimes only");
    World w = *frozen_;
    auto noise = std::make_shared<const ExogenousDraw>(frozen_->draw->withFreshValueNoise(probeIndex));
    w.draw = noise;
    w.regime = std::make_shared<const Regime>(regime);
    generateValues(*spec_, w, *noise, regime);
    return w;
}

double InstanceHandle::probeNode(NodeId node, const Regime& regime, std::uint64_t probeIndex) const {
    if (regime.touchesPhaseOne()) throw InvalidArgument("probes of a frozen instance accept value-level regimes only");
    if (node >= spec_->n) throw InvalidArgument("probe of unknown node");
    const ExogenousDraw& base = *frozen_->draw;
    const std::uint64_t seed = base.seed(), rep = base.replicate();
    thread_local Vec buffer;
    thread_local Vec values;
    runValues(
        *spec_, *frozen_, values, nullptr,
        [&](NodeId i) -> std::span<const double> {
            buffer.resize(spec_->noise[i].value);
            for (std::size_t k = 0; k < buffer.size(); ++k)
                buffer[k] = rng::uniform({seed, rep, kTagProbe, probeIndex, i, k});
            return buffer;
        },
        regime, spec_->rank(node), nullptr);
    return values[node];
}

InstanceHandle freezeInstance(std::shared_ptr<const PoscmSpec> spec, std::uint64_t seed, std::uint64_t replicate,
                              const Regime& phaseOne) {
    if (!spec) throw InvalidArgument("freezeInstance needs a spec");
    auto draw = std::make_shared<const ExogenousDraw>(ExogenousDraw::sample(*spec, seed, replicate));
    auto frozen = std::make_shared<World>(
        generateStructure(*spec, draw, std::make_shared<const Regime>(phaseOne.contextLevelPart())));
    return InstanceHandle(std::move(spec), std::move(frozen));
}

}  // namespace poscm
