#include "poscm/spec_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "poscm/error.hpp"
#include "poscm/identify.hpp"
#include "poscm/messages.hpp"
#include "poscm/rng.hpp"

namespace poscm {

namespace {

template <class T>
T field(const Json& doc, const char* key, T fallback) {
    if (!doc.is_object() || !doc.contains(key)) return fallback;
    try {
        return doc.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

template <class T>
T required(const Json& doc, const char* key) {
    if (!doc.is_object() || !doc.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
    return field<T>(doc, key, T{});
}

const Json& perNode(const Json& entry, std::size_t node, std::size_t n, const char* what) {
    if (!entry.is_array()) return entry;
    if (entry.size() != n) throw ConfigError(std::string(what) + " list must have one entry per node");
    return entry[node];
}

SynapseParams synapseFromJson(const Json& d, SynapseParams p) {
    p.gMax = field(d, "gMax", p.gMax);
    p.vThr = field(d, "vThr", p.vThr);
    p.vSlope = field(d, "vSlope", p.vSlope);
    p.tauSyn = field(d, "tauSyn", p.tauSyn);
    p.eRev = field(d, "eRev", p.eRev);
    p.signInverting = field(d, "signInverting", p.signInverting);
    return p;
}

Json synapseToJson(const SynapseParams& p) {
    return {{"gMax", p.gMax},   {"vThr", p.vThr}, {"vSlope", p.vSlope},
            {"tauSyn", p.tauSyn}, {"eRev", p.eRev}, {"signInverting", p.signInverting}};
}

NodeId nodeRef(const Json& ref, const PoscmSpec& spec) {
    if (ref.is_number_unsigned() || ref.is_number_integer()) {
        auto k = ref.get<long long>();
        if (k < 0 || static_cast<std::size_t>(k) >= spec.n) throw ConfigError("node index out of range");
        return static_cast<NodeId>(k);
    }
    if (ref.is_string()) {
        if (auto id = spec.nodeByName(ref.get<std::string>())) return *id;
        throw ConfigError("unknown node '" + ref.get<std::string>() + "'");
    }
    throw ConfigError("node reference must be an index or a name");
}

double encodedValue(const Json& v, const Domain& d) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        if (auto x = d.parse(v.get<std::string>())) return *x;
        throw ConfigError("'" + v.get<std::string>() + "' is not in the domain");
    }
    throw ConfigError("value must be a number or a label");
}

Vec numbers(const Json& d, const char* what) {
    if (d.is_number()) return {d.get<double>()};
    if (!d.is_array()) throw ConfigError(std::string(what) + " must be a number or a list of numbers");
    Vec out;
    for (const auto& x : d) {
        if (!x.is_number()) throw ConfigError(std::string(what) + " must contain numbers only");
        out.push_back(x.get<double>());
    }
    return out;
}

// Per-label parameter: a scalar applies to every label.
double perLabel(const Vec& xs, double context) {
    if (xs.size() == 1) return xs[0];
    auto k = static_cast<std::size_t>(std::llround(context));
    if (k >= xs.size()) throw ConfigError("per-context parameter list shorter than the context domain");
    return xs[k];
}

std::shared_ptr<MessageForm> presenceForm(std::function<double(const MessageMatrix&, std::span<const double>)> agg) {
    auto f = std::make_shared<MessageForm>();
    f->dim = 2;
    f->message = [](NodeId, double v) { return Vec{1.0, v}; };
    f->aggregate = std::move(agg);
    return f;
}

MechanismOperator messageOperator(std::function<std::shared_ptr<const MessageForm>(double)> factory, std::string tag) {
    return [factory, tag](double context, std::span<const NodeId>, std::span<const double>) {
        Mechanism m;
        m.context = context;
        m.tag = tag;
        m.messages = factory(context);
        return m;
    };
}

EdgeProbability alphaFromJson(const Json& a, const PoscmSpec& s) {
    if (a.contains("constant")) {
        double p = a.at("constant").get<double>();
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("edge probability outside [0, 1]");
        return [p](NodeId, NodeId, double) { return p; };
    }
    if (a.contains("table")) {
        const std::size_t n = s.n;
        double fallback = field(a, "default", 0.0);
        std::vector<Vec> table(n * n, Vec{fallback});
        for (const auto& row : a.at("table")) {
            NodeId j = nodeRef(row.at("source"), s), i = nodeRef(row.at("target"), s);
            if (!s.precedes(j, i)) throw ConfigError("edge table entry does not follow tau");
            Vec p = numbers(row.at("p"), "edge probability");
            for (double x : p)
                if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("edge probability outside [0, 1]");
            table[j * n + i] = p;
        }
        return [table, n](NodeId j, NodeId i, double b) { return perLabel(table[j * n + i], b); };
    }
    if (a.contains("expr")) {
        const Json& e = a.at("expr");
        auto name = required<std::string>(e, "name");
        double c0 = field(e, "a", 0.0), c1 = field(e, "b", 0.0);
        if (name == "affine")
            return [c0, c1](NodeId, NodeId, double b) { return std::clamp(c0 + c1 * b, 0.0, 1.0); };
        if (name == "logistic")
            return [c0, c1](NodeId, NodeId, double b) { return 1.0 / (1.0 + std::exp(-(c0 + c1 * b))); };
        throw ConfigError("unknown edge-probability expression '" + name + "'");
    }
    throw ConfigError("alpha needs one of constant, table, expr");
}

void phiFromJson(const Json& d, NodeId i, PoscmSpec& s) {
    auto name = required<std::string>(d, "name");
    const Domain dom = s.contextDomain[i];
    ContextMechanism cm;
    if (name == "fixed") {
        double v = encodedValue(d.at("value"), dom);
        cm.sample = [v](const ParentValues&, std::span<const double>) { return v; };
    } else if (name == "categorical") {
        if (!dom.isFinite()) throw ConfigError("categorical context needs a finite domain");
        Vec probs = numbers(d.at("probs"), "probs");
        if (probs.size() != dom.size()) throw ConfigError("categorical probs must match the context labels");
        double total = std::accumulate(probs.begin(), probs.end(), 0.0);
        if (!(total > 0.0)) throw ConfigError("categorical probs sum to zero");
        cm.sample = [probs, total](const ParentValues&, std::span<const double> u) {
            double acc = 0.0;
            for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
                acc += probs[k] / total;
                if (u[0] < acc) return static_cast<double>(k);
            }
            return static_cast<double>(probs.size() - 1);
        };
    } else if (name == "majority") {
        if (!dom.isFinite() || dom.size() != 2) throw ConfigError("majority context needs two labels");
        double flip = field(d, "flip", 0.1), prior = field(d, "prior", 0.5);
        s.noise[i].context = 2;
        cm.sample = [flip, prior](const ParentValues& pc, std::span<const double> u) {
            if (pc.size() == 0) return u[1] < prior ? 1.0 : 0.0;
            std::size_t ones = 0;
            for (double c : pc.values) ones += c >= 0.5 ? 1 : 0;
            std::size_t zeros = pc.size() - ones;
            double label = ones == zeros ? (u[1] < 0.5 ? 1.0 : 0.0) : (ones > zeros ? 1.0 : 0.0);
            return u[0] < flip ? 1.0 - label : label;
        };
    } else if (name == "uniform" || name == "parentMean") {
        if (dom.isFinite()) throw ConfigError(name + " context needs an interval domain");
        double lo = dom.lo(), hi = dom.hi();
        bool mean = name == "parentMean";
        cm.sample = [lo, hi, mean](const ParentValues& pc, std::span<const double> u) {
            double x = lo + (hi - lo) * u[0];
            if (!mean || pc.size() == 0) return x;
            double m = std::accumulate(pc.values.begin(), pc.values.end(), 0.0) / static_cast<double>(pc.size());
            return 0.5 * (m + x);
        };
    } else {
        throw ConfigError("unknown context mechanism '" + name + "'");
    }
    s.phi[i] = std::move(cm);
}

void gammaFromJson(const Json& d, NodeId i, PoscmSpec& s) {
    auto name = required<std::string>(d, "name");
    if (name == "parity" || name == "bernoulli") {
        Vec amp = numbers(d.at(name == "parity" ? "amp" : "p"), name.c_str());
        bool parity = name == "parity";
        s.gamma[i] = messageOperator(
            [amp, parity](double context) -> std::shared_ptr<const MessageForm> {
                double a = perLabel(amp, context);
                return presenceForm([a, parity](const MessageMatrix& m, std::span<const double> u) {
                    if (!parity) return u[0] < a ? 1.0 : 0.0;
                    int count = 0;
                    for (const auto& slot : m.slots)
                        if (slot[0] != 0.0 && slot[1] >= 0.5) ++count;
                    return u[0] < 0.5 + a * (count % 2 ? -1.0 : 1.0) ? 1.0 : 0.0;
                });
            },
            name);
    } else if (name == "additive") {
        ScalarFn fn = d.contains("fn") ? scalarFnFromJson(d.at("fn")) : makeScalarFn("identity");
        double w = field(d, "weight", 1.0), gain = field(d, "contextGain", 0.0);
        double sigma = field(d, "sigma", 0.0), offset = field(d, "offset", 0.0);
        if (!(sigma >= 0.0)) throw ConfigError("additive mechanism needs sigma >= 0");
        s.noise[i].value = 2;
        s.gamma[i] = messageOperator(
            [fn, w, gain, sigma, offset](double context) -> std::shared_ptr<const MessageForm> {
                double base = offset + gain * context;
                auto f = std::make_shared<MessageForm>();
                f->message = [fn, w](NodeId, double v) { return Vec{w * fn(v)}; };
                f->aggregate = [base, sigma](const MessageMatrix& m, std::span<const double> u) {
                    double acc = base + (sigma > 0.0 ? sigma * rng::normalFromUniforms(u[0], u[1]) : 0.0);
                    for (const auto& slot : m.slots) acc += slot[0];
                    return acc;
                };
                return f;
            },
            "additive");
    } else if (name == "kas") {
        KasForm form;
        if (d.contains("Psi")) form.Psi = scalarFnFromJson(d.at("Psi"));
        if (d.contains("psi")) form.psi = scalarFnFromJson(d.at("psi"));
        form.eta = field(d, "eta", 0.0);
        form.lambdaU = field(d, "lambdaU", 0.0);
        auto sources = s.potentialParents(i);
        form.lambdas = d.contains("lambdas") ? numbers(d.at("lambdas"), "lambdas") : Vec(sources.size(), 1.0);
        if (form.lambdas.size() != sources.size())
            throw ConfigError("kas lambdas must have one entry per potential parent");
        auto shared = kasMessageForm(form, sources);
        s.gamma[i] = messageOperator([shared](double) { return shared; }, "kas");
    } else {
        throw ConfigError("unknown value mechanism '" + name + "'");
    }
}

SpecPtr genericModel(const Json& doc) {
    const std::size_t n = required<std::size_t>(doc, "n");
    if (n == 0) throw ConfigError("model needs n >= 1");
    PoscmSpec s;
    s.n = n;
    s.tau = field(doc, "tau", std::vector<std::size_t>{});
    if (s.tau.empty()) {
        s.tau.resize(n);
        std::iota(s.tau.begin(), s.tau.end(), std::size_t{0});
    }
    s.names = field(doc, "names", std::vector<std::string>{});
    if (s.names.empty())
        for (NodeId i = 0; i < n; ++i) s.names.push_back("X" + std::to_string(i));
    if (s.tau.size() != n || s.names.size() != n) throw ConfigError("tau and names need one entry per node");

    const Json domains = field(doc, "domains", Json::object());
    s.contextDomain.assign(n, Domain::finite({"*"}));
    s.valueDomain.assign(n, Domain::binary());
    for (NodeId i = 0; i < n; ++i) {
        if (domains.contains("context")) s.contextDomain[i] = domainFromJson(perNode(domains.at("context"), i, n, "context domain"));
        if (domains.contains("value")) s.valueDomain[i] = domainFromJson(perNode(domains.at("value"), i, n, "value domain"));
    }
    s.noise.assign(n, NoiseArity{});
    s.valueMessageForm.assign(n, true);
    s.contextMessageForm.assign(n, false);
    s.phi.assign(n, ContextMechanism{[](const ParentValues&, std::span<const double>) { return 0.0; }, nullptr});
    s.gamma.resize(n);
    // finalize() needs the order for potential parents; run it twice.
    s.edgeProb = [](NodeId, NodeId, double) { return 0.0; };
    for (NodeId i = 0; i < n; ++i)
        s.gamma[i] = [](double, std::span<const NodeId>, std::span<const double>) { return Mechanism{}; };
    s.finalize();
    s.edgeProb = alphaFromJson(required<Json>(doc, "alpha"), s);
    if (doc.contains("phi"))
        for (NodeId i = 0; i < n; ++i) phiFromJson(perNode(doc.at("phi"), i, n, "phi"), i, s);
    const Json gamma = required<Json>(doc, "gamma");
    for (NodeId i = 0; i < n; ++i) gammaFromJson(perNode(gamma, i, n, "gamma"), i, s);
    s.finalize();
    return std::make_shared<const PoscmSpec>(std::move(s));
}

SpecPtr zooModel(const std::string& name, const Json& p) {
    if (name == "twoNodeConfounding") return twoNodeConfounding(field(p, "p", 0.5), field(p, "q0", 0.2), field(p, "q1", 0.8));
    if (name == "calibratedConfounding") {
        auto pair = calibratedConfoundingPair(field(p, "p", 0.5), field(p, "q0", 0.2), field(p, "q1", 0.8),
                                              field(p, "pPrime", 0.8));
        return field<std::string>(p, "side", "base") == "prime" ? pair.mPrime : pair.m;
    }
    if (name == "distributiveToy") {
        auto side = field<std::string>(p, "side", "LHS");
        if (side != "LHS" && side != "RHS") throw ConfigError("distributiveToy side must be LHS or RHS");
        return distributiveToy(side == "LHS" ? ToySide::LHS : ToySide::RHS).spec;
    }
    if (name == "discrete") {
        DiscreteOptions o;
        o.n = field(p, "n", o.n);
        o.seed = field(p, "seed", o.seed);
        o.edgeLo = field(p, "edgeLo", o.edgeLo);
        o.edgeHi = field(p, "edgeHi", o.edgeHi);
        o.ampLo = field(p, "ampLo", o.ampLo);
        o.ampHi = field(p, "ampHi", o.ampHi);
        o.rootLo = field(p, "rootLo", o.rootLo);
        o.rootHi = field(p, "rootHi", o.rootHi);
        o.flip = field(p, "flip", o.flip);
        return discretePoscm(o).spec;
    }
    if (name == "realContextChain")
        return realContextChain(field<std::size_t>(p, "n", 4), field(p, "w", 0.5), field(p, "sigma", 0.3));
    if (name == "channel") {
        auto kind = field<std::string>(p, "kind", "identity");
        if (kind != "identity" && kind != "tanh") throw ConfigError("channel kind must be identity or tanh");
        return channelModel(kind == "identity" ? ChannelKind::Identity : ChannelKind::Tanh, field(p, "sigma", 0.1));
    }
    throw ConfigError("unknown zoo model '" + name + "'");
}

}  // namespace

Json readJsonFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

LayeredNetSpec layeredNetFromJson(const Json& doc) {
    if (!doc.is_object()) throw ConfigError("layered network must be a JSON object");
    LayeredNetSpec net;
    auto preset = field<std::string>(doc, "preset", "");
    if (preset == "retina") net = defaultRetina();
    else if (!preset.empty()) throw ConfigError("unknown layered preset '" + preset + "'");
    try {
        if (doc.contains("layers")) {
            net.layers.clear();
            for (const auto& l : doc.at("layers")) {
                Population p{required<std::string>(l, "name"), required<std::size_t>(l, "size"), {},
                             field(l, "spiking", false)};
                for (const auto& t : required<Json>(l, "types"))
                    p.types.push_back({required<std::string>(t, "name"), field(t, "proportion", 1.0)});
                net.layers.push_back(std::move(p));
            }
        }
        if (doc.contains("projections")) {
            net.projections.clear();
            for (const auto& pj : doc.at("projections")) {
                Projection p{required<std::string>(pj, "pre"), required<std::string>(pj, "post"),
                             required<double>(pj, "probability"), {}};
                const Json synapses = required<Json>(pj, "synapse");
                for (const auto& [type, syn] : synapses.items())
                    p.synapse[type] = synapseFromJson(syn, SynapseParams{});
                net.projections.push_back(std::move(p));
            }
        }
        if (doc.contains("soma")) {
            const Json& s = doc.at("soma");
            SomaParams& m = net.soma;
            m.gLeak = field(s, "gLeak", m.gLeak);
            m.eLeak = field(s, "eLeak", m.eLeak);
            m.capacitance = field(s, "capacitance", m.capacitance);
            m.leakJitter = field(s, "leakJitter", m.leakJitter);
            m.noise = field(s, "noise", m.noise);
            m.vSpike = field(s, "vSpike", m.vSpike);
            m.vReset = field(s, "vReset", m.vReset);
            m.spikePeak = field(s, "spikePeak", m.spikePeak);
            m.spikeWidth = field(s, "spikeWidth", m.spikeWidth);
            m.refractory = field(s, "refractory", m.refractory);
        }
        if (doc.contains("stimulus")) {
            const Json& s = doc.at("stimulus");
            net.stimulus.amplitudePa = field(s, "amplitudePa", net.stimulus.amplitudePa);
            net.stimulus.population = field(s, "population", net.stimulus.population);
            net.stimulus.onset = field(s, "onset", net.stimulus.onset);
        }
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("layered network: ") + e.what());
    }
    net.T = field(doc, "T", net.T);
    net.dt = field(doc, "dt", net.dt);
    net.withinLayerNoise = field(doc, "withinLayerNoise", net.withinLayerNoise);
    net.validate();
    return net;
}

Json layeredNetToJson(const LayeredNetSpec& net) {
    Json layers = Json::array(), projections = Json::array();
    for (const auto& l : net.layers) {
        Json types = Json::array();
        for (const auto& t : l.types) types.push_back({{"name", t.name}, {"proportion", t.proportion}});
        layers.push_back({{"name", l.name}, {"size", l.size}, {"types", types}, {"spiking", l.spiking}});
    }
    for (const auto& p : net.projections) {
        Json syn = Json::object();
        for (const auto& [type, s] : p.synapse) syn[type] = synapseToJson(s);
        projections.push_back({{"pre", p.pre}, {"post", p.post}, {"probability", p.probability}, {"synapse", syn}});
    }
    const SomaParams& m = net.soma;
    return {{"layers", layers},
            {"projections", projections},
            {"soma",
             {{"gLeak", m.gLeak}, {"eLeak", m.eLeak}, {"capacitance", m.capacitance}, {"leakJitter", m.leakJitter},
              {"noise", m.noise}, {"vSpike", m.vSpike}, {"vReset", m.vReset}, {"spikePeak", m.spikePeak},
              {"spikeWidth", m.spikeWidth}, {"refractory", m.refractory}}},
            {"stimulus",
             {{"amplitudePa", net.stimulus.amplitudePa}, {"population", net.stimulus.population},
              {"onset", net.stimulus.onset}}},
            {"T", net.T},
            {"dt", net.dt},
            {"withinLayerNoise", net.withinLayerNoise}};
}

Domain domainFromJson(const Json& doc) {
    if (doc.is_string() && doc.get<std::string>() == "binary") return Domain::binary();
    if (doc.is_object() && doc.contains("labels")) {
        auto labels = doc.at("labels").get<std::vector<std::string>>();
        if (labels.empty()) throw ConfigError("finite domain needs labels");
        return Domain::finite(std::move(labels));
    }
    if (doc.is_object() && doc.contains("interval")) {
        Vec b = numbers(doc.at("interval"), "interval");
        if (b.size() != 2 || !(b[0] < b[1])) throw ConfigError("interval needs [lo, hi] with lo < hi");
        return Domain::interval(b[0], b[1]);
    }
    throw ConfigError("domain must be \"binary\", {labels} or {interval}");
}

Json domainToJson(const Domain& d) {
    if (d.isFinite()) return {{"labels", d.labels()}};
    return {{"interval", {d.lo(), d.hi()}}};
}

LoadedModel modelFromJson(const Json& doc) {
    if (!doc.is_object()) throw ConfigError("model document must be a JSON object");
    try {
        if (doc.contains("layers") || doc.contains("preset")) {
            LayeredNetSpec net = layeredNetFromJson(doc);
            SpecPtr spec = layeredView(net).spec;
            return {spec, net, "layered"};
        }
        if (doc.contains("zoo")) {
            auto name = required<std::string>(doc, "zoo");
            return {zooModel(name, field(doc, "params", Json::object())), std::nullopt, name};
        }
        return {genericModel(doc), std::nullopt, "table"};
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("model document: ") + e.what());
    }
}

ScalarFn scalarFnFromJson(const Json& doc) {
    if (doc.is_string()) return makeScalarFn(doc.get<std::string>());
    return makeScalarFn(required<std::string>(doc, "name"), doc.contains("params") ? numbers(doc.at("params"), "params") : Vec{});
}

Json scalarFnToJson(const ScalarFn& fn) { return {{"name", fn.name}, {"params", fn.params}}; }

Regime regimeFromJson(const Json& doc, const PoscmSpec& spec) {
    try {
        Regime r(field<std::string>(doc, "label", ""));
        for (const auto& iv : field(doc, "interventions", Json::array())) {
            auto type = required<std::string>(iv, "type");
            if (type == "VNode" || type == "BetaNode") {
                NodeId node = nodeRef(iv.at("target"), spec);
                if (type == "VNode") r.add(VNode{node, encodedValue(iv.at("value"), spec.valueDomain[node])});
                else r.add(BetaNode{node, encodedValue(iv.at("value"), spec.contextDomain[node])});
                continue;
            }
            if (type != "VEdge" && type != "BetaEdge") throw ConfigError("unknown intervention type '" + type + "'");
            NodeId j = nodeRef(iv.at("source"), spec), i = nodeRef(iv.at("target"), spec);
            EdgeReplacement rep = EdgeReplacement::clamp({});
            if (iv.contains("clamp")) {
                rep = EdgeReplacement::clamp(numbers(iv.at("clamp"), "clamp"));
            } else if (iv.contains("replacement")) {
                std::vector<ScalarFn> parts;
                for (const auto& ref : iv.at("replacement")) parts.push_back(scalarFnFromJson(ref));
                Json refs = Json::array();
                for (const auto& p : parts) refs.push_back(scalarFnToJson(p));
                rep = EdgeReplacement::function(refs.dump(), [parts](double x) {
                    Vec m;
                    for (const auto& p : parts) m.push_back(p(x));
                    return m;
                });
            } else {
                throw ConfigError("edge intervention needs clamp or replacement");
            }
            if (type == "VEdge") r.add(VEdge{j, i, rep});
            else r.add(BetaEdge{j, i, rep});
        }
        return r;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("regime: ") + e.what());
    }
}

Json regimeToJson(const Regime& regime, const PoscmSpec& spec) {
    Json list = Json::array();
    auto edge = [&](const char* type, NodeId j, NodeId i, const EdgeReplacement& rep) {
        Json e{{"type", type}, {"source", spec.nodeName(j)}, {"target", spec.nodeName(i)}};
        if (rep.isClamp()) e["clamp"] = *rep.clampValue();
        else e["replacement"] = Json::parse(rep.name());
        return e;
    };
    for (const auto& iv : regime.interventions()) {
        if (const auto* v = std::get_if<VNode>(&iv))
            list.push_back({{"type", "VNode"}, {"target", spec.nodeName(v->node)}, {"value", v->value}});
        else if (const auto* b = std::get_if<BetaNode>(&iv))
            list.push_back({{"type", "BetaNode"}, {"target", spec.nodeName(b->node)}, {"value", b->value}});
        else if (const auto* e = std::get_if<VEdge>(&iv))
            list.push_back(edge("VEdge", e->source, e->target, e->replacement));
        else if (const auto* be = std::get_if<BetaEdge>(&iv))
            list.push_back(edge("BetaEdge", be->source, be->target, be->replacement));
    }
    return {{"label", regime.label()}, {"interventions", list}};
}

std::vector<Regime> regimesFromJson(const Json& list, const PoscmSpec& spec) {
    if (!list.is_array()) throw ConfigError("regimes must be a list");
    std::vector<Regime> out;
    for (const auto& r : list) out.push_back(regimeFromJson(r, spec));
    return out;
}

}  // namespace poscm
