#include "poscm/layered.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "poscm/error.hpp"
#include "poscm/rng.hpp"

namespace poscm {

void SynapseParams::validate() const {
    if (!(vSlope > 0.0)) throw ConfigError("synapse vSlope must be positive");
    if (!(tauSyn > 0.0)) throw ConfigError("synapse tauSyn must be positive");
    if (!(gMax >= 0.0)) throw ConfigError("synapse gMax must be non-negative");
}

double synapseSInf(double vPre, const SynapseParams& p) {
    return std::max(0.0, std::tanh((vPre - p.vThr) / p.vSlope));
}

double synapseStep(double s, double vPre, const SynapseParams& p, double dt) {
    double sInf = synapseSInf(vPre, p);
    return s + dt * (sInf - s) / (p.tauSyn * std::max(1.0 - sInf, kKineticsFloor));
}

double synapticCurrent(double s, double vPost, const SynapseParams& p) {
    double i = p.gMax * s * (vPost - p.eRev);
    return p.signInverting ? i : -i;
}

void LayeredNetSpec::validate() const {
    if (layers.empty()) throw ConfigError("layered network needs at least one layer");
    if (!(dt > 0.0) || !(T >= dt)) throw ConfigError("layered network needs dt > 0 and T >= dt");
    if (!(soma.gLeak > 0.0) || !(soma.capacitance > 0.0)) throw ConfigError("soma needs positive gLeak and capacitance");
    if (!(soma.spikeWidth > 0.0) || !(soma.refractory >= 0.0) || !(soma.vReset < soma.vSpike))
        throw ConfigError("soma spike needs spikeWidth > 0, refractory >= 0 and vReset < vSpike");
    for (const auto& l : layers) {
        if (l.types.empty()) throw ConfigError("layer " + l.name + " has no cell types");
        double total = 0.0;
        for (const auto& t : l.types) {
            if (!(t.proportion >= 0.0)) throw ConfigError("negative type proportion in layer " + l.name);
            total += t.proportion;
        }
        if (!(total > 0.0)) throw ConfigError("type proportions of layer " + l.name + " sum to zero");
    }
    for (const auto& p : projections) {
        std::size_t a = layerIndex(p.pre), b = layerIndex(p.post);
        if (a >= b) throw ConfigError("projection " + p.pre + "->" + p.post + " does not follow the layer order");
        if (!(p.probability >= 0.0 && p.probability <= 1.0))
            throw ConfigError("projection probability outside [0, 1]");
        for (const auto& t : layers[b].types) {
            auto it = p.synapse.find(t.name);
            if (it == p.synapse.end())
                throw ConfigError("projection " + p.pre + "->" + p.post + " lacks synapse parameters for " + t.name);
            it->second.validate();
        }
    }
    layerIndex(stimulus.population);
}

std::size_t LayeredNetSpec::cellCount() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.size;
    return n;
}

std::size_t LayeredNetSpec::layerIndex(const std::string& name) const {
    for (std::size_t k = 0; k < layers.size(); ++k)
        if (layers[k].name == name) return k;
    throw ConfigError("unknown layer " + name);
}

const Projection* LayeredNetSpec::projection(const std::string& pre, const std::string& post) const {
    for (const auto& p : projections)
        if (p.pre == pre && p.post == post) return &p;
    return nullptr;
}

LayeredNetSpec defaultRetina() {
    LayeredNetSpec net;
    net.layers = {
        {"PR", 8, {{"rod", 0.5}, {"cone", 0.5}}, false},
        {"HZ", 4, {{"H1", 1.0}}, false},
        {"BC", 16, {{"ON-BC", 0.5}, {"OFF-BC", 0.5}}, false},
        {"AC", 4, {{"AII", 1.0}}, false},
        {"RGC", 12, {{"ON", 0.5}, {"OFF", 0.5}}, true},
    };
    SynapseParams excite;
    SynapseParams inhibit{.gMax = 0.001, .eRev = -70.0};
    SynapseParams onBc{.vThr = -40.0, .signInverting = true};
    SynapseParams offBc{.vThr = -42.0};
    net.projections = {
        {"PR", "HZ", 0.5, {{"H1", excite}}},
        {"PR", "BC", 0.5, {{"ON-BC", onBc}, {"OFF-BC", offBc}}},
        {"HZ", "BC", 0.3, {{"ON-BC", inhibit}, {"OFF-BC", inhibit}}},
        {"BC", "AC", 0.5, {{"AII", excite}}},
        {"BC", "RGC", 0.5, {{"ON", excite}, {"OFF", excite}}},
        {"AC", "RGC", 0.3, {{"ON", inhibit}, {"OFF", inhibit}}},
    };
    net.soma = SomaParams{.gLeak = 0.02, .eLeak = -45.0, .capacitance = 0.2, .vSpike = -40.0, .vReset = -45.0};
    return net;
}

std::vector<NodeId> LayeredView::cellsOf(const std::string& layer, const LayeredNetSpec& net) const {
    return layerCells.at(net.layerIndex(layer));
}

namespace {

double stimulusCurrent(const LayeredNetSpec& net, std::size_t layer) {
    return net.layers[layer].name == net.stimulus.population ? net.stimulus.amplitudePa * 1e-3 : 0.0;
}

double jitteredLeak(const LayeredNetSpec& net, double u) { return net.soma.eLeak + (2.0 * u - 1.0) * net.soma.leakJitter; }

const SynapseParams& synapseFor(const LayeredNetSpec& net, std::size_t preLayer, std::size_t postLayer,
                                std::size_t postType) {
    const Projection* p = net.projection(net.layers[preLayer].name, net.layers[postLayer].name);
    if (!p) throw ConfigError("no projection between realized cells");
    return p->synapse.at(net.layers[postLayer].types.at(postType).name);
}

}  // namespace

LayeredView layeredView(const LayeredNetSpec& net) {
    net.validate();
    LayeredView view;
    std::vector<std::string> names;
    std::vector<Domain> contexts;
    view.layerCells.resize(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        std::vector<std::string> labels;
        for (const auto& t : net.layers[l].types) labels.push_back(t.name);
        for (std::size_t k = 0; k < net.layers[l].size; ++k) {
            view.layerCells[l].push_back(view.cells.size());
            view.cells.push_back({l, k});
            names.push_back(net.layers[l].name + "[" + std::to_string(k) + "]");
            contexts.push_back(Domain::finite(labels));
        }
    }
    const std::size_t n = view.cells.size();
    if (n == 0) throw ConfigError("layered network has no cells");
    PoscmSpec s;
    s.n = n;
    s.tau.resize(n);
    std::iota(s.tau.begin(), s.tau.end(), std::size_t{0});
    s.names = names;
    s.contextDomain = contexts;
    s.valueDomain.assign(n, Domain::interval(-500.0, 500.0));
    s.noise.assign(n, NoiseArity{});
    s.contextMessageForm.assign(n, false);
    s.valueMessageForm.assign(n, false);
    auto cells = view.cells;
    auto netCopy = std::make_shared<const LayeredNetSpec>(net);
    s.edgeProb = [cells, netCopy](NodeId j, NodeId i, double) {
        const auto& lj = netCopy->layers[cells[j].layer];
        const auto& li = netCopy->layers[cells[i].layer];
        const Projection* p = netCopy->projection(lj.name, li.name);
        return p ? p->probability : 0.0;
    };
    s.phi.resize(n);
    s.gamma.resize(n);
    for (NodeId i = 0; i < n; ++i) {
        Vec cdf;
        double acc = 0.0, total = 0.0;
        for (const auto& t : net.layers[cells[i].layer].types) total += t.proportion;
        for (const auto& t : net.layers[cells[i].layer].types) cdf.push_back(acc += t.proportion / total);
        s.phi[i].sample = [cdf](const ParentValues&, std::span<const double> u) {
            auto it = std::upper_bound(cdf.begin(), cdf.end(), u[0]);
            return static_cast<double>(std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1));
        };
        s.gamma[i] = [cells, netCopy, i](double context, std::span<const NodeId> parents, std::span<const double> noise) {
            Mechanism m;
            m.tag = "steady-state";
            std::vector<SynapseParams> syn;
            for (NodeId j : parents)
                syn.push_back(synapseFor(*netCopy, cells[j].layer, cells[i].layer, static_cast<std::size_t>(context)));
            const double eL = jitteredLeak(*netCopy, noise.empty() ? 0.5 : noise[0]);
            const double iStim = stimulusCurrent(*netCopy, cells[i].layer);
            const double gL = netCopy->soma.gLeak;
            m.evaluate = [syn, eL, iStim, gL](const ParentValues& pv, std::span<const double>) {
                double num = gL * eL + iStim, den = gL;
                for (std::size_t k = 0; k < syn.size(); ++k) {
                    double gs = syn[k].gMax * synapseSInf(pv.values[k], syn[k]);
                    double sign = syn[k].signInverting ? 1.0 : -1.0;
                    num -= sign * gs * syn[k].eRev;
                    den -= sign * gs;
                }
                if (!(den > 0.0)) return 500.0;
                return std::clamp(num / den, -500.0, 500.0);
            };
            return m;
        };
    }
    s.finalize();
    view.spec = std::make_shared<const PoscmSpec>(std::move(s));
    return view;
}

LayeredRun simulateLayered(const LayeredNetSpec& net, const LayeredView& view, const ExogenousDraw& draw,
                           const Regime& regime, double T, double dt) {
    if (!(dt > 0.0) || !(T >= dt)) throw InvalidArgument("simulation needs dt > 0 and T >= dt");
    const PoscmSpec& spec = *view.spec;
    regime.contextLevelPart().validate(spec);
    for (const auto& iv : regime.interventions()) {
        if (const auto* e = std::get_if<VEdge>(&iv)) {
            if (e->target >= spec.n || !spec.precedes(e->source, e->target) ||
                !spec.edgeProb(e->source, e->target, 0.0))
                throw InvalidArgument("edge clamp " + spec.nodeName(e->source) + "->" + spec.nodeName(e->target) +
                                      " is not a potential synapse");
        } else if (const auto* v = std::get_if<VNode>(&iv)) {
            if (v->node >= spec.n || !spec.valueDomain[v->node].contains(v->value))
                throw DomainError("voltage clamp outside the value domain");
        }
    }
    LayeredRun run;
    run.structure = generateStructure(spec, std::make_shared<const ExogenousDraw>(draw),
                                      std::make_shared<const Regime>(regime.contextLevelPart()));
    const World& w = run.structure;
    const std::size_t n = spec.n;

    struct Synapse {
        NodeId pre, post;
        SynapseParams p;
        double s = 0.0;
    };
    std::vector<Synapse> synapses;
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j : w.parents(i)) {
            Synapse syn{j, i, synapseFor(net, view.cells[j].layer, view.cells[i].layer,
                                         static_cast<std::size_t>(w.context[i]))};
            if (const EdgeReplacement* r = regime.valueEdge(j, i)) {
                if (!r->isClamp() || r->clampValue()->empty())
                    throw InvalidArgument("layered edge interventions must be constant gMax clamps");
                syn.p.gMax = (*r->clampValue())[0];
                if (!(syn.p.gMax >= 0.0)) throw DomainError("gMax clamp must be non-negative");
            }
            synapses.push_back(syn);
        }

    Vec v(n), eL(n), iStim(n);
    std::vector<std::optional<double>> clamp(n);
    std::vector<rng::KeyedStream> noise;
    std::vector<int> hold(n, 0);
    noise.reserve(n);
    for (NodeId i = 0; i < n; ++i) {
        eL[i] = jitteredLeak(net, draw.mechanismNoise(i).empty() ? 0.5 : draw.mechanismNoise(i)[0]);
        iStim[i] = stimulusCurrent(net, view.cells[i].layer);
        clamp[i] = regime.valueOverride(i);
        v[i] = clamp[i] ? *clamp[i] : eL[i];
        noise.emplace_back(rng::hashKey({draw.seed(), draw.replicate(), i, 0x50a1}));
    }
    rng::KeyedStream layerNoise(rng::hashKey({draw.seed(), draw.replicate(), 0x1a7e}));
    const std::size_t steps = static_cast<std::size_t>(std::llround(T / dt));
    const int peakSteps = std::max(1, static_cast<int>(std::llround(net.soma.spikeWidth / dt)));
    const int holdSteps = peakSteps + static_cast<int>(std::llround(net.soma.refractory / dt));
    run.traces.resize(n);
    for (NodeId i = 0; i < n; ++i) {
        run.traces[i].cell = i;
        run.traces[i].dt = dt;
        run.traces[i].samples.reserve(steps + 1);
        run.traces[i].samples.push_back(v[i]);
    }
    Vec current(n), shared(net.layers.size());
    for (std::size_t step = 1; step <= steps; ++step) {
        const double t = step * dt;
        std::fill(current.begin(), current.end(), 0.0);
        for (auto& syn : synapses) {
            current[syn.post] += synapticCurrent(syn.s, v[syn.post], syn.p);
            syn.s = synapseStep(syn.s, v[syn.pre], syn.p, dt);
        }
        for (auto& x : shared) x = net.withinLayerNoise > 0.0 ? net.withinLayerNoise * layerNoise.normal() : 0.0;
        for (NodeId i = 0; i < n; ++i) {
            double z = noise[i].normal();
            if (clamp[i]) {
                v[i] = *clamp[i];
                run.traces[i].samples.push_back(v[i]);
                continue;
            }
            double sample;
            if (hold[i] > 0) {
                --hold[i];
                v[i] = net.soma.vReset;
                sample = hold[i] >= holdSteps - peakSteps ? net.soma.spikePeak : v[i];
            } else {
                double drive = -net.soma.gLeak * (v[i] - eL[i]) + current[i] + net.soma.noise * z +
                               shared[view.cells[i].layer];
                if (t > net.stimulus.onset) drive += iStim[i];
                v[i] += dt * drive / net.soma.capacitance;
                if (!std::isfinite(v[i]) || std::abs(v[i]) > 500.0) {
                    char buf[160];
                    std::snprintf(buf, sizeof buf, "membrane potential of %s reached %.3g mV at t = %.2f ms",
                                  spec.nodeName(i).c_str(), v[i], t);
                    throw SimulationError(buf);
                }
                sample = v[i];
                if (net.layers[view.cells[i].layer].spiking && v[i] >= net.soma.vSpike) {
                    sample = net.soma.spikePeak;
                    v[i] = net.soma.vReset;
                    hold[i] = holdSteps - 1;
                }
            }
            run.traces[i].samples.push_back(sample);
        }
    }
    return run;
}

LayeredRun simulateLayered(const LayeredNetSpec& net, std::uint64_t seed, const Regime& regime) {
    LayeredView view = layeredView(net);
    return simulateLayered(net, view, ExogenousDraw::sample(*view.spec, seed, 0), regime, net.T, net.dt);
}

LayeredNetSpec typeSwappedTwin(const LayeredNetSpec& net, const std::string& layer, const std::string& typeA,
                               const std::string& typeB) {
    LayeredNetSpec out = net;
    auto& types = out.layers.at(out.layerIndex(layer)).types;
    auto find = [&](const std::string& name) {
        auto it = std::find_if(types.begin(), types.end(), [&](const CellType& t) { return t.name == name; });
        if (it == types.end()) throw ConfigError("layer " + layer + " has no type " + name);
        return it;
    };
    auto a = find(typeA), b = find(typeB);
    std::swap(a->name, b->name);
    for (auto& p : out.projections) {
        if (p.post != layer) continue;
        std::swap(p.synapse.at(typeA), p.synapse.at(typeB));
    }
    return out;
}

std::pair<LayeredNetSpec, LayeredNetSpec> calibratedDensityPair(const LayeredNetSpec& net, const std::string& pre,
                                                                const std::string& post, double blockFraction) {
    if (!(blockFraction >= 0.0 && blockFraction < 1.0)) throw InvalidArgument("block fraction must lie in [0, 1)");
    LayeredNetSpec blocked = net;
    bool found = false;
    for (auto& p : blocked.projections) {
        if (p.pre != pre || p.post != post) continue;
        found = true;
        p.probability *= 1.0 - blockFraction;
        for (auto& [type, syn] : p.synapse) syn.gMax /= 1.0 - blockFraction;
    }
    if (!found) throw ConfigError("no projection " + pre + "->" + post);
    return {net, blocked};
}

LayeredNetSpec withGlobalContext(const LayeredNetSpec& net, double context, double reference) {
    LayeredNetSpec out = net;
    const double d = std::abs(context) - std::abs(reference);
    for (auto& layer : out.layers) {
        layer.size = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(layer.size * (1.0 + 0.25 * d))));
        if (layer.types.size() < 2) continue;
        double total = 0.0;
        for (const auto& t : layer.types) total += t.proportion;
        double first = std::clamp(layer.types[0].proportion / total + 0.08 * d, 0.05, 0.95);
        double rest = total - layer.types[0].proportion;
        for (std::size_t k = 1; k < layer.types.size(); ++k)
            layer.types[k].proportion = rest > 0.0 ? layer.types[k].proportion / rest * (1.0 - first) : 0.0;
        layer.types[0].proportion = first;
    }
    return out;
}

std::string tracesCsv(const std::vector<Trace>& traces) {
    std::ostringstream os;
    os << "t,cellId,V\n";
    char buf[96];
    for (const auto& tr : traces)
        for (std::size_t k = 0; k < tr.samples.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.4f,%zu,%.17g\n", k * tr.dt, tr.cell, tr.samples[k]);
            os << buf;
        }
    return os.str();
}

}  // namespace poscm
