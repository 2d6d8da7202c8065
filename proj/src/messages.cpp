#include "poscm/messages.hpp"

#include <algorithm>
#include <cmath>

#include "poscm/error.hpp"

namespace poscm {

ScalarFn makeScalarFn(const std::string& name, Vec params) {
    auto need = [&](std::size_t k) {
        if (params.size() != k)
            throw ConfigError("scalar function '" + name + "' takes " + std::to_string(k) + " parameter(s)");
    };
    ScalarFn f{name, params, {}};
    if (name == "identity") {
        need(0);
        f.fn = [](double x) { return x; };
    } else if (name == "affine") {
        need(2);
        double a = params[0], b = params[1];
        f.fn = [a, b](double x) { return a * x + b; };
    } else if (name == "tanh") {
        if (params.empty()) f.params = params = {1.0};
        need(1);
        double gain = params[0];
        f.fn = [gain](double x) { return std::tanh(gain * x); };
    } else if (name == "sin") {
        if (params.empty()) f.params = params = {1.0};
        need(1);
        double freq = params[0];
        f.fn = [freq](double x) { return std::sin(freq * x); };
    } else if (name == "piecewise-linear") {
        if (params.size() < 4 || params.size() % 2) throw ConfigError("piecewise-linear needs >= 2 (x, y) knots");
        std::vector<std::pair<double, double>> knots;
        for (std::size_t k = 0; k < params.size(); k += 2) knots.emplace_back(params[k], params[k + 1]);
        for (std::size_t k = 1; k < knots.size(); ++k)
            if (!(knots[k].first > knots[k - 1].first)) throw ConfigError("piecewise-linear knots must increase");
        f.fn = [knots](double x) {
            auto slope = [](const auto& a, const auto& b) { return (b.second - a.second) / (b.first - a.first); };
            if (x <= knots.front().first) return knots[0].second + slope(knots[0], knots[1]) * (x - knots[0].first);
            for (std::size_t k = 1; k < knots.size(); ++k)
                if (x <= knots[k].first) return knots[k - 1].second + slope(knots[k - 1], knots[k]) * (x - knots[k - 1].first);
            const auto& a = knots[knots.size() - 2];
            const auto& b = knots.back();
            return b.second + slope(a, b) * (x - b.first);
        };
    } else {
        throw ConfigError("unknown scalar function '" + name + "'");
    }
    return f;
}

double kasEvalDirect(const KasForm& form, std::span<const std::uint8_t> adjacencyRow,
                     std::span<const double> parentValues, double uV) {
    const std::size_t m = form.slots();
    if (adjacencyRow.size() != m || parentValues.size() != m)
        throw InvalidArgument("KAS evaluation needs one adjacency entry and value per slot");
    double total = 0.0;
    for (std::size_t q = 0; q <= 2 * m; ++q) {
        const double shift = form.eta * static_cast<double>(q);
        double inner = static_cast<double>(q);
        for (std::size_t j = 0; j < m; ++j)
            if (adjacencyRow[j]) inner += form.lambdas[j] * form.psi(parentValues[j] + shift);
        inner += form.lambdaU * form.psi(uV + shift);
        total += form.Psi(inner);
    }
    return total;
}

namespace {

double kasAggregate(const KasForm& form, const std::vector<Vec>& slots, double u) {
    const std::size_t d = form.dim();
    double total = 0.0;
    for (std::size_t q = 0; q < d; ++q) {
        double inner = static_cast<double>(q);
        for (const auto& s : slots) inner += s[q];
        inner += form.lambdaU * form.psi(u + form.eta * static_cast<double>(q));
        total += form.Psi(inner);
    }
    return total;
}

Vec kasEdgeMessage(const KasForm& form, double lambda, double x) {
    Vec out(form.dim());
    for (std::size_t q = 0; q < out.size(); ++q) out[q] = lambda * form.psi(x + form.eta * static_cast<double>(q));
    return out;
}

}  // namespace

KasMessages kasToMessages(const KasForm& form) {
    KasMessages out;
    out.dim = form.dim();
    for (std::size_t j = 0; j < form.slots(); ++j) {
        double lambda = form.lambdas[j];
        out.edge.push_back([form, lambda](double x) { return kasEdgeMessage(form, lambda, x); });
    }
    out.aggregate = [form](const MessageMatrix& m, std::span<const double> noise) {
        return kasAggregate(form, m.slots, noise.empty() ? 0.0 : noise[0]);
    };
    return out;
}

double kasEvalViaMessages(const KasForm& form, std::span<const std::uint8_t> adjacencyRow,
                          std::span<const double> parentValues, double uV) {
    const std::size_t m = form.slots();
    if (adjacencyRow.size() != m || parentValues.size() != m)
        throw InvalidArgument("KAS evaluation needs one adjacency entry and value per slot");
    KasMessages km = kasToMessages(form);
    MessageMatrix mm;
    mm.dim = km.dim;
    for (std::size_t j = 0; j < m; ++j) {
        mm.sources.push_back(j);
        mm.slots.push_back(adjacencyRow[j] ? km.edge[j](parentValues[j]) : Vec(km.dim, 0.0));
    }
    double u[1] = {uV};
    return km.aggregate(mm, u);
}

std::shared_ptr<const MessageForm> kasMessageForm(const KasForm& form, std::vector<NodeId> sources) {
    if (sources.size() != form.slots())
        throw InvalidArgument("KAS form has " + std::to_string(form.slots()) + " slots but " +
                              std::to_string(sources.size()) + " potential parents were given");
    auto mf = std::make_shared<MessageForm>();
    mf->dim = form.dim();
    mf->message = [form, sources](NodeId source, double x) {
        auto it = std::find(sources.begin(), sources.end(), source);
        if (it == sources.end()) throw InvalidArgument("message requested from a non-potential parent");
        return kasEdgeMessage(form, form.lambdas[static_cast<std::size_t>(it - sources.begin())], x);
    };
    mf->aggregate = [form](const MessageMatrix& m, std::span<const double> noise) {
        return kasAggregate(form, m.slots, noise.empty() ? 0.0 : noise[0]);
    };
    return mf;
}

std::shared_ptr<const MessageForm> additiveMessageForm(std::function<double(NodeId, double)> term,
                                                        std::function<double(double)> noiseTerm) {
    auto mf = std::make_shared<MessageForm>();
    mf->dim = 1;
    mf->message = [term](NodeId source, double x) { return Vec{term(source, x)}; };
    mf->aggregate = [noiseTerm](const MessageMatrix& m, std::span<const double> noise) {
        double s = noiseTerm(noise.empty() ? 0.0 : noise[0]);
        for (const auto& slot : m.slots) s += slot[0];
        return s;
    };
    return mf;
}

PoscmSpec buildMessagePoscm(const PoscmSpec& spec, const std::vector<NodeMessageParam>& params) {
    if (params.size() != spec.n) throw InvalidArgument("message parameterization must cover every node");
    PoscmSpec out = spec;
    out.valueMessageForm.assign(spec.n, true);
    out.contextMessageForm.assign(spec.n, false);
    for (NodeId i = 0; i < spec.n; ++i) {
        const auto& p = params[i];
        if (!p.value) throw InvalidArgument("node " + spec.nodeName(i) + " is missing its value message channel");
        auto factory = p.value;
        std::string tag = p.tag.empty() ? "message" : p.tag;
        out.gamma[i] = [factory, tag](double context, std::span<const NodeId>, std::span<const double>) {
            Mechanism m;
            m.tag = tag;
            m.messages = factory(context);
            if (!m.messages) throw InvalidArgument("message factory returned no form");
            return m;
        };
        if (p.context) {
            out.phi[i].messages = p.context;
            out.contextMessageForm[i] = true;
        }
    }
    out.finalize();
    return out;
}

Gauge affineGauge(double scale, double shift) {
    if (scale == 0.0) throw InvalidArgument("affine gauge needs a non-zero scale");
    return Gauge{[scale, shift](const Vec& m) {
                     Vec o(m);
                     for (auto& x : o) x = scale * x + shift;
                     return o;
                 },
                 [scale, shift](const Vec& m) {
                     Vec o(m);
                     for (auto& x : o) x = (x - shift) / scale;
                     return o;
                 }};
}

std::vector<Vec> reachableMessages(const MessageForm& form, std::span<const NodeId> sources,
                                   std::span<const double> inputs) {
    std::vector<Vec> out;
    for (NodeId s : sources)
        for (double x : inputs) out.push_back(form.message(s, x));
    return out;
}

namespace {

double maxAbsDiff(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) return INFINITY;
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]) / (1.0 + std::abs(a[k])));
    return d;
}

}  // namespace

std::shared_ptr<const MessageForm> gaugeTransform(const MessageForm& form, const Gauge& gauge,
                                                   const std::vector<Vec>& reachable) {
    if (!gauge.g || !gauge.gInv) throw InvalidArgument("gauge needs both g and its inverse");
    std::vector<Vec> images;
    images.reserve(reachable.size());
    for (const auto& m : reachable) {
        Vec gm = gauge.g(m);
        if (gm.size() != form.dim) throw InvalidArgument("gauge changes the message dimension");
        if (MessageMatrix::isZero(gm) && !MessageMatrix::isZero(m))
            throw InvalidArgument("gauge maps a reachable message to the gated zero vector");
        if (maxAbsDiff(gauge.gInv(gm), m) > 1e-9) throw InvalidArgument("gauge is not invertible on reachable messages");
        images.push_back(std::move(gm));
    }
    for (std::size_t a = 0; a < reachable.size(); ++a)
        for (std::size_t b = a + 1; b < reachable.size(); ++b)
            if (maxAbsDiff(reachable[a], reachable[b]) > 1e-12 && maxAbsDiff(images[a], images[b]) == 0.0)
                throw InvalidArgument("gauge is not injective on reachable messages");

    auto base = std::make_shared<MessageForm>(form);
    auto mf = std::make_shared<MessageForm>();
    mf->dim = form.dim;
    mf->message = [base, g = gauge.g](NodeId source, double x) { return g(base->message(source, x)); };
    mf->aggregate = [base, gInv = gauge.gInv](const MessageMatrix& m, std::span<const double> noise) {
        MessageMatrix back = m;
        for (auto& slot : back.slots)
            if (!MessageMatrix::isZero(slot)) slot = gInv(slot);
        return base->aggregate(back, noise);
    };
    return mf;
}

PoscmSpec gaugeSpec(const PoscmSpec& spec, NodeId node, const Gauge& gauge, std::span<const double> inputs) {
    if (node >= spec.n) throw InvalidArgument("gauge target out of range");
    if (!spec.valueMessageForm[node]) throw InvalidArgument("gauge target has no value message form");
    PoscmSpec out = spec;
    auto inner = spec.gamma[node];
    auto sources = spec.potentialParents(node);
    Vec in(inputs.begin(), inputs.end());
    out.gamma[node] = [inner, gauge, sources, in](double context, std::span<const NodeId> parents,
                                                  std::span<const double> noise) {
        Mechanism m = inner(context, parents, noise);
        if (!m.messages) throw InvalidArgument("gauge target mechanism has no message form");
        m.messages = gaugeTransform(*m.messages, gauge, reachableMessages(*m.messages, sources, in));
        m.tag += "+gauge";
        return m;
    };
    out.finalize();
    return out;
}

double clipBox(double x, double bound) { return std::clamp(x, -std::abs(bound), std::abs(bound)); }

std::function<double(std::span<const double>)> restrictToCube(std::function<double(std::span<const double>)> fn,
                                                              double lo, double hi) {
    if (!(lo < hi)) throw InvalidArgument("cube restriction needs lo < hi");
    return [fn, lo, hi](std::span<const double> x) {
        Vec c(x.begin(), x.end());
        for (auto& v : c) v = std::clamp(v, lo, hi);
        return fn(c);
    };
}

}  // namespace poscm
