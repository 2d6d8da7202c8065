#include "poscm/regime.hpp"

#include <string>

#include "poscm/core.hpp"
#include "poscm/error.hpp"

namespace poscm {

EdgeReplacement EdgeReplacement::clamp(Vec message) {
    EdgeReplacement r;
    r.name_ = "clamp";
    r.clamp_ = std::move(message);
    return r;
}

EdgeReplacement EdgeReplacement::function(std::string name, std::function<Vec(double)> fn) {
    if (!fn) throw InvalidArgument("edge replacement needs a callable");
    EdgeReplacement r;
    r.name_ = std::move(name);
    r.fn_ = std::move(fn);
    return r;
}

Regime::Regime(std::string label, std::vector<Intervention> interventions) : label_(std::move(label)) {
    for (auto& iv : interventions) add(std::move(iv));
}

namespace {

std::string dyad(NodeId s, NodeId t) { return std::to_string(s) + "->" + std::to_string(t); }

}  // namespace

Regime& Regime::add(Intervention intervention) {
    std::size_t index = interventions_.size();
    std::visit(
        [&](const auto& iv) {
            using T = std::decay_t<decltype(iv)>;
            if constexpr (std::is_same_v<T, BetaNode>) {
                if (!contextNodes_.emplace(iv.node, iv.value).second)
                    throw InvalidArgument("conflicting context interventions on node " + std::to_string(iv.node));
            } else if constexpr (std::is_same_v<T, VNode>) {
                if (!valueNodes_.emplace(iv.node, iv.value).second)
                    throw InvalidArgument("conflicting value interventions on node " + std::to_string(iv.node));
                if (valueByNode_.size() <= iv.node) valueByNode_.resize(iv.node + 1);
                valueByNode_[iv.node] = iv.value;
            } else if constexpr (std::is_same_v<T, BetaEdge>) {
                if (!contextEdges_.emplace(std::pair{iv.source, iv.target}, index).second)
                    throw InvalidArgument("conflicting context-edge interventions on " + dyad(iv.source, iv.target));
            } else {
                if (!valueEdges_.emplace(std::pair{iv.source, iv.target}, index).second)
                    throw InvalidArgument("conflicting value-edge interventions on " + dyad(iv.source, iv.target));
            }
        },
        intervention);
    interventions_.push_back(std::move(intervention));
    return *this;
}

std::optional<double> Regime::contextOverride(NodeId node) const {
    auto it = contextNodes_.find(node);
    if (it == contextNodes_.end()) return std::nullopt;
    return it->second;
}

std::optional<double> Regime::valueOverride(NodeId node) const {
    return node < valueByNode_.size() ? valueByNode_[node] : std::nullopt;
}

const EdgeReplacement* Regime::contextEdge(NodeId source, NodeId target) const {
    auto it = contextEdges_.find({source, target});
    if (it == contextEdges_.end()) return nullptr;
    return &std::get<BetaEdge>(interventions_[it->second]).replacement;
}

const EdgeReplacement* Regime::valueEdge(NodeId source, NodeId target) const {
    auto it = valueEdges_.find({source, target});
    if (it == valueEdges_.end()) return nullptr;
    return &std::get<VEdge>(interventions_[it->second]).replacement;
}

bool Regime::hasValueEdgeInto(NodeId target) const {
    for (const auto& [key, idx] : valueEdges_)
        if (key.second == target) return true;
    return false;
}

bool Regime::hasContextEdgeInto(NodeId target) const {
    for (const auto& [key, idx] : contextEdges_)
        if (key.second == target) return true;
    return false;
}

Regime Regime::valueLevelPart() const {
    Regime out(label_);
    for (const auto& iv : interventions_)
        if (std::holds_alternative<VNode>(iv) || std::holds_alternative<VEdge>(iv)) out.add(iv);
    return out;
}

Regime Regime::contextLevelPart() const {
    Regime out(label_);
    for (const auto& iv : interventions_)
        if (std::holds_alternative<BetaNode>(iv) || std::holds_alternative<BetaEdge>(iv)) out.add(iv);
    return out;
}

Regime Regime::merged(const Regime& other, std::string label) const {
    Regime out(label.empty() ? label_ : std::move(label));
    for (const auto& iv : interventions_) out.add(iv);
    for (const auto& iv : other.interventions_) out.add(iv);
    return out;
}

void Regime::validate(const PoscmSpec& spec) const {
    auto checkNode = [&](NodeId node) {
        if (node >= spec.n) throw InvalidArgument("intervention on unknown node " + std::to_string(node));
    };
    auto checkDyad = [&](NodeId s, NodeId t) {
        checkNode(s);
        checkNode(t);
        if (!spec.precedes(s, t)) throw InvalidArgument("dyad " + dyad(s, t) + " is not a potential edge");
    };
    for (const auto& [node, value] : contextNodes_) {
        checkNode(node);
        if (!spec.contextDomain[node].contains(value))
            throw DomainError("context intervention value outside domain of node " + spec.nodeName(node));
    }
    for (const auto& [node, value] : valueNodes_) {
        checkNode(node);
        if (!spec.valueDomain[node].contains(value))
            throw DomainError("value intervention outside domain of node " + spec.nodeName(node));
    }
    for (const auto& [key, idx] : contextEdges_) {
        checkDyad(key.first, key.second);
        if (!spec.contextMessageForm[key.second] || !spec.phi[key.second].messages)
            throw InvalidArgument("context-edge intervention on " + dyad(key.first, key.second) +
                                  " requires a message-augmented context mechanism");
        const auto& rep = std::get<BetaEdge>(interventions_[idx]).replacement;
        if (rep.isClamp() && rep.clampValue()->size() != spec.phi[key.second].messages->dim)
            throw DomainError("context message clamp has wrong dimension on " + dyad(key.first, key.second));
    }
    for (const auto& [key, idx] : valueEdges_) {
        checkDyad(key.first, key.second);
        if (!spec.valueMessageForm[key.second])
            throw InvalidArgument("value-edge intervention on " + dyad(key.first, key.second) +
                                  " requires a message-augmented value mechanism");
    }
}

}  // namespace poscm
