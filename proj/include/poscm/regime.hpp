#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "poscm/domain.hpp"

namespace poscm {

struct PoscmSpec;

// Replacement for one dyadic message function: either a constant clamp m or
// an externally specified map x -> R^d (named after its catalog entry).
class EdgeReplacement {
public:
    static EdgeReplacement clamp(Vec message);
    static EdgeReplacement function(std::string name, std::function<Vec(double)> fn);

    Vec apply(double sourceValue) const { return clamp_ ? *clamp_ : fn_(sourceValue); }
    bool isClamp() const noexcept { return clamp_.has_value(); }
    const std::optional<Vec>& clampValue() const noexcept { return clamp_; }
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
    std::optional<Vec> clamp_;
    std::function<Vec(double)> fn_;
};

struct BetaNode {
    NodeId node;
    double value;
};

struct VNode {
    NodeId node;
    double value;
};

struct BetaEdge {
    NodeId source;
    NodeId target;
    EdgeReplacement replacement;
};

struct VEdge {
    NodeId source;
    NodeId target;
    EdgeReplacement replacement;
};

using Intervention = std::variant<BetaNode, VNode, BetaEdge, VEdge>;

// The set of interventions applied in one experiment. At most one
// intervention per target (node or dyad-channel); conflicts are rejected
// when added.
class Regime {
public:
    Regime() = default;
    explicit Regime(std::string label) : label_(std::move(label)) {}
    Regime(std::string label, std::vector<Intervention> interventions);

    Regime& add(Intervention intervention);

    const std::string& label() const noexcept { return label_; }
    const std::vector<Intervention>& interventions() const noexcept { return interventions_; }
    bool empty() const noexcept { return interventions_.empty(); }

    std::optional<double> contextOverride(NodeId node) const;
    std::optional<double> valueOverride(NodeId node) const;
    const EdgeReplacement* contextEdge(NodeId source, NodeId target) const;
    const EdgeReplacement* valueEdge(NodeId source, NodeId target) const;
    bool hasValueEdgeInto(NodeId target) const;
    bool hasContextEdgeInto(NodeId target) const;

    // True if any intervention acts in Phase I (context level).
    bool touchesPhaseOne() const noexcept { return !contextNodes_.empty() || !contextEdges_.empty(); }
    // Copy keeping only the value-level (Phase II) interventions.
    Regime valueLevelPart() const;
    Regime contextLevelPart() const;
    // Union of two regimes; throws on conflicting targets.
    Regime merged(const Regime& other, std::string label = {}) const;

    // Checks indices, dyad ordering, domain membership and message-form
    // availability for edge interventions.
    void validate(const PoscmSpec& spec) const;

private:
    std::string label_;
    std::vector<Intervention> interventions_;
    std::map<NodeId, double> contextNodes_;
    std::map<NodeId, double> valueNodes_;
    std::vector<std::optional<double>> valueByNode_;
    std::map<std::pair<NodeId, NodeId>, std::size_t> contextEdges_;
    std::map<std::pair<NodeId, NodeId>, std::size_t> valueEdges_;
};

}  // namespace poscm
