#pragma once

#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "poscm/core.hpp"
#include "poscm/rng.hpp"

namespace testing {

using namespace poscm;

// Linear-Gaussian SCM on a fixed DAG given as (j, i) pairs over nodes in
// index order: V_i = sum_j w_ji V_j + z(u). Contexts are degenerate.
inline std::shared_ptr<const PoscmSpec> fixedLinearScm(std::size_t n, std::vector<std::pair<NodeId, NodeId>> edges,
                                                       std::vector<double> weights) {
    PoscmSpec s;
    s.n = n;
    s.tau.resize(n);
    std::iota(s.tau.begin(), s.tau.end(), std::size_t{0});
    s.contextDomain.assign(n, Domain::finite({"*"}));
    s.valueDomain.assign(n, Domain::interval(-1e6, 1e6));
    s.noise.assign(n, NoiseArity{1, 1, 2});
    s.edgeProb = [edges](NodeId j, NodeId i, double) {
        for (auto e : edges)
            if (e.first == j && e.second == i) return 1.0;
        return 0.0;
    };
    s.phi.assign(n, ContextMechanism{[](const ParentValues&, std::span<const double>) { return 0.0; }, nullptr});
    for (NodeId i = 0; i < n; ++i) {
        s.gamma.push_back([edges, weights, i](double, std::span<const NodeId>, std::span<const double>) {
            Mechanism m;
            m.tag = "linear";
            m.evaluate = [edges, weights, i](const ParentValues& pv, std::span<const double> u) {
                double acc = rng::normalFromUniforms(u[0], u[1]);
                for (std::size_t k = 0; k < edges.size(); ++k)
                    if (edges[k].second == i) acc += weights[k] * pv.at(edges[k].first);
                return acc;
            };
            return m;
        });
    }
    s.finalize();
    return std::make_shared<const PoscmSpec>(std::move(s));
}

inline double meanOf(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace testing
