#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace poscm {

using NodeId = std::size_t;
using Vec = std::vector<double>;

// Context or value space of one node. Finite domains hold label indices
// (0..size-1) encoded as doubles; real intervals hold the value itself.
class Domain {
public:
    static Domain finite(std::vector<std::string> labels);
    static Domain interval(double lo, double hi);
    // Two-label {0, 1} domain.
    static Domain binary();

    bool isFinite() const noexcept { return finite_; }
    std::size_t size() const noexcept { return labels_.size(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }

    bool contains(double x) const noexcept;
    // Projects x onto a real interval; finite domains are returned unchanged.
    double clamp(double x) const noexcept;
    std::string format(double x) const;
    // Label name or numeric literal -> encoded value.
    std::optional<double> parse(const std::string& token) const;
    std::optional<std::size_t> labelIndex(const std::string& name) const;

    bool operator==(const Domain&) const = default;

private:
    Domain() = default;
    bool finite_ = false;
    std::vector<std::string> labels_;
    double lo_ = 0.0;
    double hi_ = 0.0;
};

}  // namespace poscm
