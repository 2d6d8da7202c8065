#include "poscm/domain.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include "poscm/error.hpp"

namespace poscm {

Domain Domain::finite(std::vector<std::string> labels) {
    if (labels.empty()) throw InvalidArgument("finite domain needs at least one label");
    std::set<std::string> seen(labels.begin(), labels.end());
    if (seen.size() != labels.size()) throw InvalidArgument("finite domain labels must be distinct");
    Domain d;
    d.finite_ = true;
    d.labels_ = std::move(labels);
    d.lo_ = 0.0;
    d.hi_ = static_cast<double>(d.labels_.size() - 1);
    return d;
}

Domain Domain::interval(double lo, double hi) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
        throw InvalidArgument("real interval needs finite lo < hi");
    Domain d;
    d.lo_ = lo;
    d.hi_ = hi;
    return d;
}

Domain Domain::binary() { return finite({"0", "1"}); }

bool Domain::contains(double x) const noexcept {
    if (!std::isfinite(x)) return false;
    if (finite_) return x >= 0.0 && x == std::floor(x) && x < static_cast<double>(labels_.size());
    return x >= lo_ && x <= hi_;
}

double Domain::clamp(double x) const noexcept {
    if (finite_) return x;
    return std::clamp(x, lo_, hi_);
}

std::string Domain::format(double x) const {
    if (finite_ && contains(x)) return labels_[static_cast<std::size_t>(x)];
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

std::optional<std::size_t> Domain::labelIndex(const std::string& name) const {
    auto it = std::find(labels_.begin(), labels_.end(), name);
    if (it == labels_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - labels_.begin());
}

std::optional<double> Domain::parse(const std::string& token) const {
    if (finite_) {
        if (auto idx = labelIndex(token)) return static_cast<double>(*idx);
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) return std::nullopt;
    if (!contains(v)) return std::nullopt;
    return v;
}

}  // namespace poscm
