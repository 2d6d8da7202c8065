#include "poscm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "poscm/error.hpp"
#include "poscm/rng.hpp"

namespace poscm {

EmpiricalLaw EmpiricalLaw::scalar(std::vector<double> samples) {
    if (samples.empty()) throw StatisticsError("empirical law needs at least one sample");
    EmpiricalLaw law;
    law.kind_ = Kind::Scalar;
    law.n_ = samples.size();
    std::sort(samples.begin(), samples.end());
    law.sorted_ = std::move(samples);
    return law;
}

EmpiricalLaw EmpiricalLaw::labels(std::span<const double> samples) {
    std::map<std::int64_t, std::size_t> counts;
    for (double s : samples) ++counts[static_cast<std::int64_t>(std::llround(s))];
    return fromCounts(std::move(counts));
}

EmpiricalLaw EmpiricalLaw::fromCounts(std::map<std::int64_t, std::size_t> counts) {
    EmpiricalLaw law;
    law.kind_ = Kind::Labels;
    for (auto it = counts.begin(); it != counts.end();) {
        if (it->second == 0) it = counts.erase(it);
        else law.n_ += (it++)->second;
    }
    if (law.n_ == 0) throw StatisticsError("empirical law needs at least one sample");
    law.counts_ = std::move(counts);
    return law;
}

double EmpiricalLaw::mean() const {
    if (isScalar()) return std::accumulate(sorted_.begin(), sorted_.end(), 0.0) / static_cast<double>(n_);
    double s = 0.0;
    for (auto [label, c] : counts_) s += static_cast<double>(label) * static_cast<double>(c);
    return s / static_cast<double>(n_);
}

double EmpiricalLaw::probability(std::int64_t label) const {
    if (isScalar()) throw StatisticsError("probability() needs a label law");
    auto it = counts_.find(label);
    return it == counts_.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(n_);
}

double EmpiricalLaw::cdf(double x) const {
    if (isScalar())
        return static_cast<double>(std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin()) /
               static_cast<double>(n_);
    std::size_t c = 0;
    for (auto [label, k] : counts_)
        if (static_cast<double>(label) <= x) c += k;
    return static_cast<double>(c) / static_cast<double>(n_);
}

std::string methodName(TestMethod m) {
    switch (m) {
        case TestMethod::KS: return "KS";
        case TestMethod::MmdPermutation: return "MMD-permutation";
        case TestMethod::Binomial: return "binomial";
        case TestMethod::ChiSquare: return "chi-square";
    }
    return "?";
}

double kolmogorovSurvival(double lambda) {
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 200; ++k) {
        double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 ? term : -term);
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

TwoSampleResult ksTest(const EmpiricalLaw& x, const EmpiricalLaw& y) {
    if (!x.isScalar() || !y.isScalar()) throw StatisticsError("KS test needs scalar laws");
    if (x.n() < 5 || y.n() < 5) throw StatisticsError("KS test needs at least 5 samples per arm");
    const auto& a = x.sorted();
    const auto& b = y.sorted();
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    double en = std::sqrt(na * nb / (na + nb));
    TwoSampleResult r;
    r.method = TestMethod::KS;
    r.statistic = d;
    r.pValue = d == 0.0 ? 1.0 : kolmogorovSurvival((en + 0.12 + 0.11 / en) * d);
    return r;
}

Points asPoints(std::span<const double> xs) {
    Points p;
    p.reserve(xs.size());
    for (double x : xs) p.push_back(Vec{x});
    return p;
}

namespace {

double sqDist(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw StatisticsError("MMD samples have mixed dimensions");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

void checkMmdInput(const Points& x, const Points& y, double sigma) {
    if (!(sigma > 0.0)) throw StatisticsError("MMD bandwidth must be positive");
    if (x.empty() || y.empty()) throw StatisticsError("MMD needs non-empty samples");
}

double kernelMean(const Points& x, const Points& y, double gamma, bool skipDiagonal) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (skipDiagonal && i == j) continue;
            s += std::exp(-gamma * sqDist(x[i], y[j]));
        }
    double pairs = static_cast<double>(x.size()) * static_cast<double>(y.size());
    if (skipDiagonal) pairs -= static_cast<double>(x.size());
    return s / pairs;
}

}  // namespace

double mmd2(const Points& x, const Points& y, double sigma) {
    checkMmdInput(x, y, sigma);
    double g = 1.0 / (2.0 * sigma * sigma);
    return std::max(0.0, kernelMean(x, x, g, false) - 2.0 * kernelMean(x, y, g, false) + kernelMean(y, y, g, false));
}

double mmd2(std::span<const double> x, std::span<const double> y, double sigma) {
    return mmd2(asPoints(x), asPoints(y), sigma);
}

double mmd2Unbiased(const Points& x, const Points& y, double sigma) {
    checkMmdInput(x, y, sigma);
    if (x.size() < 2 || y.size() < 2) throw StatisticsError("unbiased MMD needs at least two samples per arm");
    double g = 1.0 / (2.0 * sigma * sigma);
    return kernelMean(x, x, g, true) - 2.0 * kernelMean(x, y, g, false) + kernelMean(y, y, g, true);
}

TwoSampleResult mmdPermutationTest(const Points& x, const Points& y, double sigma, std::size_t permutations,
                                   std::uint64_t seed) {
    checkMmdInput(x, y, sigma);
    if (permutations < 100) throw StatisticsError("permutation test needs at least 100 permutations");
    const std::size_t n = x.size(), m = y.size(), N = n + m;
    const double g = 1.0 / (2.0 * sigma * sigma);
    std::vector<const Vec*> pooled;
    pooled.reserve(N);
    for (const auto& p : x) pooled.push_back(&p);
    for (const auto& p : y) pooled.push_back(&p);
    std::vector<double> K(N * N);
    for (std::size_t i = 0; i < N; ++i) {
        K[i * N + i] = 1.0;
        for (std::size_t j = i + 1; j < N; ++j) K[i * N + j] = K[j * N + i] = std::exp(-g * sqDist(*pooled[i], *pooled[j]));
    }
    const double wx = 1.0 / static_cast<double>(n), wy = -1.0 / static_cast<double>(m);
    std::vector<double> w(N);
    auto statistic = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double* row = &K[i * N];
            double r = 0.0;
            for (std::size_t j = 0; j < N; ++j) r += row[j] * w[j];
            s += w[i] * r;
        }
        return std::max(0.0, s);
    };
    for (std::size_t i = 0; i < N; ++i) w[i] = i < n ? wx : wy;
    const double observed = statistic();
    rng::KeyedStream stream(rng::hashKey({seed, 0x6d6d64ULL}));
    std::size_t atLeast = 0;
    for (std::size_t b = 0; b < permutations; ++b) {
        for (std::size_t i = N - 1; i > 0; --i) std::swap(w[i], w[stream.below(i + 1)]);
        if (statistic() >= observed * (1.0 - 1e-12)) ++atLeast;
    }
    TwoSampleResult r;
    r.method = TestMethod::MmdPermutation;
    r.statistic = observed;
    r.pValue = static_cast<double>(atLeast + 1) / static_cast<double>(permutations + 1);
    return r;
}

TwoSampleResult mmdPermutationTest(std::span<const double> x, std::span<const double> y, double sigma,
                                   std::size_t permutations, std::uint64_t seed) {
    return mmdPermutationTest(asPoints(x), asPoints(y), sigma, permutations, seed);
}

double medianHeuristicBandwidth(const Points& pooled) {
    if (pooled.size() < 2) throw StatisticsError("median heuristic needs at least two samples");
    std::vector<const Vec*> pts;
    const std::size_t cap = 2000;
    if (pooled.size() <= cap) {
        for (const auto& p : pooled) pts.push_back(&p);
    } else {
        for (std::size_t k = 0; k < cap; ++k) pts.push_back(&pooled[k * pooled.size() / cap]);
    }
    std::vector<double> d;
    d.reserve(pts.size() * (pts.size() - 1) / 2);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) d.push_back(std::sqrt(sqDist(*pts[i], *pts[j])));
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    double med = *mid;
    if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
    return med > 0.0 ? med : 1.0;
}

double medianHeuristicBandwidth(std::span<const double> pooled) { return medianHeuristicBandwidth(asPoints(pooled)); }

double fisherExact(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    const double r1 = static_cast<double>(a + b), r2 = static_cast<double>(c + d);
    const double c1 = static_cast<double>(a + c), N = r1 + r2;
    auto logP = [&](double x) {
        return std::lgamma(r1 + 1) - std::lgamma(x + 1) - std::lgamma(r1 - x + 1) + std::lgamma(r2 + 1) -
               std::lgamma(c1 - x + 1) - std::lgamma(r2 - c1 + x + 1) - std::lgamma(N + 1) + std::lgamma(c1 + 1) +
               std::lgamma(N - c1 + 1);
    };
    const double lo = std::max(0.0, c1 - r2), hi = std::min(r1, c1);
    const double observed = logP(static_cast<double>(a));
    double p = 0.0;
    for (double x = lo; x <= hi; x += 1.0) {
        double lp = logP(x);
        if (lp <= observed + 1e-7) p += std::exp(lp);
    }
    return std::clamp(p, 0.0, 1.0);
}

TwoSampleResult binomialTest(std::uint64_t successX, std::uint64_t nX, std::uint64_t successY, std::uint64_t nY) {
    if (successX > nX || successY > nY || nX == 0 || nY == 0) throw StatisticsError("invalid binomial counts");
    TwoSampleResult r;
    r.method = TestMethod::Binomial;
    r.statistic = std::abs(static_cast<double>(successX) / static_cast<double>(nX) -
                           static_cast<double>(successY) / static_cast<double>(nY));
    r.pValue = fisherExact(successX, nX - successX, successY, nY - successY);
    return r;
}

TwoSampleResult chiSquareTest(const EmpiricalLaw& x, const EmpiricalLaw& y) {
    if (x.isScalar() || y.isScalar()) throw StatisticsError("chi-square test needs label laws");
    std::map<std::int64_t, std::pair<double, double>> table;
    for (auto [l, c] : x.counts()) table[l].first = static_cast<double>(c);
    for (auto [l, c] : y.counts()) table[l].second = static_cast<double>(c);
    TwoSampleResult r;
    r.method = TestMethod::ChiSquare;
    if (table.size() < 2) return r;
    const double nx = static_cast<double>(x.n()), ny = static_cast<double>(y.n()), N = nx + ny;
    double stat = 0.0;
    for (auto& [l, cell] : table) {
        double tot = cell.first + cell.second;
        double ex = tot * nx / N, ey = tot * ny / N;
        stat += (cell.first - ex) * (cell.first - ex) / ex + (cell.second - ey) * (cell.second - ey) / ey;
    }
    r.statistic = stat;
    r.pValue = boost::math::gamma_q(0.5 * static_cast<double>(table.size() - 1), 0.5 * stat);
    return r;
}

TwoSampleResult twoSampleTest(const EmpiricalLaw& x, const EmpiricalLaw& y) {
    if (x.isScalar() != y.isScalar()) throw StatisticsError("two-sample test on mixed law kinds");
    if (x.isScalar()) return ksTest(x, y);
    std::map<std::int64_t, int> support;
    for (auto [l, c] : x.counts()) support[l] = 1;
    for (auto [l, c] : y.counts()) support[l] = 1;
    if (support.size() <= 1) return TwoSampleResult{0.0, 1.0, TestMethod::Binomial};
    if (support.size() == 2) {
        std::int64_t top = support.rbegin()->first;
        auto count = [&](const EmpiricalLaw& l) {
            auto it = l.counts().find(top);
            return it == l.counts().end() ? std::uint64_t{0} : static_cast<std::uint64_t>(it->second);
        };
        return binomialTest(count(x), x.n(), count(y), y.n());
    }
    return chiSquareTest(x, y);
}

double totalVariation(const EmpiricalLaw& p, const EmpiricalLaw& q) {
    if (p.isScalar() || q.isScalar()) throw StatisticsError("total variation needs label laws");
    std::map<std::int64_t, double> diff;
    for (auto [l, c] : p.counts()) diff[l] += static_cast<double>(c) / static_cast<double>(p.n());
    for (auto [l, c] : q.counts()) diff[l] -= static_cast<double>(c) / static_cast<double>(q.n());
    double s = 0.0;
    for (auto& [l, v] : diff) s += std::abs(v);
    return 0.5 * s;
}

double firingRate(std::span<const double> trace, double threshold, double dtMs) {
    if (trace.size() < 2) throw StatisticsError("firing rate needs at least two samples");
    if (!(dtMs > 0.0)) throw StatisticsError("firing rate needs dt > 0");
    std::size_t crossings = 0;
    for (std::size_t k = 1; k < trace.size(); ++k)
        if (trace[k - 1] < threshold && trace[k] >= threshold) ++crossings;
    return static_cast<double>(crossings) / (static_cast<double>(trace.size() - 1) * dtMs * 1e-3);
}

double trailingMean(std::span<const double> trace, double windowFrac) {
    if (trace.empty()) throw StatisticsError("empty trace");
    if (!(windowFrac > 0.0 && windowFrac <= 1.0)) throw StatisticsError("window fraction must be in (0, 1]");
    auto len = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(windowFrac * static_cast<double>(trace.size()))));
    auto tail = trace.subspan(trace.size() - len);
    return std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(len);
}

double steadyStateEffect(std::span<const double> traceInt, std::span<const double> traceObs, double windowFrac) {
    if (traceInt.size() != traceObs.size()) throw StatisticsError("steady-state effect needs equal-length traces");
    return trailingMean(traceInt, windowFrac) - trailingMean(traceObs, windowFrac);
}

double bonferroni(double p, std::size_t tests) { return std::min(1.0, p * static_cast<double>(std::max<std::size_t>(tests, 1))); }

}  // namespace poscm
