#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "poscm/domain.hpp"

namespace poscm {

// Sample-based distribution: sorted reals or label counts.
class EmpiricalLaw {
public:
    enum class Kind { Scalar, Labels };

    static EmpiricalLaw scalar(std::vector<double> samples);
    // Values are rounded to the nearest integer label.
    static EmpiricalLaw labels(std::span<const double> samples);
    static EmpiricalLaw fromCounts(std::map<std::int64_t, std::size_t> counts);

    Kind kind() const noexcept { return kind_; }
    bool isScalar() const noexcept { return kind_ == Kind::Scalar; }
    std::size_t n() const noexcept { return n_; }
    const std::vector<double>& sorted() const noexcept { return sorted_; }
    const std::map<std::int64_t, std::size_t>& counts() const noexcept { return counts_; }

    double mean() const;
    // Relative frequency of a label (label kind only).
    double probability(std::int64_t label) const;
    double cdf(double x) const;

private:
    Kind kind_ = Kind::Scalar;
    std::size_t n_ = 0;
    std::vector<double> sorted_;
    std::map<std::int64_t, std::size_t> counts_;
};

enum class TestMethod { KS, MmdPermutation, Binomial, ChiSquare };

std::string methodName(TestMethod m);

struct TwoSampleResult {
    double statistic = 0.0;
    double pValue = 1.0;
    TestMethod method = TestMethod::KS;
};

// Two-sample Kolmogorov-Smirnov with the asymptotic Kolmogorov p-value.
TwoSampleResult ksTest(const EmpiricalLaw& x, const EmpiricalLaw& y);
// Survival function of the Kolmogorov distribution, Q(lambda).
double kolmogorovSurvival(double lambda);

using Points = std::vector<Vec>;

Points asPoints(std::span<const double> xs);
// Biased (V-statistic) MMD^2 with RBF kernel exp(-|x-y|^2 / (2 sigma^2)).
double mmd2(const Points& x, const Points& y, double sigma);
double mmd2(std::span<const double> x, std::span<const double> y, double sigma);
// Unbiased U-statistic variant.
double mmd2Unbiased(const Points& x, const Points& y, double sigma);
TwoSampleResult mmdPermutationTest(const Points& x, const Points& y, double sigma, std::size_t permutations,
                                   std::uint64_t seed);
TwoSampleResult mmdPermutationTest(std::span<const double> x, std::span<const double> y, double sigma,
                                   std::size_t permutations, std::uint64_t seed);
// Median pairwise distance over at most 2000 points; 1 if degenerate.
double medianHeuristicBandwidth(const Points& pooled);
double medianHeuristicBandwidth(std::span<const double> pooled);

// Two-sided Fisher exact test on the 2x2 table [[a, b], [c, d]].
double fisherExact(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d);
// Exact test comparing success proportions of two binomial samples.
TwoSampleResult binomialTest(std::uint64_t successX, std::uint64_t nX, std::uint64_t successY, std::uint64_t nY);
// Chi-square test of homogeneity between two label laws.
TwoSampleResult chiSquareTest(const EmpiricalLaw& x, const EmpiricalLaw& y);
// KS for scalar laws, exact binomial for <= 2 labels, chi-square otherwise.
TwoSampleResult twoSampleTest(const EmpiricalLaw& x, const EmpiricalLaw& y);

// 1/2 sum |p - q| over the union of labels.
double totalVariation(const EmpiricalLaw& p, const EmpiricalLaw& q);

// Upward threshold crossings per second; dt in ms.
double firingRate(std::span<const double> trace, double threshold, double dtMs);
// Mean over the trailing window of traceInt minus the same for traceObs.
double steadyStateEffect(std::span<const double> traceInt, std::span<const double> traceObs,
                         double windowFrac = 0.5);
double trailingMean(std::span<const double> trace, double windowFrac = 0.5);

double bonferroni(double p, std::size_t tests);

}  // namespace poscm
