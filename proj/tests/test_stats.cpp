#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "poscm/error.hpp"
#include "poscm/rng.hpp"
#include "poscm/stats.hpp"

using namespace poscm;

namespace {

std::vector<double> uniforms(std::uint64_t key, std::size_t n, double lo = 0.0) {
    rng::KeyedStream s(key);
    std::vector<double> v(n);
    for (auto& x : v) x = lo + s.uniform();
    return v;
}

std::vector<double> normals(std::uint64_t key, std::size_t n, double mu = 0.0) {
    rng::KeyedStream s(key);
    std::vector<double> v(n);
    for (auto& x : v) x = mu + s.normal();
    return v;
}

double naiveMmd2(const std::vector<double>& x, const std::vector<double>& y, double sigma) {
    auto k = [sigma](double a, double b) { return std::exp(-(a - b) * (a - b) / (2 * sigma * sigma)); };
    double xx = 0, yy = 0, xy = 0;
    for (double a : x)
        for (double b : x) xx += k(a, b);
    for (double a : y)
        for (double b : y) yy += k(a, b);
    for (double a : x)
        for (double b : y) xy += k(a, b);
    double n = x.size(), m = y.size();
    return xx / (n * n) + yy / (m * m) - 2 * xy / (n * m);
}

double choose(int n, int k) { return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)); }

}  // namespace

TEST_CASE("KS on identical samples") {
    auto x = uniforms(1, 100);
    auto r = ksTest(EmpiricalLaw::scalar(x), EmpiricalLaw::scalar(x));
    CHECK(r.statistic == 0.0);
    CHECK(r.pValue == 1.0);
}

TEST_CASE("KS detects a half-unit shift of uniforms") {
    auto r = ksTest(EmpiricalLaw::scalar(uniforms(2, 1000)), EmpiricalLaw::scalar(uniforms(3, 1000, 0.5)));
    CHECK(std::abs(r.statistic - 0.5) < 0.06);
    CHECK(r.pValue < 1e-6);
}

TEST_CASE("KS statistic is symmetric and bounded") {
    for (std::uint64_t k = 0; k < 50; ++k) {
        auto a = EmpiricalLaw::scalar(normals(10 + k, 20 + k));
        auto b = EmpiricalLaw::scalar(normals(100 + k, 35, 0.3));
        auto ab = ksTest(a, b), ba = ksTest(b, a);
        CHECK(ab.statistic == doctest::Approx(ba.statistic));
        CHECK(ab.statistic >= 0.0);
        CHECK(ab.statistic <= 1.0);
        CHECK(ab.pValue >= 0.0);
        CHECK(ab.pValue <= 1.0);
    }
}

TEST_CASE("KS size under the null") {
    int rejections = 0;
    for (std::uint64_t k = 0; k < 200; ++k)
        rejections += ksTest(EmpiricalLaw::scalar(normals(1000 + k, 200)), EmpiricalLaw::scalar(normals(5000 + k, 200)))
                          .pValue < 0.05;
    CHECK(rejections <= 16);
}

TEST_CASE("Kolmogorov survival function reference points") {
    // Q(1.358) is the classical 5% critical point.
    CHECK(kolmogorovSurvival(1.358) == doctest::Approx(0.05).epsilon(0.01));
    CHECK(kolmogorovSurvival(0.1) == 1.0);
}

TEST_CASE("MMD on identical multisets is zero") {
    auto x = normals(4, 300);
    CHECK(mmd2(x, x, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("MMD V-statistic matches a double-loop reference") {
    auto x = normals(5, 2000), y = normals(6, 2000, 3.0);
    double ref = naiveMmd2(x, y, 1.0);
    CHECK(std::abs(mmd2(x, y, 1.0) - ref) <= 0.05 * ref);
    CHECK(mmd2Unbiased(asPoints(x), asPoints(y), 1.0) == doctest::Approx(ref).epsilon(0.01));
}

TEST_CASE("MMD is non-negative on random inputs") {
    for (std::uint64_t k = 0; k < 30; ++k) {
        auto x = normals(200 + k, 15), y = normals(300 + k, 22, 0.2);
        CHECK(mmd2(x, y, 0.7) >= 0.0);
    }
}

TEST_CASE("MMD permutation test size under the null") {
    int rejections = 0;
    for (std::uint64_t k = 0; k < 200; ++k) {
        auto x = normals(7000 + k, 40), y = normals(9000 + k, 40);
        rejections += mmdPermutationTest(x, y, 1.0, 200, k).pValue < 0.05;
    }
    CHECK(rejections <= 16);
}

TEST_CASE("MMD permutation test has power against a shift") {
    auto x = normals(11, 100), y = normals(12, 100, 1.0);
    CHECK(mmdPermutationTest(x, y, 1.0, 200, 1).pValue < 0.01);
}

TEST_CASE("median heuristic bandwidth") {
    CHECK(medianHeuristicBandwidth(std::vector<double>{0.0, 2.0}) == 2.0);
    CHECK(medianHeuristicBandwidth(std::vector<double>{0.0, 1.0, 2.0}) == 1.0);
    CHECK(medianHeuristicBandwidth(std::vector<double>{3.0, 3.0, 3.0}) == 1.0);
    // |X - Y| for independent standard normals is |N(0, 2)|.
    boost::math::normal z;
    double expected = std::sqrt(2.0) * boost::math::quantile(z, 0.75);
    double got = medianHeuristicBandwidth(normals(13, 5000));
    CHECK(std::abs(got - expected) < 0.1 * expected);
}

TEST_CASE("Fisher exact test matches hypergeometric enumeration") {
    struct T { int a, b, c, d; };
    for (T t : {T{3, 1, 1, 3}, T{10, 2, 3, 15}, T{0, 5, 5, 0}, T{7, 7, 7, 7}, T{1, 9, 11, 3}}) {
        int r1 = t.a + t.b, r2 = t.c + t.d, c1 = t.a + t.c, N = r1 + r2;
        auto pmf = [&](int x) { return choose(r1, x) * choose(r2, c1 - x) / choose(N, c1); };
        double obs = pmf(t.a), p = 0;
        for (int x = std::max(0, c1 - r2); x <= std::min(r1, c1); ++x)
            if (pmf(x) <= obs * (1 + 1e-7)) p += pmf(x);
        CHECK(fisherExact(t.a, t.b, t.c, t.d) == doctest::Approx(std::min(1.0, p)).epsilon(1e-9));
    }
}

TEST_CASE("chi-square homogeneity with two labels matches the df = 1 closed form") {
    std::vector<double> x, y;
    for (int k = 0; k < 120; ++k) x.push_back(k < 50 ? 1 : 0);
    for (int k = 0; k < 100; ++k) y.push_back(k < 60 ? 1 : 0);
    auto r = chiSquareTest(EmpiricalLaw::labels(x), EmpiricalLaw::labels(y));
    double a = 50, b = 70, c = 60, d = 40, N = 220;
    double stat = N * (a * d - b * c) * (a * d - b * c) / ((a + b) * (c + d) * (a + c) * (b + d));
    CHECK(r.statistic == doctest::Approx(stat));
    CHECK(r.pValue == doctest::Approx(std::erfc(std::sqrt(stat / 2))));
}

TEST_CASE("twoSampleTest dispatch") {
    std::vector<double> a{0, 1, 1, 0, 1}, b{1, 1, 1, 1, 0};
    CHECK(twoSampleTest(EmpiricalLaw::labels(a), EmpiricalLaw::labels(b)).method == TestMethod::Binomial);
    std::vector<double> c{0, 1, 2, 2}, d{2, 1, 0, 0};
    CHECK(twoSampleTest(EmpiricalLaw::labels(c), EmpiricalLaw::labels(d)).method == TestMethod::ChiSquare);
    CHECK(twoSampleTest(EmpiricalLaw::scalar(normals(1, 10)), EmpiricalLaw::scalar(normals(2, 10))).method ==
          TestMethod::KS);
    CHECK_THROWS_AS(twoSampleTest(EmpiricalLaw::labels(a), EmpiricalLaw::scalar(normals(1, 10))), StatisticsError);
}

TEST_CASE("total variation") {
    std::vector<double> a{0, 1, 1, 0}, b{2, 3};
    CHECK(totalVariation(EmpiricalLaw::labels(a), EmpiricalLaw::labels(a)) == 0.0);
    CHECK(totalVariation(EmpiricalLaw::labels(a), EmpiricalLaw::labels(b)) == 1.0);
    rng::KeyedStream s(77);
    std::vector<double> p, q;
    for (int k = 0; k < 100000; ++k) {
        p.push_back(s.uniform() < 0.2);
        q.push_back(s.uniform() < 0.8);
    }
    CHECK(std::abs(totalVariation(EmpiricalLaw::labels(p), EmpiricalLaw::labels(q)) - 0.6) < 0.01);
    CHECK_THROWS_AS(totalVariation(EmpiricalLaw::scalar(p), EmpiricalLaw::labels(q)), StatisticsError);
}

TEST_CASE("firing rate") {
    std::vector<double> flat(1001, -60.0);
    CHECK(firingRate(flat, -20.0, 1.0) == 0.0);
    const double dt = 0.1;
    std::vector<double> sine;
    for (int k = 0; k <= 10000; ++k) sine.push_back(-std::cos(2 * std::numbers::pi * 10 * k * dt * 1e-3));
    CHECK(firingRate(sine, 0.0, dt) == doctest::Approx(10.0));
    std::vector<double> spikes(20001, -65.0);
    for (int s = 0; s < 37; ++s) {
        spikes[100 + s * 500] = 10.0;
        spikes[101 + s * 500] = 5.0;
    }
    CHECK(firingRate(spikes, -20.0, dt) == doctest::Approx(37.0 / 2.0));
}

TEST_CASE("steady-state effect") {
    std::vector<double> obs(200, -55.0), shifted(200, -54.0), ramp, zero(200, 0.0);
    CHECK(steadyStateEffect(obs, obs) == 0.0);
    CHECK(steadyStateEffect(shifted, obs) == doctest::Approx(1.0));
    for (int k = 0; k < 200; ++k) ramp.push_back(k);
    // last 100 samples are 100..199
    CHECK(steadyStateEffect(ramp, zero) == doctest::Approx(149.5));
    CHECK(steadyStateEffect(ramp, zero, 0.25) == doctest::Approx(174.5));
    CHECK_THROWS_AS(steadyStateEffect(ramp, std::vector<double>(3, 0.0)), StatisticsError);
}

TEST_CASE("input validation") {
    CHECK_THROWS_AS(EmpiricalLaw::scalar({}), StatisticsError);
    CHECK_THROWS_AS(ksTest(EmpiricalLaw::scalar({1, 2}), EmpiricalLaw::scalar({1, 2, 3, 4, 5})), StatisticsError);
    CHECK_THROWS_AS(mmd2(std::vector<double>{1}, std::vector<double>{2}, 0.0), StatisticsError);
    CHECK_THROWS_AS(mmdPermutationTest(std::vector<double>{1}, std::vector<double>{2}, 1.0, 10, 0), StatisticsError);
    CHECK_THROWS_AS(medianHeuristicBandwidth(std::vector<double>{1}), StatisticsError);
}
