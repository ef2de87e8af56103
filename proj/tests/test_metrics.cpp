#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "glt/metrics.hpp"

using namespace glt;

namespace {

// Direct two-pass formulas, written independently of the library.
double oracle_mae(const std::vector<double>& p, const std::vector<double>& t)
{
    long double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(static_cast<long double>(p[i]) - t[i]);
    return static_cast<double>(s / p.size());
}

double oracle_pearson(const std::vector<double>& p, const std::vector<double>& t)
{
    const auto n = static_cast<long double>(p.size());
    long double mp = 0, mt = 0;
    for (std::size_t i = 0; i < p.size(); ++i) mp += p[i], mt += t[i];
    mp /= n, mt /= n;
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        sxy += (p[i] - mp) * (t[i] - mt);
        sxx += (p[i] - mp) * (p[i] - mp);
        syy += (t[i] - mt) * (t[i] - mt);
    }
    return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

double oracle_cs(const std::vector<double>& p, const std::vector<double>& t, double alpha)
{
    int hit = 0;
    for (std::size_t i = 0; i < p.size(); ++i) hit += std::fabs(p[i] - t[i]) <= alpha ? 1 : 0;
    return 100.0 * hit / static_cast<double>(p.size());
}

} // namespace

TEST_CASE("metric examples")
{
    const std::vector<double> t{10, 20, 30}, p{11, 17, 37};
    CHECK(mae(p, t) == doctest::Approx(11.0 / 3));
    CHECK(cumulative_score(p, t, 5.0) == doctest::Approx(200.0 / 3).epsilon(1e-12)); // errors 1, 3, 7
    CHECK(cumulative_score(p, t, 3.0) == doctest::Approx(200.0 / 3).epsilon(1e-12)); // boundary counts
    CHECK(cumulative_score(p, t, 2.999) == doctest::Approx(100.0 / 3).epsilon(1e-12));
    CHECK(cumulative_score(p, t, 0.0) == 0.0);
    CHECK(pearson_r(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0));
    CHECK(pearson_r(std::vector<double>{1, 2, 3}, std::vector<double>{6, 4, 2}) == doctest::Approx(-1.0));
}

TEST_CASE("random cases agree with direct formulas")
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(50, 20);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + trial % 97;
        std::vector<double> p(n), t(n);
        for (std::size_t i = 0; i < n; ++i) t[i] = g(rng), p[i] = t[i] + 0.3 * g(rng) - 15;
        CHECK(std::fabs(mae(p, t) - oracle_mae(p, t)) < 1e-10);
        CHECK(std::fabs(pearson_r(p, t) - oracle_pearson(p, t)) < 1e-10);
        for (double a = 0.0; a <= 5.0; a += 0.5) CHECK(std::fabs(cumulative_score(p, t, a) - oracle_cs(p, t, a)) < 1e-10);
    }
}

TEST_CASE("pearson is invariant to positive affine maps and undefined without spread")
{
    const std::vector<double> p{3, 1, 4, 1, 5, 9, 2, 6}, t{2, 7, 1, 8, 2, 8, 1, 8};
    std::vector<double> q;
    for (double v : p) q.push_back(3.5 * v - 12);
    CHECK(std::fabs(pearson_r(q, t) - pearson_r(p, t)) < 1e-12);
    CHECK_THROWS_AS(pearson_r(std::vector<double>(5, 2.0), std::span<const double>(t).subspan(0, 5)), UndefinedCorrelationError);
}

TEST_CASE("cumulative score is monotone in alpha and bounded")
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 10);
    std::vector<double> p(300), t(300, 0.0);
    for (auto& v : p) v = u(rng);
    double prev = -1;
    for (double a = 0.0; a <= 11.0; a += 0.25) {
        const double cs = cumulative_score(p, t, a);
        CHECK(cs >= prev);
        CHECK(cs >= 0.0);
        CHECK(cs <= 100.0);
        prev = cs;
    }
    CHECK(prev == 100.0);
}

TEST_CASE("input validation")
{
    const std::vector<double> a{1, 2}, b{1};
    CHECK_THROWS_AS(mae(a, b), ContractError);
    CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), ContractError);
    CHECK_THROWS_AS(cumulative_score(a, a, -1.0), ContractError);
    CHECK_THROWS_AS(mae(std::vector<double>{std::nan("")}, std::vector<double>{1}), NumericalError);
}

TEST_CASE("report over the default grid")
{
    const std::vector<double> t{10, 20, 30}, p{11, 17, 37};
    auto r = evaluate(p, t);
    CHECK(r.n == 3);
    CHECK(r.cs.size() == 11);
    CHECK(r.cs.front().first == 0.0);
    CHECK(r.cs.back().first == 5.0);
    REQUIRE(r.pearson_r.has_value());
    std::ostringstream os;
    write_report_csv(os, r, "axial");
    CHECK(os.str().rfind("axial,n,3\naxial,mae,", 0) == 0);
    CHECK(os.str().find("axial,cs@5,66.6") != std::string::npos);

    auto flat = evaluate(std::vector<double>{4, 4}, std::vector<double>{1, 2});
    CHECK_FALSE(flat.pearson_r.has_value());
}
