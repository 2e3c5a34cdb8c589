#include <doctest.h>

#include <cmath>
#include <random>

#include "pheno/common.hpp"
#include "pheno/preprocess.hpp"

using namespace pheno;
using namespace pheno::preprocess;

namespace {

std::vector<double> gaps(const std::vector<double>& t) {
    std::vector<double> g;
    for (std::size_t i = 1; i < t.size(); ++i) g.push_back(t[i] - t[i - 1]);
    return g;
}

}  // namespace

TEST_CASE("warp gaps") {
    CHECK(gaps(warp_times(std::vector<double>{0, 8, 9, 9.125}, {3, 0})) == std::vector<double>{2, 1, 0.5});
    CHECK(warp_times(std::vector<double>{0, 4}, {2, 0.5}) == std::vector<double>{0, 2.5});
    const std::vector<double> t{0, 0.3, 1.7, 2.0, 11.25};
    CHECK(warp_times(t, {1, 0}) == t);
}

TEST_CASE("warp preserves order and shrinks long gaps") {
    std::mt19937_64 rng(11);
    std::exponential_distribution<double> gap(0.7);
    std::uniform_real_distribution<double> ua(1.0, 5.0), ub(0.0, 2.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> t{0.0};
        const int n = 3 + static_cast<int>(rng() % 20);
        for (int i = 1; i < n; ++i) t.push_back(t.back() + gap(rng) + 1e-6);
        const WarpParams p{ua(rng), ub(rng)};
        const auto w = warp_times(t, p);
        REQUIRE(w.size() == t.size());
        CHECK(w[0] == 0.0);
        for (std::size_t i = 1; i < w.size(); ++i) {
            REQUIRE(w[i] > w[i - 1]);
            const double d = t[i] - t[i - 1];
            if (p.b == 0.0 && p.a > 1.0) {
                const double dw = w[i] - w[i - 1];
                if (d > 1.0) CHECK(dw < d);
                if (d < 1.0) CHECK(dw > d);
            }
        }
    }
}

TEST_CASE("warp rejects bad input") {
    CHECK_THROWS_AS(warp_times(std::vector<double>{0, 1, 1}, {}), PreconditionError);
    CHECK_THROWS_AS(warp_times(std::vector<double>{1, 2}, {}), PreconditionError);
    CHECK_THROWS_AS(warp_times(std::vector<double>{0, 1}, {0.5, 0}), ParameterError);
    CHECK_THROWS_AS(warp_times(std::vector<double>{0, 1}, {3, -1}), ParameterError);
}

TEST_CASE("TimeWarp agrees with warp_times at knots and stays continuous") {
    const std::vector<double> t{0, 0.5, 2, 10};
    const WarpParams p{3, 0.25};
    const TimeWarp w(t, p);
    const auto direct = warp_times(t, p);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(w(t[i]) == doctest::Approx(direct[i]).epsilon(1e-14));
    double prev = w(-5.0);
    for (double x = -5.0 + 0.01; x < 20.0; x += 0.01) {
        const double y = w(x);
        CHECK(y > prev);
        prev = y;
    }
    CHECK(w(-1e-9) == doctest::Approx(0.0).epsilon(1e-2));
    CHECK(w(10 + 8) - w(10) == doctest::Approx(2.0));
    CHECK(w(-8) == doctest::Approx(-2.0));
}

TEST_CASE("standardize") {
    const auto [z, s] = standardize(std::vector<double>{1, 2, 3});
    CHECK(s.mean == 2.0);
    CHECK(s.std == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-15));
    CHECK(z[0] == doctest::Approx(-1.224744871391589).epsilon(1e-14));
    CHECK(z[1] == 0.0);
    CHECK(z[2] == doctest::Approx(1.224744871391589).epsilon(1e-14));

    const auto [z5, s5] = standardize(std::vector<double>{5, 5, 5});
    CHECK(z5 == std::vector<double>{0, 0, 0});
    CHECK(s5.std == 1.0);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd(120, 35);
    std::vector<double> v(50);
    for (auto& x : v) x = nd(rng);
    const auto [zz, ss] = standardize(v);
    double m = 0, q = 0;
    for (double x : zz) m += x;
    m /= 50;
    for (double x : zz) q += (x - m) * (x - m);
    CHECK(std::abs(m) < 1e-12);
    CHECK(std::sqrt(q / 50) == doctest::Approx(1.0).epsilon(1e-12));
    const auto back = unstandardize(zz, ss);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(back[i] == doctest::Approx(v[i]).epsilon(1e-12));
}

TEST_CASE("unstandardize mean and variance") {
    {
        const auto [m, v] = unstandardize_mean_var(std::vector<double>{0}, std::vector<double>{1}, {10, 2});
        CHECK(m[0] == 10.0);
        CHECK(v[0] == 4.0);
    }
    {
        const auto [m, v] = unstandardize_mean_var(std::vector<double>{-1}, std::vector<double>{0}, {3, 5});
        CHECK(m[0] == -2.0);
        CHECK(v[0] == 0.0);
    }
    {
        const auto [m, v] = unstandardize_mean_var(std::vector<double>{0.3}, std::vector<double>{0.7}, {0, 1});
        CHECK(m[0] == 0.3);
        CHECK(v[0] == 0.7);
    }
    CHECK_THROWS_AS(unstandardize_mean_var(std::vector<double>{0}, std::vector<double>{-0.1}, {0, 1}), PreconditionError);
}
