#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "gibbs/measures.hpp"
#include "gibbs/rng.hpp"

using namespace gibbs;
using Catch::Approx;

namespace {

// integral over (0, inf) of u^k exp(-c u^4) du
double quartic_half_moment(int k, double c) { return std::tgamma((k + 1) / 4.0) / (4.0 * std::pow(c, (k + 1) / 4.0)); }

double normal_cdf(double x, double sd) { return 0.5 * std::erfc(-x / (sd * std::sqrt(2.0))); }

}  // namespace

TEST_CASE("measure construction")
{
    Measure q = Measure::pure_tail(1.0, 4.0);
    for (double u : {-2.0, -0.3, 0.0, 1.7})
        CHECK(q.log_density(u) == Approx(-std::pow(u, 4)).margin(1e-15));
    Measure p = Measure::phi4(1.0, -1.0);
    CHECK(p.log_density(1.3) == Approx(-std::pow(1.3, 4) + 1.3 * 1.3));
    CHECK(p.tail_exponent() == 4.0);
    CHECK_THROWS(Measure::poly_potential({0, 0, 0, 1}));
    CHECK_THROWS(Measure::poly_potential({0, 0, 1, 0, -1}));
    CHECK_THROWS(Measure::poly_potential({0, 0, 1}));
    CHECK_THROWS(Measure::pure_tail(1.0, 2.0));
    CHECK_THROWS(Measure::gaussian(0.0));
}

TEST_CASE("super-gaussian condition")
{
    Measure q = Measure::pure_tail(1.0, 4.0);
    CHECK(check_super_gaussian(q, 0.5, 4.0));
    CHECK_FALSE(check_super_gaussian(q, 2.0, 4.0));
    Measure g = Measure::gaussian(1.0);
    CHECK(check_super_gaussian(g, 0.5, 2.0));
    CHECK(check_super_gaussian(g, 0.99, 2.0));
    CHECK_FALSE(check_super_gaussian(g, 1.0, 2.0));
    CHECK_FALSE(check_super_gaussian(g, 1.5, 2.0));
    CHECK_THROWS_WITH(q.tilted(2.0, 4.0), Catch::Matchers::ContainsSubstring("tilt diverges"));
}

TEST_CASE("divergent tilts grow without bound under truncation")
{
    Measure q = Measure::pure_tail(1.0, 4.0);
    double prev = -1e300;
    for (double R : {1.0, 2.0, 3.0, 4.0, 5.0}) {
        double v = truncated_log_mass(q, 2.0, 4.0, R);
        CHECK(v > prev);
        prev = v;
    }
    CHECK(prev > 100.0);
    Measure g = Measure::gaussian(1.0);
    prev = -1e300;
    for (double R : {1.0, 4.0, 16.0, 64.0}) {
        double v = truncated_log_mass(g, 1.0, 2.0, R);
        CHECK(v > prev + 0.5);
        prev = v;
    }
    // convergent case saturates
    CHECK(truncated_log_mass(q, 0.5, 4.0, 8.0) == Approx(truncated_log_mass(q, 0.5, 4.0, 16.0)).epsilon(1e-12));
}

TEST_CASE("tilting")
{
    Measure q = Measure::pure_tail(1.0, 4.0);
    Density d0(q), d1(tilt(q, 0.0, 4.0));
    CHECK(d1.normalization() == Approx(d0.normalization()).epsilon(1e-12));
    CHECK(d0.normalization() == Approx(2.0 * std::tgamma(1.25)).epsilon(1e-10));

    Measure a = tilt(tilt(q, 0.2, 4.0), 0.3, 4.0), b = tilt(q, 0.5, 4.0);
    for (double u = -3.0; u <= 3.0; u += 0.37)
        CHECK(a.log_density(u) == Approx(b.log_density(u)).epsilon(1e-14).margin(1e-14));

    Density dh(b);
    CHECK(dh.normalization() == Approx(std::pow(2.0, 0.25) * 2.0 * std::tgamma(1.25)).epsilon(1e-10));
}

TEST_CASE("shift truncation")
{
    Measure q = Measure::pure_tail(1.0, 4.0);
    Measure ra = tilt(q, 0.5, 4.0);
    Measure z0 = shift_truncate(q, 0.5, 4.0, 0.0);
    Density dz0(z0), dra(ra);
    CHECK(dz0.normalization() == Approx(dra.normalization() / 2.0).epsilon(1e-10));
    CHECK(z0.log_density(-0.1) == kNegInf);

    Measure z1 = shift_truncate(q, 0.5, 4.0, 1.0);
    Density dz1(z1);
    CHECK(dz1.normalization() == Approx(dz0.normalization()).epsilon(1e-10));
    for (double p : {0.1, 0.5, 0.9, 0.999})
        CHECK(dz1.quantile(p) == Approx(1.0 + dz0.quantile(p)).epsilon(1e-9));
    double half_mean = quartic_half_moment(1, 0.5) / quartic_half_moment(0, 0.5);
    CHECK(dz1.mean() == Approx(1.0 + half_mean).epsilon(1e-10));
    CHECK(dz1.cdf(0.999) == 0.0);
}

TEST_CASE("quadrature queries")
{
    CHECK(quadrature_eval(Measure::gaussian(0.5), Query::normalization) == Approx(std::sqrt(2.0 * M_PI)).epsilon(1e-10));
    CHECK(quadrature_eval(Measure::pure_tail(1.0, 4.0), Query::normalization) ==
          Approx(1.8128049541109541).epsilon(1e-10));
    for (auto m : {Measure::gaussian(0.5), Measure::pure_tail(1.0, 4.0), Measure::phi4(1.0, -1.0),
                   Measure::poly_potential({0, 0, 0.5, 0, 0, 0, 0.1})}) {
        CHECK(std::fabs(quadrature_eval(m, Query::moment, 1)) < 1e-10);
        CHECK(std::fabs(quadrature_eval(m, Query::moment, 3)) < 1e-10);
    }
    Density g(Measure::gaussian(0.5));
    for (double u : {-2.0, -0.5, 0.3, 1.9})
        CHECK(g.cdf(u) == Approx(normal_cdf(u, 1.0)).margin(1e-10));
    CHECK(g.quantile(0.975) == Approx(1.959963984540054).epsilon(1e-9));
    CHECK(g.tail_mass(1.0) == Approx(std::erfc(1.0 / std::sqrt(2.0))).margin(1e-10));
    CHECK(g.moment(2) == Approx(1.0).epsilon(1e-10));
    Density q(Measure::pure_tail(1.0, 4.0));
    CHECK(q.moment(2) == Approx(quartic_half_moment(2, 1.0) / quartic_half_moment(0, 1.0)).epsilon(1e-10));
}

TEST_CASE("cdf is a non-decreasing map onto [0,1]")
{
    for (auto m : {Measure::gaussian(0.5), Measure::phi4(1.0, -2.0), tilt(Measure::pure_tail(1.0, 6.0), 0.5, 6.0)}) {
        Density d(m);
        double prev = -1.0;
        for (double u = -6.0; u <= 6.0; u += 0.05) {
            double c = d.cdf(u);
            CHECK(c >= prev - 1e-15);
            CHECK(c >= -1e-10);
            CHECK(c <= 1.0 + 1e-10);
            prev = c;
        }
        CHECK(d.cdf(-50.0) < 1e-10);
        CHECK(d.cdf(50.0) > 1.0 - 1e-10);
    }
}

TEST_CASE("inverse-cdf draws")
{
    QuantileTable g(Measure::gaussian(0.5));
    CHECK(std::fabs(g.sample(0.5)) < 1e-9);
    double prev = -1e300;
    for (int i = 1; i < 20000; ++i) {
        double v = g.sample(i / 20000.0);
        CHECK(v > prev);
        prev = v;
    }
    for (double p : {0.01, 0.3, 0.77, 0.999})
        CHECK(g.sample(p) == Approx(Density(Measure::gaussian(0.5)).quantile(p)).margin(1e-7));

    Rng rng(11);
    const int N = 100000;
    std::vector<double> xs(N);
    for (auto& x : xs)
        x = draw(g, rng);
    std::sort(xs.begin(), xs.end());
    double D = 0.0;
    for (int i = 0; i < N; ++i) {
        double F = normal_cdf(xs[i], 1.0);
        D = std::max({D, F - static_cast<double>(i) / N, static_cast<double>(i + 1) / N - F});
    }
    CHECK(D < 1.95 / std::sqrt(static_cast<double>(N)));

    QuantileTable at(Measure::atomic({{-1.0, 1.0}, {1.0, 1.0}}));
    int plus = 0;
    for (int i = 0; i < N; ++i) {
        double v = draw(at, rng);
        REQUIRE((v == 1.0 || v == -1.0));
        plus += v > 0;
    }
    CHECK(std::fabs(plus / double(N) - 0.5) < 3.0 * std::sqrt(0.25 / N));
}

TEST_CASE("empirical moments match quadrature")
{
    Rng rng(5);
    const int N = 100000;
    for (auto m : {Measure::pure_tail(1.0, 4.0), Measure::phi4(1.0, -1.0), shift_truncate(Measure::gaussian(1.0), 0.5, 2.0, 0.7)}) {
        QuantileTable t(m);
        Density d(m);
        for (int k : {1, 2}) {
            double s = 0.0, s2 = 0.0;
            Rng r = rng.split(k);
            for (int i = 0; i < N; ++i) {
                double v = std::pow(t.sample(r.uniform()), k);
                s += v;
                s2 += v * v;
            }
            double mean = s / N, se = std::sqrt((s2 / N - mean * mean) / N);
            CHECK(std::fabs(mean - d.moment(k)) < 4.0 * se);
        }
    }
}

TEST_CASE("tilted tables are monotone in the tilt")
{
    Measure m = Measure::phi4(1.0, -1.0);
    std::vector<QuantileTable> ts;
    for (double s : {-3.0, -0.5, 0.0, 0.2, 4.0})
        ts.emplace_back(m, s);
    for (double U = 0.0005; U < 1.0; U += 0.0173)
        for (std::size_t i = 1; i < ts.size(); ++i)
            CHECK(ts[i].sample(U) >= ts[i - 1].sample(U));
}

TEST_CASE("default alpha0 and vertex measures")
{
    CHECK(default_alpha0(Measure::pure_tail(1.0, 4.0), 0.5, 4.0) == 1.0);
    std::vector<Measure> rho(3, Measure::gaussian(1.0));
    auto c = check_vertex_measures(rho, {0.2, 0.3, 0.4}, 0.1, 0.5, -1.0, 1.0, 0.1, 100.0);
    CHECK(c.a_bounds_ok);
    CHECK(c.t_mass_ok);
    CHECK(c.total_mass_ok);
    auto c2 = check_vertex_measures(rho, {0.2, 0.3, 0.9}, 0.1, 0.5, -1.0, 1.0, 0.1, 100.0);
    CHECK_FALSE(c2.a_bounds_ok);
}
