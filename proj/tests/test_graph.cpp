#include <catch_amalgamated.hpp>

#include <sstream>

#include "gibbs/graph.hpp"
#include "gibbs/rng.hpp"

using namespace gibbs;
using Catch::Approx;

TEST_CASE("path and box builders")
{
    Graph p = make_path(3, false);
    CHECK(p.size() == 3);
    CHECK(p.edge_count() == 2);
    CHECK(p.origin == 1);
    Graph b = make_box(2, 3, false);
    CHECK(b.size() == 9);
    CHECK(b.edge_count() == 12);
    CHECK(b.origin == 4);
    CHECK(connected(b));
}

TEST_CASE("edge list parsing")
{
    std::istringstream ok("# tiny\n0 1 1.0\n1 2 0.5  # trailing comment\n");
    Graph g = parse_edge_list(ok);
    CHECK(g.size() == 3);
    CHECK(g.J(1, 2) == 0.5);
    CHECK(g.J(2, 1) == 0.5);

    std::istringstream dup("0 1 1\n1 0 1\n");
    CHECK_THROWS_WITH(parse_edge_list(dup), Catch::Matchers::ContainsSubstring("duplicate coupling"));

    std::istringstream disc("vertices 4\n0 1 1\n2 3 1\n");
    CHECK_THROWS_WITH(parse_edge_list(disc), Catch::Matchers::ContainsSubstring("disconnected"));

    std::istringstream self("0 0 1\n");
    CHECK_THROWS(parse_edge_list(self));
}

TEST_CASE("interactions")
{
    Graph nn = with_nearest_neighbour(make_path(3, false));
    CHECK(nn.J(0, 1) == 1.0);
    CHECK(nn.J(1, 2) == 1.0);
    CHECK(nn.J(0, 2) == 0.0);

    Graph lr = with_long_range(make_path(3, false), 2.0, 2);
    CHECK(lr.J(0, 2) == 0.25);
    CHECK_THROWS(with_long_range(make_path(3, false), 0.0, 2));

    Graph box = with_long_range(make_box(2, 3, false), 1.0, 4);
    for (int x = 0; x < box.size(); ++x)
        for (int y = 0; y < box.size(); ++y)
            CHECK(box.J(x, y) == box.J(y, x));
}

TEST_CASE("kernel families")
{
    Kernel ls = Kernel::log_sqrt();
    CHECK(ls(0.5) == 1.0);
    CHECK(ls(1e-4) == Approx(std::sqrt(std::log(1e4))));
    CHECK(ls(-1e-4) == ls(1e-4));
    Kernel pw = Kernel::power(0.5);
    CHECK(pw(0.25) == Approx(2.0));
    CHECK(pw(3.0) == 1.0);
}

TEST_CASE("validate interactions")
{
    Graph box = with_nearest_neighbour(make_box(2, 6, false));
    auto rep = validate_interactions(box, 4.0);
    CHECK(rep.c1_ok);
    CHECK(rep.M_f_certified == 4.0);

    // power kernel with alpha >= 1/n dominates log(1/t)^(1/n); checked pointwise on an independent grid
    for (double n : {3.0, 4.0, 6.0}) {
        Graph g = with_nearest_neighbour(make_path(5, false));
        g.kernel = Kernel::power(1.0 / n);
        CHECK(validate_interactions(g, n).kernel_tail_ok);
        for (double t = 1e-6; t < std::exp(-1.0); t *= 1.7)
            CHECK(std::pow(t, -1.0 / n) >= std::pow(std::log(1.0 / t), 1.0 / n));
    }
    Graph g = with_nearest_neighbour(make_path(5, false));
    g.kernel = Kernel::log_sqrt();
    CHECK(validate_interactions(g, 2.0).kernel_tail_ok);
    CHECK(validate_interactions(g, 3.0).kernel_tail_ok);
    g.kernel = Kernel::unit();
    CHECK_FALSE(validate_interactions(g, 3.0).kernel_tail_ok);

    Graph lr = with_long_range(make_path(9, false), 2.0, 8);
    lr.kernel = Kernel::log_sqrt();
    auto r2 = validate_interactions(lr, 3.0);
    CHECK(r2.reasonable_ok);
    CHECK(r2.c_certified > 0.5);
}

TEST_CASE("ball sizes")
{
    Graph p = make_path(101, true);
    CHECK(ball_size(p, p.origin, 2).size == 5);
    CHECK_FALSE(ball_size(p, p.origin, 2).saturated);
    CHECK_FALSE(ball_size(p, p.origin, 50).saturated);
    CHECK(ball_size(p, p.origin, 51).saturated);
    Graph b = make_box(2, 21, true);
    CHECK(ball_size(b, b.origin, 1).size == 5);
    Graph t = make_regular_tree(3, 4);
    CHECK(ball_size(t, t.origin, 2).size == 10);

    long long prev = 0;
    for (int k = 0; k < 30; ++k) {
        auto s = ball_size(b, b.origin, k).size;
        CHECK(s >= prev);
        prev = s;
    }
    CHECK(prev == b.size());
}

TEST_CASE("exterior field")
{
    Graph p = with_nearest_neighbour(make_path(5, false));
    Region L = Region::of(5, {1, 2, 3});
    std::vector<double> xi = {5.0, 0, 0, 0, 0};
    CHECK(h_field(p, L, xi, 2).value == 0.0);
    CHECK(h_field(p, L, xi, 1).value == 5.0);

    Graph lr = with_long_range(make_path(7, false), 2.0, 6);
    Region L2 = Region::of(7, {3, 4, 5, 6});
    std::vector<double> one(7, 1.0);
    double expect = 0.0;
    for (int d = 1; d <= 3; ++d)
        expect += 1.0 / (d * d);
    CHECK(h_field(lr, L2, one, 3).value == Approx(expect).epsilon(1e-14));
    CHECK(h_field(lr, L2, one, 3).value == Approx(1.3611).margin(1e-4));
}

TEST_CASE("exterior field is linear in the boundary values")
{
    Rng rng(7);
    Graph g = with_long_range(make_box(2, 7, true), 1.5, 5);
    Region L = ball_region(g, g.origin, 2);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> a(g.size()), b(g.size()), c(g.size());
        double s = 4.0 * rng.uniform() - 2.0, t = 4.0 * rng.uniform() - 2.0;
        for (int v = 0; v < g.size(); ++v) {
            a[v] = 10.0 * rng.uniform() - 5.0;
            b[v] = 10.0 * rng.uniform() - 5.0;
            c[v] = s * a[v] + t * b[v];
        }
        for (int x : L.vertices()) {
            double lhs = h_field(g, L, c, x).value;
            double rhs = s * h_field(g, L, a, x).value + t * h_field(g, L, b, x).value;
            double scale = std::max(1.0, std::fabs(rhs));
            CHECK(std::fabs(lhs - rhs) <= 1e-12 * scale);
        }
    }
}

TEST_CASE("region boundary and interior")
{
    Graph b = with_nearest_neighbour(make_box(2, 5, false));
    Region L = ball_region(b, b.origin, 1);
    Region d = boundary_of(b, L), in = interior_of(b, L);
    CHECK(d.size() == 4);
    CHECK(in.size() == 1);
    for (int v = 0; v < b.size(); ++v) {
        CHECK_FALSE((d.in[v] && in.in[v]));
        if (d.in[v])
            CHECK(L.in[v]);
    }
}
