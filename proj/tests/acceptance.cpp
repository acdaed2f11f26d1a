// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when any line fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "gibbs/experiments.hpp"

using namespace gibbs;

#ifndef GIBBS_CONFIG_DIR
#define GIBBS_CONFIG_DIR "configs"
#endif

namespace {

struct Line {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...)
{
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

bool close_log(double a, double b, double rel) { return std::fabs(a - b) <= rel * std::max(1.0, std::fabs(b)); }

struct RandomCase {
    Graph g;
    Region R;
    std::vector<double> lx;
    std::vector<int> sg;
    double C;
};

// random connected nearest-neighbour graph, region and boundary spanning ten orders of magnitude
RandomCase random_case(int rep, Rng& rng)
{
    RandomCase c;
    int N = 40 + static_cast<int>(rng.uniform() * 360);
    c.g = with_nearest_neighbour(make_random_connected(N, N / 3, 500 + rep));
    c.R = Region::of(N, {});
    for (int v = 0; v < N; ++v)
        c.R.in[v] = rng.uniform() < 0.7;
    c.C = 1.0 + 3.0 * rng.uniform();
    c.lx.resize(N);
    c.sg.resize(N);
    for (int v = 0; v < N; ++v) {
        c.lx[v] = rng.uniform() < 0.15 ? kNegInf : std::log(c.C) + std::log(10.0) * (10.0 * rng.uniform() - 3.0);
        c.sg[v] = rng.uniform() < 0.5 ? -1 : 1;
    }
    return c;
}

Line c1_solver_oracle()
{
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(1001);
    long long checked = 0, bad = 0;
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        auto c = random_case(rep, rng);
        for (double n : {2.0, 3.0, 4.0}) {
            double lam = n == 2.0 ? 1.0 + rng.uniform() : 1.0;
            auto cf = closed_form_nn(c.g, c.R, c.lx, c.sg, c.C, n, lam);
            auto A = compute_A(c.g, c.R, c.lx, c.sg, c.C, n, lam);
            auto At = compute_A_tilde(c.g, c.R, c.lx, c.C, n, lam);
            for (int x : c.R.vertices()) {
                for (auto [u, v] : {std::pair{A.logA[x], cf.A.logA[x]}, std::pair{At.logA[x], cf.A_tilde.logA[x]}}) {
                    ++checked;
                    worst = std::max(worst, std::fabs(u - v) / std::max(1.0, std::fabs(v)));
                    bad += !close_log(u, v, 1e-9);
                }
            }
        }
    }
    double t = seconds_since(t0);
    return {bad == 0 && t < 10.0,
            fmt("%lld profile values, %lld mismatches, max rel log error %.2e, %.2f s", checked, bad, worst, t)};
}

Line c2_walk_comparison()
{
    Rng rng(2002);
    long long walks = 0, steps = 0, viol = 0;
    for (int rep = 0; rep < 20; ++rep) {
        auto c = random_case(rep, rng);
        auto verts = c.R.vertices();
        if (verts.empty())
            continue;
        for (double n : {2.0, 4.0}) {
            double lam = n == 2.0 ? 1.3 : 1.0;
            auto A = compute_A(c.g, c.R, c.lx, c.sg, c.C, n, lam);
            auto At = compute_A_tilde(c.g, c.R, c.lx, c.C, n, lam);
            for (int w = 0; w < 1000; ++w, ++walks) {
                int cur = verts[static_cast<int>(rng.uniform() * verts.size())];
                double bA = A.logA[cur], bAt = At.logA[cur];
                for (int k = 0; k < 12; ++k) {
                    std::vector<Edge> in;
                    for (auto& e : c.g.coupling[cur])
                        if (c.R.in[e.to])
                            in.push_back(e);
                    if (in.empty())
                        break;
                    Edge e = in[static_cast<int>(rng.uniform() * in.size())];
                    double lf = c.g.kernel.log_f(e.J);
                    if (n == 2.0) {
                        bA += std::log(lam) + lf;
                        bAt += std::log(lam) + lf;
                    } else {
                        bA = (n - 1.0) * bA + lf;
                        bAt = (n - 1.0) * bAt + lf;
                    }
                    cur = e.to;
                    ++steps;
                    viol += A.logA[cur] > bA + 1e-12 * std::max(1.0, std::fabs(bA));
                    viol += At.logA[cur] > bAt + 1e-12 * std::max(1.0, std::fabs(bAt));
                }
            }
        }
    }
    return {viol == 0, fmt("%lld walks, %lld steps, %lld violations (n = 4 and n = 2)", walks, steps, viol)};
}

Line c3_edge_removal()
{
    auto t0 = std::chrono::steady_clock::now();
    // (beta, a, n, M_f, alpha0)
    const double grid[12][5] = {{0.5, 0.5, 4, 2, 1},   {1.0, 0.5, 4, 4, 1}, {2.0, 0.5, 4, 4, 1},  {1.0, 1.0, 4, 4, 0.5},
                                {1.0, 0.25, 3, 2, 1},  {0.3, 0.5, 3, 4, 2}, {1.0, 0.5, 6, 4, 1},  {0.1, 2.0, 6, 8, 1},
                                {1.0, 0.5, 2.5, 2, 1}, {5.0, 1.0, 4, 2, 1}, {1.0, 0.5, 8, 6, 3},  {0.7, 0.1, 5, 3, 0.2}};
    long long trials = 0, v1 = 0, v2 = 0;
    for (int i = 0; i < 12; ++i) {
        EdgeRemovalParams P{grid[i][0], grid[i][1], grid[i][2], grid[i][4], grid[i][3], 0.0};
        P.C = growth_floor(P.beta, P.a, P.n, P.alpha0, P.M_f);
        Rng rng(3000 + i);
        auto r = edge_removal_fuzz(P, 1000000, rng);
        trials += r.trials;
        v1 += r.first_violations;
        v2 += r.second_violations;
    }
    double t = seconds_since(t0);
    return {v1 + v2 == 0 && t < 30.0,
            fmt("%lld samples over 12 parameter sets, violations %lld / %lld, %.1f s", trials, v1, v2, t)};
}

Line c4_progeny()
{
    double worst_exact = 0.0;
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        auto T = progeny_pmf(std::vector<double>{1.0 - p, p}, 1, 50);
        for (int n = 1; n <= 50; ++n)
            worst_exact = std::max(worst_exact, std::fabs(T.pmf[n] - std::pow(p, n - 1) * (1.0 - p)));
    }
    double worst_tv = 0.0;
    std::string tvs;
    for (double b : {0.5, 0.7, 0.9}) {
        OffspringLaw X(b);
        const int nm = 2000;
        const long long runs = 1000000;
        auto T = progeny_pmf(X, 1, nm);
        std::vector<long long> cnt(nm + 2, 0);
        Rng rng(4000 + static_cast<int>(b * 10));
        for (long long r = 0; r < runs; ++r)
            ++cnt[std::min<long long>(simulate_total_progeny(X, 1, nm, rng), nm + 1)];
        double tv = 0.0;
        for (int n = 1; n <= nm; ++n)
            tv += std::fabs(T.pmf[n] - static_cast<double>(cnt[n]) / runs);
        tv += std::fabs(T.residual - static_cast<double>(cnt[nm + 1]) / runs);
        tv *= 0.5;
        worst_tv = std::max(worst_tv, tv);
        tvs += fmt(" b=%.1f:%.4f", b, tv);
    }
    return {worst_exact <= 1e-12 && worst_tv < 0.005,
            fmt("Bernoulli max |error| %.1e; TV vs 1e6 trees%s", worst_exact, tvs.c_str())};
}

Line c5_branching_domination()
{
    Graph g = with_nearest_neighbour(make_box(2, 10, false));
    Measure rho = Measure::pure_tail(1.0, 4.0);
    // small beta keeps the C floor low enough that edges open with non-negligible probability
    RegularityInputs in;
    in.beta = 0.01;
    in.a = 0.5;
    in.n = 4.0;
    in.alpha0 = 1.0;
    in.b_target = 0.9;
    auto rc = regularity_constants(g, rho, in);
    auto pm = p_matrix(g, rho, in.a, in.n, rc.C);
    Rng rng(5005);
    auto rep = branching_domination_check(g, Region::all(g.size()), {g.origin}, pm, 100000, rng);
    return {rep.precondition_ok && rep.dominated && pm.b >= 0.9,
            fmt("C = %.4g, b = %.4f, max (F_T - F_W) = %.5f vs DKW %.5f over 1e5 runs", rc.C, pm.b, rep.worst_gap,
                rep.epsilon)};
}

// Moments of exp(-P(u) - P(v) + c u v) on a square grid.
std::array<double, 3> two_site_oracle(const std::function<double(double)>& pot, double c)
{
    const double R = 7.0;
    const int n = 1400;
    const double h = 2.0 * R / n;
    double z = 0, s1 = 0, s2 = 0, s01 = 0;
    for (int i = 0; i <= n; ++i) {
        double u = -R + h * i;
        for (int j = 0; j <= n; ++j) {
            double v = -R + h * j;
            double w = std::exp(-pot(u) - pot(v) + c * u * v);
            z += w;
            s1 += u * w;
            s2 += u * u * w;
            s01 += u * v * w;
        }
    }
    return {s1 / z, s2 / z, s01 / z};
}

Line c6_sampler()
{
    std::vector<Measure> shipped = {Measure::pure_tail(1.0, 4.0),       Measure::phi4(1.0, -0.5),
                                    Measure::gaussian(0.5),             Measure::phi4(1.0, -1.0),
                                    Measure::poly_potential({0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.2}),
                                    Measure::pure_tail(1.0, 4.0).shift_truncated(0.5, 2.0, 1.5)};
    Graph g = with_nearest_neighbour(make_path(3, false));
    int ks_fail = 0, ks_total = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < shipped.size(); ++i) {
        ModelSpec s = make_spec(g, Region::all(3), 0.0, shipped[i]);
        ChainOptions o;
        o.sweeps = 100000;
        o.burn_in = 10;
        o.seed = 600 + i;
        auto st = run_chain(s, o, {obs_site(0), obs_site(1), obs_site(2)});
        Density d(shipped[i]);
        for (auto& os : st.observables) {
            double D = ks_statistic(os.samples, [&](double u) { return d.cdf(u); });
            double crit = ks_critical(static_cast<long long>(os.samples.size()), 0.001);
            worst = std::max(worst, D / crit);
            ks_fail += D >= crit;
            ++ks_total;
        }
    }
    struct Case {
        Measure rho;
        std::function<double(double)> pot;
        double beta;
    };
    std::vector<Case> cases = {{Measure::gaussian(1.0), [](double u) { return u * u; }, 0.6},
                               {Measure::pure_tail(1.0, 4.0), [](double u) { return u * u * u * u; }, 0.8},
                               {Measure::phi4(1.0, -1.0), [](double u) { return u * u * u * u - u * u; }, 0.5}};
    double worst_z = 0.0, min_ess = 1e300;
    for (auto& c : cases) {
        ModelSpec s = make_spec(with_nearest_neighbour(make_path(2, false)), Region::all(2), c.beta, c.rho);
        ChainOptions o;
        o.sweeps = 300000;
        o.burn_in = 100;
        o.seed = 650;
        auto st = run_chain(s, o, {obs_site(0), obs_product(0, 0), obs_product(0, 1)});
        auto q = two_site_oracle(c.pot, c.beta);
        for (int k = 0; k < 3; ++k) {
            auto& ss = st.observables[k].stats;
            worst_z = std::max(worst_z, std::fabs(ss.mean - q[k]) / ss.stderr_);
            min_ess = std::min(min_ess, ss.ess);
        }
    }
    return {ks_fail == 0 && worst_z < 4.0 && min_ess >= 1e5,
            fmt("KS %d/%d sites above the 99.9%% critical value (max D/crit %.2f); 2-vertex max |z| %.2f, min ESS %.0f",
                ks_fail, ks_total, worst, worst_z, min_ess)};
}

Line c7_monotone_coupling()
{
    Measure rho = Measure::phi4(1.0, -0.5);
    ChainOptions o;
    o.sweeps = 10000;
    o.burn_in = 0;
    o.seed = 707;
    Graph path = with_nearest_neighbour(make_path(41, false));
    Region Lp = ball_region(path, path.origin, 10);
    Graph box = with_nearest_neighbour(make_box(2, 9, false));
    Region Lb = Region::of(box.size(), {});
    for (int v = 0; v < box.size(); ++v) {
        int i = v % 9, j = v / 9;
        Lb.in[v] = i >= 1 && i <= 7 && j >= 1 && j <= 7;
    }
    long long xi_viol = 0, beta_viol = 0, beta_interior = 0;
    Rng rng(708);
    for (auto [g, L] : {std::pair<const Graph*, const Region*>{&path, &Lp}, {&box, &Lb}}) {
        std::vector<double> xa(g->size()), xb(g->size());
        for (int v = 0; v < g->size(); ++v) {
            xa[v] = 4.0 * rng.uniform() - 2.0;
            xb[v] = xa[v] + 2.0 * rng.uniform();
        }
        for (double beta : {0.2, 0.5}) {
            auto r = coupled_run(make_spec(*g, *L, beta, rho, xa), make_spec(*g, *L, beta, rho, xb), o, {});
            xi_viol += r.order_violations + r.interior_violations;
        }
        auto bd = boundary_of(*g, *L).vertices();
        auto r = coupled_run(rho_tilde_spec(*g, *L, 0.2, rho, 2.0, 1.0), rho_tilde_spec(*g, *L, 0.3, rho, 2.0, 1.0),
                             o, {}, bd);
        beta_viol += r.order_violations;
        beta_interior += r.interior_violations;
    }
    return {xi_viol == 0 && beta_viol == 0,
            fmt("xi-ordered violations %lld; beta-ordered rho-tilde violations on the boundary %lld (interior %lld), "
                "10^4 sweeps, path and 7x7 box",
                xi_viol, beta_viol, beta_interior)};
}

Line run_config(const std::string& file, const char* what, double time_limit = 0.0)
{
    auto t0 = std::chrono::steady_clock::now();
    try {
        auto rep = run_experiment(load_config(std::string(GIBBS_CONFIG_DIR) + "/" + file));
        double t = seconds_since(t0);
        std::string d = std::string(what) + ":";
        for (auto& v : rep.verdicts)
            d += fmt(" [%s %s %.4g/%.4g]", v.pass ? "ok" : "FAIL", v.name.c_str(), v.statistic, v.tolerance);
        d += fmt(" %.1f s", t);
        return {rep.passed() && (time_limit <= 0.0 || t < time_limit), d};
    } catch (const std::exception& e) {
        return {false, std::string(what) + ": error " + e.what()};
    }
}

Line both(Line a, Line b) { return {a.pass && b.pass, a.detail + "; " + b.detail}; }

}  // namespace

int main()
{
    struct Criterion {
        const char* name;
        std::function<Line()> run;
    };
    std::vector<Criterion> all = {
        {"A-solver oracle equivalence", c1_solver_oracle},
        {"walk comparison fuzz", c2_walk_comparison},
        {"edge-removal fuzz", c3_edge_removal},
        {"total-progeny formula", c4_progeny},
        {"branching domination", c5_branching_domination},
        {"sampler exactness", c6_sampler},
        {"FKG monotone couplings", c7_monotone_coupling},
        {"tightness dichotomy",
         [] {
             auto t0 = std::chrono::steady_clock::now();
             auto l = both(run_config("tightness_in_xi.json", "in Xi"),
                           run_config("tightness_out_of_xi.json", "out of Xi"));
             l.pass = l.pass && seconds_since(t0) < 600.0;
             return l;
         }},
        {"anti-tightness cascade", [] { return run_config("cascade.json", "path, n = 4, beta = 1"); }},
        {"regularity ratio",
         [] { return both(run_config("regularity_path.json", "5-path"), run_config("regularity_box.json", "5x5 box")); }},
        {"plus-measure suite", [] { return run_config("plus_path.json", "path"); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        Line l;
        try {
            l = all[i].run();
        } catch (const std::exception& e) {
            l = {false, std::string("error: ") + e.what()};
        }
        failed += !l.pass;
        std::printf("%s %2zu %-30s %s\n", l.pass ? "PASS" : "FAIL", i + 1, all[i].name, l.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
    return failed == 0 ? 0 : 1;
}
