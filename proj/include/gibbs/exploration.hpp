#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "boundary.hpp"
#include "graph.hpp"
#include "measures.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace gibbs {

// Open-edge probabilities p_xy = rho_{a/2}(|u| >= C f(J_xy)) / rho_{a/2}(R).
struct PMatrix {
    std::vector<std::vector<std::pair<int, double>>> p;  // per x: (y, p_xy) for J_xy != 0
    std::vector<double> row_sum;
    double b = 1.0;  // inf_x prod_y (1 - p_xy)
    double max_row_sum = 0.0;

    double at(int x, int y) const
    {
        for (auto& [v, q] : p[x])
            if (v == y)
                return q;
        return 0.0;
    }
};

inline PMatrix p_matrix(const Graph& g, const Measure& rho, double a, double n, double C)
{
    if (!(C >= 1.0))
        throw std::invalid_argument("open-edge probabilities need C >= 1");
    Density half(rho.tilted(a / 2.0, n));
    std::map<double, double> cache;
    PMatrix m;
    m.p.assign(g.size(), {});
    m.row_sum.assign(g.size(), 0.0);
    double min_log = 0.0;
    for (int x = 0; x < g.size(); ++x) {
        double logprod = 0.0;
        for (auto& e : g.coupling[x]) {
            double thr = C * g.kernel(e.J);
            auto it = cache.find(thr);
            double q = it != cache.end() ? it->second : (cache[thr] = half.tail_mass(thr));
            m.p[x].push_back({e.to, q});
            m.row_sum[x] += q;
            logprod += std::log1p(-std::min(q, 1.0));
        }
        min_log = std::min(min_log, logprod);
        m.max_row_sum = std::max(m.max_row_sum, m.row_sum[x]);
    }
    m.b = std::exp(min_log);
    return m;
}

struct ClusterDecomposition {
    std::vector<int> generation;               // -1 outside the cluster
    std::vector<std::vector<int>> generations;  // C_0, C_1, ...

    int size() const
    {
        int s = 0;
        for (auto& g : generations)
            s += static_cast<int>(g.size());
        return s;
    }
    bool contains(int x) const { return generation[x] >= 0; }
};

enum class SeedRule {
    any_seed,       // walks of length >= 1 may start at any vertex of Lambda'
    threshold_seed  // walks start only at vertices of C_0
};

// Cluster of vertices reachable from Lambda' along walks whose spins exceed growing thresholds:
// step k from x_0 needs log|phi| >= log C + tau_k with tau_0 = log A_{x0},
// tau_k = (n-1) tau_{k-1} + log f (n > 2) or tau_{k-1} + log lambda + log f (n = 2).
inline ClusterDecomposition build_cluster(const Graph& g, const std::vector<double>& phi, const Region& Lambda,
                                          const std::vector<int>& Lambda_prime, const GrowthProfile& profile,
                                          double C, double n, double lambda = 1.0,
                                          SeedRule rule = SeedRule::any_seed)
{
    const int N = g.size();
    const bool two = (n == 2.0);
    const double logC = std::log(C);
    const double inf = std::numeric_limits<double>::infinity();
    auto logabs = [&](int v) { return phi[v] == 0.0 ? -inf : std::log(std::fabs(phi[v])); };

    ClusterDecomposition c;
    c.generation.assign(N, -1);
    c.generations.push_back({});

    // frontier states: vertex -> smallest tau reaching it at the current length
    std::map<int, double> frontier;
    std::vector<double> best_tau(N, inf);
    for (int x : Lambda_prime) {
        if (!Lambda.in[x])
            throw std::invalid_argument("Lambda' must be a subset of Lambda");
        double tau0 = profile.logA[x];
        bool seed_ok = logabs(x) >= logC + tau0;
        if (seed_ok && c.generation[x] < 0) {
            c.generation[x] = 0;
            c.generations[0].push_back(x);
        }
        if (rule == SeedRule::any_seed || seed_ok) {
            auto it = frontier.find(x);
            if (it == frontier.end() || tau0 < it->second)
                frontier[x] = tau0;
        }
    }
    for (auto& [v, t] : frontier)
        best_tau[v] = std::min(best_tau[v], t);

    const int max_len = N * N + 8;
    for (int len = 1; len <= max_len && !frontier.empty(); ++len) {
        std::map<int, double> next;
        for (auto& [x, tau] : frontier) {
            for (auto& e : g.coupling[x]) {
                int y = e.to;
                if (!Lambda.in[y])
                    continue;
                double lf = g.kernel.log_f(e.J);
                double t2 = two ? tau + std::log(lambda) + lf : (n - 1.0) * tau + lf;
                if (logabs(y) < logC + t2)
                    continue;
                auto it = next.find(y);
                if (it == next.end() || t2 < it->second)
                    next[y] = t2;
            }
        }
        frontier.clear();
        std::vector<int> fresh;
        for (auto& [y, t] : next) {
            if (c.generation[y] < 0) {
                c.generation[y] = len;
                fresh.push_back(y);
            }
            // a state dominated by an earlier, shorter one cannot reach anything new
            if (t < best_tau[y]) {
                best_tau[y] = t;
                frontier[y] = t;
            }
        }
        if (!fresh.empty()) {
            c.generations.resize(len + 1);
            c.generations[len] = std::move(fresh);
        }
    }
    return c;
}

struct ExplorationTrace {
    std::vector<std::vector<int>> W;  // W_0 = Lambda', W_1, ...
    int total = 0;                    // |W| = sum over i >= 1 of |W_i|
    int generations() const { return static_cast<int>(W.size()) - 1; }
};

// Generation-by-generation independent edge openings into unvisited vertices of Lambda.
template <class RNG>
ExplorationTrace simulate_exploration(const Graph& g, const Region& Lambda, const std::vector<int>& Lambda_prime,
                                      const PMatrix& pm, RNG& rng, std::vector<char>* scratch = nullptr)
{
    std::vector<char> local;
    std::vector<char>& visited = scratch ? *scratch : local;
    visited.assign(g.size(), 0);
    ExplorationTrace tr;
    tr.W.push_back(Lambda_prime);
    for (int x : Lambda_prime)
        visited[x] = 1;
    while (!tr.W.back().empty()) {
        std::vector<int> nxt;
        for (int x : tr.W.back()) {
            for (auto& [y, q] : pm.p[x]) {
                if (visited[y] || !Lambda.in[y] || q <= 0.0)
                    continue;
                if (rng.uniform() < q) {
                    visited[y] = 1;
                    nxt.push_back(y);
                }
            }
        }
        tr.total += static_cast<int>(nxt.size());
        tr.W.push_back(std::move(nxt));
    }
    tr.W.pop_back();
    return tr;
}

// Offspring law dominating the exploration: P[0] = b, P[1] = 1 - b - (1-b)^2/b, P[k] = (1-b)^k for k >= 2.
struct OffspringLaw {
    double b;

    explicit OffspringLaw(double bb) : b(bb)
    {
        if (!(b >= 0.5 && b < 1.0))
            throw std::invalid_argument("offspring law needs b in [1/2, 1)");
    }

    // Closed form without the range check; negative entries appear for b < 1/2.
    static double raw_pmf(double b, int k)
    {
        if (k < 0)
            return 0.0;
        if (k == 0)
            return b;
        if (k == 1)
            return 1.0 - b - (1.0 - b) * (1.0 - b) / b;
        return std::pow(1.0 - b, k);
    }

    double pmf(int k) const { return raw_pmf(b, k); }

    double mean() const
    {
        const double q = 1.0 - b;
        return pmf(1) + (q / (b * b) - q);
    }

    bool subcritical() const { return mean() < 1.0; }

    // Smallest b in [1/2, 1) above which the mean is below one (bisection on the closed form).
    static double subcritical_threshold()
    {
        double lo = 0.5, hi = 1.0 - 1e-12;
        auto mean_at = [](double b) { return OffspringLaw(b).mean(); };
        if (mean_at(lo) < 1.0)
            return lo;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            (mean_at(mid) < 1.0 ? hi : lo) = mid;
        }
        return hi;
    }

    double mgf(double theta) const
    {
        const double q = (1.0 - b) * std::exp(theta);
        if (q >= 1.0)
            return std::numeric_limits<double>::infinity();
        return b + pmf(1) * std::exp(theta) + q * q / (1.0 - q);
    }

    std::vector<double> table(int kmax) const
    {
        std::vector<double> t(kmax + 1);
        for (int k = 0; k <= kmax; ++k)
            t[k] = pmf(k);
        return t;
    }

    template <class RNG>
    int sample(RNG& rng) const
    {
        double u = rng.uniform();
        double c = b;
        if (u < c)
            return 0;
        c += pmf(1);
        if (u < c)
            return 1;
        const double q = 1.0 - b;
        double term = q * q;
        int k = 2;
        while (true) {
            c += term;
            if (u < c || term < 1e-300)
                return k;
            term *= q;
            ++k;
        }
    }
};

struct ProgenyPmf {
    std::vector<double> pmf;  // P[T = n] for n = 0..n_max
    double residual = 0.0;    // 1 - sum(pmf): mass of T > n_max (or of infinite T)
    double truncation_error = 0.0;
};

// P[T = n] = (k/n) P[X_1 + ... + X_n = n - k] via log-domain convolution powers.
// Offspring values above n_max never contribute to entries <= n_max, so cutting X there is exact.
inline ProgenyPmf progeny_pmf(const std::vector<double>& offspring, int k, int n_max)
{
    if (k < 1 || n_max < k)
        throw std::invalid_argument("progeny pmf needs 1 <= k <= n_max");
    const double ninf = -std::numeric_limits<double>::infinity();
    const int M = n_max;
    std::vector<double> lx(M + 1, ninf);
    for (int i = 0; i <= M && i < static_cast<int>(offspring.size()); ++i)
        if (offspring[i] > 0.0)
            lx[i] = std::log(offspring[i]);
    ProgenyPmf out;
    out.pmf.assign(M + 1, 0.0);
    std::vector<double> s = lx, tmp(M + 1);  // law of S_1
    for (int n = 1; n <= M; ++n) {
        if (n > 1) {
            for (int m = 0; m <= M; ++m) {
                double mx = ninf;
                for (int j = 0; j <= m; ++j)
                    if (s[j] != ninf && lx[m - j] != ninf)
                        mx = std::max(mx, s[j] + lx[m - j]);
                if (mx == ninf) {
                    tmp[m] = ninf;
                    continue;
                }
                double acc = 0.0;
                for (int j = 0; j <= m; ++j)
                    if (s[j] != ninf && lx[m - j] != ninf)
                        acc += std::exp(s[j] + lx[m - j] - mx);
                tmp[m] = mx + std::log(acc);
            }
            s.swap(tmp);
        }
        if (n >= k && s[n - k] != ninf)
            out.pmf[n] = static_cast<double>(k) / n * std::exp(s[n - k]);
    }
    double tot = 0.0;
    for (double v : out.pmf)
        tot += v;
    out.residual = 1.0 - tot;
    return out;
}

inline ProgenyPmf progeny_pmf(const OffspringLaw& X, int k, int n_max) { return progeny_pmf(X.table(n_max), k, n_max); }

template <class RNG>
long long simulate_total_progeny(const OffspringLaw& X, int k, long long cap, RNG& rng)
{
    long long alive = k, total = k;
    while (alive > 0 && total <= cap) {
        --alive;
        int c = X.sample(rng);
        alive += c;
        total += c;
    }
    return total;
}

// One-sided DKW half-width at confidence 1 - alpha.
struct DominationReport {
    bool precondition_ok = false;  // b >= 1/2
    std::string note;
    double b = 0.0;
    long long runs = 0;
    double epsilon = 0.0;
    double worst_gap = 0.0;  // max over m of F_T(m) - F_W(m) (dominance needs <= epsilon)
    int worst_m = 0;
    bool dominated = false;
    std::vector<double> empirical_cdf;
    std::vector<double> exact_cdf;
};

// Empirical CDF of |W| against the exact CDF of T - |Lambda'| under OffspringLaw(b).
template <class RNG>
DominationReport branching_domination_check(const Graph& g, const Region& Lambda, const std::vector<int>& Lambda_prime,
                                            const PMatrix& pm, long long runs, RNG& rng, double alpha = 0.01)
{
    DominationReport rep;
    rep.b = pm.b;
    if (pm.b < 0.5) {
        rep.note = "C too small: b < 1/2";
        return rep;
    }
    rep.precondition_ok = true;
    const int k = static_cast<int>(Lambda_prime.size());
    const int maxW = Lambda.size() - k;
    std::vector<long long> counts(maxW + 1, 0);
    std::vector<char> scratch;
    for (long long r = 0; r < runs; ++r) {
        auto tr = simulate_exploration(g, Lambda, Lambda_prime, pm, rng, &scratch);
        ++counts[std::min(tr.total, maxW)];
    }
    rep.runs = runs;
    rep.epsilon = dkw_epsilon(runs, alpha);
    if (pm.b >= 1.0) {
        rep.dominated = counts[0] == runs;
        return rep;
    }
    OffspringLaw X(pm.b);
    auto T = progeny_pmf(X, k, maxW + k);
    double fe = 0.0, ft = 0.0;
    rep.worst_gap = -1.0;
    for (int m = 0; m <= maxW; ++m) {
        fe += static_cast<double>(counts[m]) / runs;
        ft += T.pmf[m + k];
        rep.empirical_cdf.push_back(fe);
        rep.exact_cdf.push_back(ft);
        if (ft - fe > rep.worst_gap) {
            rep.worst_gap = ft - fe;
            rep.worst_m = m;
        }
    }
    rep.dominated = rep.worst_gap <= rep.epsilon;
    return rep;
}

struct EdgeRemovalParams {
    double beta, a, n, alpha0, M_f, C;
};

struct FuzzResult {
    long long trials = 0;
    long long first_violations = 0;
    long long second_violations = 0;
};

namespace detail {

inline double log_add(double a, double b)
{
    if (a == -std::numeric_limits<double>::infinity())
        return b;
    if (b == -std::numeric_limits<double>::infinity())
        return a;
    double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace detail

inline double growth_floor(double beta, double a, double n, double alpha0, double M_f)
{
    return alpha0 + std::pow(4.0 * M_f * beta / a, 1.0 / (n - 2.0));
}

// Samples the hypothesis domains of the two edge-removal inequalities and counts violations.
// Magnitudes are log-uniform up to 1e16 and compared in log-domain.
template <class RNG>
FuzzResult edge_removal_fuzz(const EdgeRemovalParams& P, long long trials, RNG& rng)
{
    FuzzResult r;
    r.trials = trials;
    const double ninf = -std::numeric_limits<double>::infinity();
    const double tol = 1e-12;
    const bool first = P.C >= P.alpha0;
    const bool second = P.n > 2.0 && P.C >= growth_floor(P.beta, P.a, P.n, P.alpha0, P.M_f);
    const double logC = std::log(P.C), logTop = std::log(1e16);
    auto lu = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
    for (long long i = 0; i < trials; ++i) {
        // |phi_x| >= C, boundary value pinned on a fraction of the trials
        double lx = (i % 64 == 0) ? logC : lu(logC, std::max(logC, logTop));
        double tx = P.alpha0 * (2.0 * rng.uniform() - 1.0);
        double ty = P.alpha0 * (2.0 * rng.uniform() - 1.0);
        if (i % 97 == 0)
            tx = ty = P.alpha0;
        if (first) {
            double ly = (i % 16 == 0) ? ninf : lu(-logTop, logTop);
            double lhs_in = detail::log_add(lx + ly, (tx == 0.0 || ty == 0.0) ? ninf
                                                                              : std::log(std::fabs(tx)) + std::log(std::fabs(ty)));
            double lhs = P.beta > 0.0 ? std::log(P.beta) + lhs_in : ninf;
            double rhs = P.beta > 0.0 ? std::log(2.0 * P.beta) - (P.n - 2.0) * logC +
                                            detail::log_add(P.n * lx, ly == ninf ? ninf : P.n * ly)
                                      : ninf;
            if (lhs > rhs + tol * std::max(1.0, std::fabs(rhs)))
                ++r.first_violations;
        }
        if (second) {
            double lf = lu(0.0, std::log(1e4));
            if (i % 32 == 0)
                lf = 0.0;
            double lbound = lf - (P.n - 2.0) * logC + (P.n - 1.0) * lx;
            double ly = (i % 8 == 0) ? lbound : lu(lbound - 2.0 * logTop, lbound);
            double t = P.alpha0 * (2.0 * rng.uniform() - 1.0);
            if (i % 97 == 0)
                t = P.alpha0;
            double lhs = P.beta > 0.0
                             ? std::log(P.beta) + ly + detail::log_add(lx, t == 0.0 ? ninf : std::log(std::fabs(t)))
                             : ninf;
            double rhs = std::log(P.a / (2.0 * P.M_f)) + lf + P.n * lx;
            if (lhs > rhs + tol * std::max(1.0, std::fabs(rhs)))
                ++r.second_violations;
        }
    }
    return r;
}

struct RegularityConstants {
    double C = 1.0;
    double C_floor = 1.0;
    double C_tilde = 0.0;
    double alpha1 = 0.0;
    double alpha2 = 1.0;
    double alpha3 = 1.0;
    double K = 0.0;
    double b = 1.0;
    double theta = 0.0;
    double mgf = 1.0;
    double M_f = 0.0;
    double log_Z_half = 0.0;
    int doublings = 0;
    bool alpha2_overridden = false;
    bool moment_condition = false;  // E[exp(theta X)] < exp(theta / 4) at the achieved b
};

struct RegularityInputs {
    double beta = 0.0;
    double a = 0.5;
    double n = 4.0;
    double alpha0 = 1.0;
    double b_target = 0.5;
    double M_f = 0.0;              // 0: certify from the graph
    double alpha2_override = 0.0;  // > 0 replaces the bookkeeping value
};

// C floor plus geometric growth until b >= b_target. The branching moment condition
// E[exp(theta X)] < exp(theta / 4), theta = 2 log(2 alpha_3), is reported, not enforced.
inline RegularityConstants regularity_constants(const Graph& g, const Measure& rho, const RegularityInputs& in)
{
    if (!(in.b_target >= 0.5 && in.b_target < 1.0))
        throw std::invalid_argument("b_target must lie in [1/2, 1)");
    if (in.beta < 0.0)
        throw std::invalid_argument("beta must be >= 0");
    RegularityConstants rc;
    rc.M_f = in.M_f > 0.0 ? in.M_f : validate_interactions(g, in.n).M_f_certified;
    rc.C_floor = (in.n > 2.0 && in.beta > 0.0) ? growth_floor(in.beta, in.a, in.n, in.alpha0, rc.M_f) : in.alpha0;
    Measure ra = rho.tilted(in.a, in.n);
    Density dra(ra);
    double lm = dra.log_mass(-in.alpha0, in.alpha0);
    rc.K = std::max(0.0, in.a * std::pow(in.alpha0, in.n) - lm);
    rc.log_Z_half = Density(rho.tilted(in.a / 2.0, in.n)).log_normalization();

    double C = std::max(1.0, rc.C_floor);
    for (int d = 0; d <= 60; ++d) {
        PMatrix pm = p_matrix(g, rho, in.a, in.n, C);
        rc.b = pm.b;
        if (pm.b >= in.b_target) {
            rc.C = C;
            rc.doublings = d;
            rc.alpha3 = std::exp(rc.K) / pm.b;
            rc.theta = 2.0 * std::log(2.0 * rc.alpha3);
            rc.mgf = pm.b < 1.0 ? OffspringLaw(pm.b).mgf(rc.theta) : 1.0;
            rc.moment_condition = rc.mgf < std::exp(rc.theta / 4.0);
            rc.alpha1 = 2.0 * in.beta * C * C;
            rc.alpha2 = rc.alpha3 + 0.5;
            if (in.alpha2_override > 0.0) {
                rc.alpha2 = in.alpha2_override;
                rc.alpha2_overridden = true;
            }
            rc.C_tilde = std::log(rc.alpha2) + rc.log_Z_half + rc.alpha1 * rc.M_f;
            return rc;
        }
        C *= 2.0;
    }
    throw std::runtime_error("C search did not reach the target within 60 doublings");
}

}  // namespace gibbs
