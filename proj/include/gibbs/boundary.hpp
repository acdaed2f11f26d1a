#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "graph.hpp"

namespace gibbs {

// A boundary field xi: V -> R, kept as (sign, log|xi|) so that double-exponential
// families stay representable far beyond the range of a double.
struct BoundaryField {
    enum class Family { constant, double_exponential, exponential, kernel_growth, xi_plus, xi_minus, table };

    Family family = Family::constant;
    double K = 0.0;       // constant value, or base of the double-exponential family
    double n = 3.0;       // double-exponential: xi = K^((n-1)^(rate * d))
    double rate = 1.0;
    double C_xi = 1.0;    // exponential: xi = C_xi * lambda^d
    double lambda = 1.0;
    double M_xi = 1.0;    // kernel growth: xi = M_xi f(d^-r)
    double r = 1.0;
    std::vector<double> values;  // table
    std::vector<int> signs;      // optional per-vertex signs (+1/-1)

    static BoundaryField constant(double k)
    {
        BoundaryField b;
        b.K = k;
        return b;
    }
    static BoundaryField double_exponential(double k, double n, double rate = 1.0)
    {
        if (!(k > 0.0))
            throw std::invalid_argument("double-exponential field needs K > 0");
        BoundaryField b;
        b.family = Family::double_exponential;
        b.K = k;
        b.n = n;
        b.rate = rate;
        return b;
    }
    static BoundaryField exponential(double c, double lam)
    {
        BoundaryField b;
        b.family = Family::exponential;
        b.C_xi = c;
        b.lambda = lam;
        return b;
    }
    static BoundaryField kernel_growth(double m, double rr)
    {
        BoundaryField b;
        b.family = Family::kernel_growth;
        b.M_xi = m;
        b.r = rr;
        return b;
    }
    static BoundaryField xi_plus()
    {
        BoundaryField b;
        b.family = Family::xi_plus;
        return b;
    }
    static BoundaryField xi_minus()
    {
        BoundaryField b;
        b.family = Family::xi_minus;
        return b;
    }
    static BoundaryField table(std::vector<double> v)
    {
        BoundaryField b;
        b.family = Family::table;
        b.values = std::move(v);
        return b;
    }

    // Per-vertex log|xi| (-inf where xi = 0).
    std::vector<double> log_abs(const Graph& g) const
    {
        const int N = g.size();
        std::vector<double> out(N, kNegInfD());
        auto d = bfs_distances(g, g.origin);
        // |B_k(o)| for every k, from the distance histogram
        std::vector<long long> balls;
        if (family == Family::xi_plus || family == Family::xi_minus) {
            int maxd = 0;
            for (int v : d)
                maxd = std::max(maxd, v);
            balls.assign(maxd + 1, 0);
            for (int v : d)
                if (v >= 0)
                    ++balls[v];
            for (int k = 1; k <= maxd; ++k)
                balls[k] += balls[k - 1];
        }
        for (int x = 0; x < N; ++x) {
            double dist = d[x] < 0 ? std::numeric_limits<double>::infinity() : d[x];
            switch (family) {
            case Family::constant:
                out[x] = K == 0.0 ? kNegInfD() : std::log(std::fabs(K));
                break;
            case Family::double_exponential:
                out[x] = std::pow(n - 1.0, rate * dist) * std::log(K);
                break;
            case Family::exponential:
                out[x] = std::log(std::fabs(C_xi)) + dist * std::log(lambda);
                break;
            case Family::kernel_growth:
                out[x] = std::log(std::fabs(M_xi)) + g.kernel.log_f(dist == 0.0 ? std::numeric_limits<double>::infinity()
                                                                                 : std::pow(dist, -r));
                break;
            case Family::xi_plus:
            case Family::xi_minus: {
                double ball = static_cast<double>(balls[d[x] < 0 ? 0 : d[x]]);
                double v = std::log(ball);
                out[x] = v > 0.0 ? 0.5 * std::log(v) : kNegInfD();
                break;
            }
            case Family::table:
                if (values.size() != static_cast<std::size_t>(N))
                    throw std::invalid_argument("table field size does not match the graph");
                out[x] = values[x] == 0.0 ? kNegInfD() : std::log(std::fabs(values[x]));
                break;
            }
        }
        return out;
    }

    std::vector<int> sign(const Graph& g) const
    {
        std::vector<int> s(g.size(), 1);
        if (family == Family::xi_minus)
            std::fill(s.begin(), s.end(), -1);
        if (family == Family::constant && K < 0.0)
            std::fill(s.begin(), s.end(), -1);
        if (family == Family::exponential && C_xi < 0.0)
            std::fill(s.begin(), s.end(), -1);
        if (family == Family::kernel_growth && M_xi < 0.0)
            std::fill(s.begin(), s.end(), -1);
        if (family == Family::table)
            for (int x = 0; x < g.size(); ++x)
                s[x] = values[x] < 0.0 ? -1 : 1;
        if (!signs.empty()) {
            if (signs.size() != static_cast<std::size_t>(g.size()))
                throw std::invalid_argument("sign pattern size does not match the graph");
            for (int x = 0; x < g.size(); ++x)
                s[x] *= signs[x] < 0 ? -1 : 1;
        }
        return s;
    }

    // Plain values; entries beyond the double range become +-inf.
    std::vector<double> values_on(const Graph& g) const
    {
        auto la = log_abs(g);
        auto sg = sign(g);
        std::vector<double> v(g.size());
        for (int x = 0; x < g.size(); ++x)
            v[x] = sg[x] * std::exp(la[x]);
        return v;
    }

    static double kNegInfD() { return -std::numeric_limits<double>::infinity(); }
};

// Signed sum in log-domain: returns (sign, log|sum|).
struct SignedLog {
    int sign = 0;
    double log_abs = -std::numeric_limits<double>::infinity();
};

inline SignedLog signed_log_sum(const std::vector<std::pair<int, double>>& terms)
{
    double mp = -std::numeric_limits<double>::infinity(), mn = mp;
    for (auto& [s, l] : terms)
        (s > 0 ? mp : mn) = std::max(s > 0 ? mp : mn, l);
    double sp = 0.0, sn = 0.0;
    for (auto& [s, l] : terms) {
        if (s > 0 && std::isfinite(mp))
            sp += std::exp(l - mp);
        else if (s < 0 && std::isfinite(mn))
            sn += std::exp(l - mn);
    }
    double lp = sp > 0.0 ? mp + std::log(sp) : -std::numeric_limits<double>::infinity();
    double ln = sn > 0.0 ? mn + std::log(sn) : -std::numeric_limits<double>::infinity();
    SignedLog r;
    if (lp == ln)
        return r;
    if (lp > ln) {
        r.sign = 1;
        r.log_abs = lp + std::log1p(-std::exp(ln - lp));
    }
    else {
        r.sign = -1;
        r.log_abs = ln + std::log1p(-std::exp(lp - ln));
    }
    return r;
}

// log|h_{y,R}| for every y in R.
inline std::vector<double> log_abs_h(const Graph& g, const Region& R, const std::vector<double>& log_xi,
                                     const std::vector<int>& sign)
{
    std::vector<double> out(g.size(), -std::numeric_limits<double>::infinity());
    std::vector<std::pair<int, double>> terms;
    for (int y = 0; y < g.size(); ++y) {
        if (!R.in[y])
            continue;
        terms.clear();
        for (auto& e : g.coupling[y]) {
            if (R.in[e.to] || log_xi[e.to] == -std::numeric_limits<double>::infinity())
                continue;
            int s = (e.J < 0.0 ? -1 : 1) * sign[e.to];
            terms.emplace_back(s, std::log(std::fabs(e.J)) + log_xi[e.to]);
        }
        out[y] = signed_log_sum(terms).log_abs;
    }
    return out;
}

struct GrowthProfile {
    enum class Variant { A, A_tilde };

    std::vector<double> logA;  // log A_x on R, 0 elsewhere
    Region R;
    double C = 1.0, n = 3.0, lambda = 1.0;
    Variant variant = Variant::A_tilde;
    double residual = 0.0;
    int iterations = 0;
    bool divergence_flag = false;  // terminal values on the truncation shell changed the answer

    double A(int x) const { return std::exp(logA[x]); }
};

struct SolverOptions {
    double tolerance = 1e-12;
    int max_iterations = 1'000'000;
    bool check_truncation = true;
};

namespace detail {

inline void check_params(double C, double n, double lambda)
{
    if (!(C >= 1.0))
        throw std::invalid_argument("growth functionals need C >= 1");
    if (n < 2.0)
        throw std::invalid_argument("growth functionals need n >= 2");
    if (n == 2.0 && !(lambda >= 1.0))
        throw std::invalid_argument("n = 2 needs lambda >= 1");
}

// Fixed point of V(y) = max(T_y, max_u step(V*(u), J_yu)), V* = V on R and `outside` off R.
// For n > 2: step = (v - log f)/(n-1); for n = 2: step = v - log lambda - log f.
inline void solve_walk_values(const Graph& g, const Region& R, const std::vector<double>& terminal,
                              const std::vector<double>* outside, double n, double lambda, const SolverOptions& opt,
                              std::vector<double>& V, double& residual, int& iterations)
{
    const int N = g.size();
    const bool two = (n == 2.0);
    const double inv = two ? 1.0 : 1.0 / (n - 1.0);
    const double loglam = two ? std::log(lambda) : 0.0;
    // cache log f per coupling
    std::vector<std::vector<double>> logf(N);
    for (int y = 0; y < N; ++y) {
        if (!R.in[y])
            continue;
        for (auto& e : g.coupling[y])
            logf[y].push_back(g.kernel.log_f(e.J));
    }
    V = terminal;
    std::vector<double> next(N);
    const int rounds = two ? R.size() + 1 : opt.max_iterations;
    residual = std::numeric_limits<double>::infinity();
    iterations = 0;
    for (int it = 0; it < rounds; ++it) {
        double change = 0.0;
        for (int y = 0; y < N; ++y) {
            if (!R.in[y]) {
                next[y] = V[y];
                continue;
            }
            double best = terminal[y];
            const auto& adj = g.coupling[y];
            for (std::size_t k = 0; k < adj.size(); ++k) {
                int u = adj[k].to;
                double vu;
                if (R.in[u])
                    vu = V[u];
                else if (outside)
                    vu = (*outside)[u];
                else
                    continue;
                if (vu == -std::numeric_limits<double>::infinity())
                    continue;
                double cand = two ? vu - loglam - logf[y][k] : (vu - logf[y][k]) * inv;
                if (cand > best)
                    best = cand;
            }
            next[y] = best;
            double scale = std::max(1.0, std::fabs(best));
            if (std::isfinite(best) && std::isfinite(V[y]))
                change = std::max(change, std::fabs(best - V[y]) / scale);
            else if (best != V[y])
                change = std::numeric_limits<double>::infinity();
        }
        V.swap(next);
        ++iterations;
        residual = change;
        if (change <= opt.tolerance && (!two || change == 0.0))
            break;
    }
    if (!two && residual > opt.tolerance)
        throw std::runtime_error("value iteration did not converge");
}

}  // namespace detail

// Terminal log-values for the walk functional over the neighbourhood of R.
inline GrowthProfile compute_A_tilde(const Graph& g, const Region& R, const std::vector<double>& log_xi, double C,
                                     double n, double lambda = 1.0, const SolverOptions& opt = {})
{
    detail::check_params(C, n, lambda);
    const int N = g.size();
    const double logC = std::log(C);
    std::vector<double> L(N, 0.0);
    for (int y = 0; y < N; ++y)
        L[y] = std::max(0.0, log_xi[y] - logC);
    std::vector<double> terminal(N, 0.0);
    for (int y = 0; y < N; ++y)
        terminal[y] = R.in[y] ? L[y] : 0.0;

    GrowthProfile p;
    p.R = R;
    p.C = C;
    p.n = n;
    p.lambda = lambda;
    p.variant = GrowthProfile::Variant::A_tilde;
    std::vector<double> V;
    detail::solve_walk_values(g, R, terminal, &L, n, lambda, opt, V, p.residual, p.iterations);
    p.logA.assign(N, 0.0);
    for (int y = 0; y < N; ++y)
        p.logA[y] = R.in[y] ? std::max(0.0, V[y]) : 0.0;

    if (opt.check_truncation) {
        bool any = false;
        std::vector<double> L2 = L, t2 = terminal;
        for (int y = 0; y < N; ++y)
            if (g.truncation[y]) {
                any = any || L[y] > 0.0;
                L2[y] = 0.0;
                t2[y] = 0.0;
            }
        if (any) {
            std::vector<double> V2;
            double res;
            int its;
            detail::solve_walk_values(g, R, t2, &L2, n, lambda, opt, V2, res, its);
            for (int y = 0; y < N; ++y)
                if (R.in[y] && std::fabs(std::max(0.0, V2[y]) - p.logA[y]) > opt.tolerance * std::max(1.0, p.logA[y]))
                    p.divergence_flag = true;
        }
    }
    return p;
}

inline GrowthProfile compute_A(const Graph& g, const Region& R, const std::vector<double>& log_xi,
                               const std::vector<int>& sign, double C, double n, double lambda = 1.0,
                               const SolverOptions& opt = {})
{
    detail::check_params(C, n, lambda);
    const int N = g.size();
    const bool two = (n == 2.0);
    const double logC = std::log(C);
    auto lh = log_abs_h(g, R, log_xi, sign);
    std::vector<double> terminal(N, 0.0);
    for (int y = 0; y < N; ++y) {
        if (!R.in[y])
            continue;
        double S = 0.0;
        for (auto& e : g.coupling[y])
            if (!R.in[e.to])
                S += std::fabs(e.J) * g.kernel(e.J);
        if (S <= 0.0)
            continue;
        double lp = std::max(0.0, lh[y] - logC - std::log(S));
        terminal[y] = two ? lp - std::log(lambda) : lp / (n - 1.0);
    }
    GrowthProfile p;
    p.R = R;
    p.C = C;
    p.n = n;
    p.lambda = lambda;
    p.variant = GrowthProfile::Variant::A;
    std::vector<double> V;
    detail::solve_walk_values(g, R, terminal, nullptr, n, lambda, opt, V, p.residual, p.iterations);
    p.logA.assign(N, 0.0);
    for (int y = 0; y < N; ++y)
        p.logA[y] = R.in[y] ? std::max(0.0, V[y]) : 0.0;
    return p;
}

inline GrowthProfile compute_A(const Graph& g, const Region& R, const BoundaryField& xi, double C, double n,
                               double lambda = 1.0, const SolverOptions& opt = {})
{
    return compute_A(g, R, xi.log_abs(g), xi.sign(g), C, n, lambda, opt);
}

inline GrowthProfile compute_A_tilde(const Graph& g, const Region& R, const BoundaryField& xi, double C, double n,
                                     double lambda = 1.0, const SolverOptions& opt = {})
{
    return compute_A_tilde(g, R, xi.log_abs(g), C, n, lambda, opt);
}

struct ProfilePair {
    GrowthProfile A;
    GrowthProfile A_tilde;
};

// Closed forms for nearest-neighbour interactions with f(1) = 1, from BFS distances in R.
inline ProfilePair closed_form_nn(const Graph& g, const Region& R, const std::vector<double>& log_xi,
                                  const std::vector<int>& sign, double C, double n, double lambda = 1.0)
{
    if (!g.nearest_neighbour)
        throw std::logic_error("closed forms need nearest-neighbour interactions");
    if (g.kernel(1.0) != 1.0)
        throw std::logic_error("closed forms need f(1) = 1");
    detail::check_params(C, n, lambda);
    const int N = g.size();
    const bool two = (n == 2.0);
    const double logC = std::log(C);
    auto lh = log_abs_h(g, R, log_xi, sign);

    // per boundary vertex: log(|h_y| / (C |N_y|)) ; per vertex: log(|xi_z| / C)
    std::vector<double> hb(N, -std::numeric_limits<double>::infinity());
    for (int y = 0; y < N; ++y) {
        if (!R.in[y])
            continue;
        int ext = 0;
        for (int z : g.skeleton[y])
            if (!R.in[z])
                ++ext;
        if (ext > 0)
            hb[y] = lh[y] - logC - std::log(static_cast<double>(ext));
    }

    ProfilePair out;
    for (auto* p : {&out.A, &out.A_tilde}) {
        p->R = R;
        p->C = C;
        p->n = n;
        p->lambda = lambda;
        p->logA.assign(N, 0.0);
    }
    out.A.variant = GrowthProfile::Variant::A;
    out.A_tilde.variant = GrowthProfile::Variant::A_tilde;
    const double logn1 = two ? 0.0 : std::log(n - 1.0);
    const double loglam = std::log(lambda);

    // value of base b (log) at distance d
    auto decay = [&](double lb, int d) { return two ? lb - d * loglam : lb * std::exp(-d * logn1); };

    for (int x = 0; x < N; ++x) {
        if (!R.in[x])
            continue;
        auto dR = bfs_distances(g, x, &R.in);
        double a = 0.0, at = 0.0;
        for (int y = 0; y < N; ++y) {
            if (R.in[y]) {
                if (dR[y] < 0)
                    continue;
                if (std::isfinite(hb[y]) && hb[y] > 0.0)
                    a = std::max(a, decay(hb[y], dR[y] + 1));
                double lz = log_xi[y] - logC;
                if (std::isfinite(lz) && lz > 0.0)
                    at = std::max(at, decay(lz, dR[y]));
            }
            else {
                int best = -1;
                for (int u : g.skeleton[y])
                    if (R.in[u] && dR[u] >= 0 && (best < 0 || dR[u] + 1 < best))
                        best = dR[u] + 1;
                double lz = log_xi[y] - logC;
                if (best >= 0 && std::isfinite(lz) && lz > 0.0)
                    at = std::max(at, decay(lz, best));
            }
        }
        out.A.logA[x] = a;
        out.A_tilde.logA[x] = at;
    }
    return out;
}

inline ProfilePair closed_form_nn(const Graph& g, const Region& R, const BoundaryField& xi, double C, double n,
                                  double lambda = 1.0)
{
    return closed_form_nn(g, R, xi.log_abs(g), xi.sign(g), C, n, lambda);
}

struct XiMembership {
    bool in_Xi = false;  // heuristic: the running supremum stopped growing over the last half of the shells
    std::vector<double> shell_certificate;  // per shell: max log of |xi_z|^((n-1)^-d), or log(|xi_z| / lambda^d)
    std::vector<double> running_sup;
    double certificate = 0.0;  // exp of the final running supremum
};

inline XiMembership xi_membership(const Graph& g, const std::vector<double>& log_xi, double n, double lambda = 1.0)
{
    auto d = bfs_distances(g, g.origin);
    int maxd = 0;
    for (int v : d)
        maxd = std::max(maxd, v);
    if (maxd < 3)
        throw std::invalid_argument("membership estimate needs at least 3 shells");
    XiMembership m;
    m.shell_certificate.assign(maxd + 1, -std::numeric_limits<double>::infinity());
    for (int z = 0; z < g.size(); ++z) {
        if (d[z] < 0)
            continue;
        double v = (n == 2.0) ? log_xi[z] - d[z] * std::log(lambda) : log_xi[z] * std::pow(n - 1.0, -d[z]);
        m.shell_certificate[d[z]] = std::max(m.shell_certificate[d[z]], v);
    }
    double sup = -std::numeric_limits<double>::infinity();
    for (double v : m.shell_certificate) {
        sup = std::max(sup, v);
        m.running_sup.push_back(sup);
    }
    const int half = static_cast<int>(m.running_sup.size()) / 2;
    const double ref = m.running_sup[half];
    m.in_Xi = std::fabs(m.running_sup.back() - ref) <= 1e-12 * std::max(1.0, std::fabs(ref));
    m.certificate = std::exp(sup);
    return m;
}

inline XiMembership xi_membership(const Graph& g, const BoundaryField& xi, double n, double lambda = 1.0)
{
    return xi_membership(g, xi.log_abs(g), n, lambda);
}

}  // namespace gibbs
