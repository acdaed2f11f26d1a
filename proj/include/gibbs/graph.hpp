#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "rng.hpp"

namespace gibbs {

// The kernel f entering the weighted-walk functionals and condition (C2).
struct Kernel {
    enum class Family { unit, log_sqrt, power, table };

    Family family = Family::unit;
    double alpha = 0.0;                             // power family exponent
    std::vector<std::pair<double, double>> points;  // table family: (|t|, f), ascending |t|
    double delta_f = std::exp(-1.0);
    double M_f = 0.0;  // declared bound, 0 means "certify from the graph"

    static Kernel unit() { return Kernel{}; }
    static Kernel log_sqrt()
    {
        Kernel k;
        k.family = Family::log_sqrt;
        return k;
    }
    static Kernel power(double a)
    {
        if (!(a > 0.0))
            throw std::invalid_argument("power kernel needs alpha > 0");
        Kernel k;
        k.family = Family::power;
        k.alpha = a;
        k.delta_f = 1.0;
        return k;
    }
    static Kernel table(std::vector<std::pair<double, double>> pts)
    {
        if (pts.empty())
            throw std::invalid_argument("table kernel needs at least one point");
        std::sort(pts.begin(), pts.end());
        for (auto& p : pts)
            if (p.first < 0.0 || p.second < 1.0)
                throw std::invalid_argument("table kernel needs |t| >= 0 and f >= 1");
        Kernel k;
        k.family = Family::table;
        k.points = std::move(pts);
        return k;
    }

    double operator()(double t) const
    {
        const double a = std::fabs(t);
        switch (family) {
        case Family::unit:
            return 1.0;
        case Family::log_sqrt:
            return a < std::exp(-1.0) ? std::sqrt(std::log(1.0 / a)) : 1.0;
        case Family::power:
            return a < 1.0 ? std::pow(a, -alpha) : 1.0;
        case Family::table: {
            if (a <= points.front().first)
                return points.front().second;
            if (a >= points.back().first)
                return points.back().second;
            auto it = std::lower_bound(points.begin(), points.end(), std::make_pair(a, -1.0));
            auto lo = *(it - 1), hi = *it;
            double w = (a - lo.first) / (hi.first - lo.first);
            return lo.second + w * (hi.second - lo.second);
        }
        }
        return 1.0;
    }

    double log_f(double t) const { return std::log((*this)(t)); }

    std::string name() const
    {
        switch (family) {
        case Family::unit:
            return "unit";
        case Family::log_sqrt:
            return "log_sqrt";
        case Family::power:
            return "power";
        case Family::table:
            return "table";
        }
        return "?";
    }
};

struct Edge {
    int to;
    double J;
};

struct Reasonable {
    double r = 1.0;
    double c = 0.5;
};

struct Graph {
    std::vector<std::vector<int>> skeleton;    // geometry used for d_G
    std::vector<std::vector<Edge>> coupling;   // nonzero J only, symmetric
    std::vector<char> truncation;              // vertices whose neighbourhood is cut by the truncation
    Kernel kernel;
    int origin = 0;
    bool nearest_neighbour = false;
    std::optional<Reasonable> reasonable;
    std::string name;

    int size() const { return static_cast<int>(skeleton.size()); }

    std::size_t edge_count() const
    {
        std::size_t e = 0;
        for (auto& a : skeleton)
            e += a.size();
        return e / 2;
    }

    std::size_t coupling_count() const
    {
        std::size_t e = 0;
        for (auto& a : coupling)
            e += a.size();
        return e / 2;
    }

    double J(int x, int y) const
    {
        for (auto& e : coupling[x])
            if (e.to == y)
                return e.J;
        return 0.0;
    }

    int max_degree() const
    {
        std::size_t d = 0;
        for (auto& a : coupling)
            d = std::max(d, a.size());
        return static_cast<int>(d);
    }

    bool ferromagnetic() const
    {
        for (auto& a : coupling)
            for (auto& e : a)
                if (e.J < 0.0)
                    return false;
        return true;
    }
};

namespace detail {

inline void add_skeleton_edge(Graph& g, int x, int y)
{
    g.skeleton[x].push_back(y);
    g.skeleton[y].push_back(x);
}

inline Graph empty_graph(int n)
{
    Graph g;
    g.skeleton.assign(n, {});
    g.coupling.assign(n, {});
    g.truncation.assign(n, 0);
    return g;
}

}  // namespace detail

// Breadth-first distances over the skeleton. With a mask, only masked vertices are traversed.
inline std::vector<int> bfs_distances(const Graph& g, int src, const std::vector<char>* mask = nullptr,
                                      int max_depth = std::numeric_limits<int>::max())
{
    std::vector<int> dist(g.size(), -1);
    if (mask && !(*mask)[src])
        return dist;
    std::queue<int> q;
    dist[src] = 0;
    q.push(src);
    while (!q.empty()) {
        int x = q.front();
        q.pop();
        if (dist[x] >= max_depth)
            continue;
        for (int y : g.skeleton[x]) {
            if (dist[y] >= 0 || (mask && !(*mask)[y]))
                continue;
            dist[y] = dist[x] + 1;
            q.push(y);
        }
    }
    return dist;
}

inline bool connected(const Graph& g)
{
    if (g.size() == 0)
        return true;
    auto d = bfs_distances(g, 0);
    return std::all_of(d.begin(), d.end(), [](int v) { return v >= 0; });
}

// Path on L vertices, viewed as a truncation of Z around its centre.
inline Graph make_path(int L, bool truncated = true)
{
    if (L < 1)
        throw std::invalid_argument("path needs L >= 1");
    Graph g = detail::empty_graph(L);
    for (int i = 0; i + 1 < L; ++i)
        detail::add_skeleton_edge(g, i, i + 1);
    if (truncated) {
        g.truncation[0] = 1;
        g.truncation[L - 1] = 1;
    }
    g.origin = L / 2;
    g.name = "path(" + std::to_string(L) + ")";
    return g;
}

// d-dimensional box of side L, viewed as a truncation of Z^d.
inline Graph make_box(int d, int L, bool truncated = true)
{
    if (d < 1 || L < 1)
        throw std::invalid_argument("box needs d >= 1 and L >= 1");
    long long n = 1;
    for (int i = 0; i < d; ++i) {
        n *= L;
        if (n > 50'000'000)
            throw std::invalid_argument("box too large");
    }
    Graph g = detail::empty_graph(static_cast<int>(n));
    std::vector<int> c(d);
    for (int v = 0; v < n; ++v) {
        int r = v;
        for (int i = 0; i < d; ++i) {
            c[i] = r % L;
            r /= L;
        }
        int stride = 1;
        for (int i = 0; i < d; ++i) {
            if (c[i] + 1 < L)
                detail::add_skeleton_edge(g, v, v + stride);
            if (truncated && (c[i] == 0 || c[i] == L - 1))
                g.truncation[v] = 1;
            stride *= L;
        }
    }
    int centre = 0, stride = 1;
    for (int i = 0; i < d; ++i) {
        centre += (L / 2) * stride;
        stride *= L;
    }
    g.origin = centre;
    g.name = "box(" + std::to_string(d) + "," + std::to_string(L) + ")";
    return g;
}

// Regular tree: every vertex has `degree` neighbours except the leaves at depth `depth`.
inline Graph make_regular_tree(int degree, int depth, bool truncated = true)
{
    if (degree < 2 || depth < 0)
        throw std::invalid_argument("regular tree needs degree >= 2 and depth >= 0");
    std::vector<std::pair<int, int>> edges;
    std::vector<int> level{0};
    int next = 1;
    std::vector<int> leaves;
    for (int dep = 0; dep < depth; ++dep) {
        std::vector<int> nl;
        for (int v : level) {
            int kids = (dep == 0) ? degree : degree - 1;
            for (int k = 0; k < kids; ++k) {
                edges.emplace_back(v, next);
                nl.push_back(next++);
                if (next > 50'000'000)
                    throw std::invalid_argument("tree too large");
            }
        }
        level = std::move(nl);
    }
    Graph g = detail::empty_graph(next);
    for (auto [a, b] : edges)
        detail::add_skeleton_edge(g, a, b);
    if (truncated && depth > 0)
        for (int v : level)
            g.truncation[v] = 1;
    g.origin = 0;
    g.name = "tree(" + std::to_string(degree) + "," + std::to_string(depth) + ")";
    return g;
}

// Random spanning tree plus `extra` random chords; origin 0, no truncation.
inline Graph make_random_connected(int n, int extra, std::uint64_t seed)
{
    if (n < 1 || extra < 0)
        throw std::invalid_argument("random graph needs n >= 1 and extra >= 0");
    Rng rng(seed, 0x6772);
    Graph g = detail::empty_graph(n);
    auto has = [&](int a, int b) {
        for (int v : g.skeleton[a])
            if (v == b)
                return true;
        return false;
    };
    for (int v = 1; v < n; ++v) {
        int u = static_cast<int>(rng.uniform() * v);
        detail::add_skeleton_edge(g, u, v);
    }
    for (int k = 0, tries = 0; k < extra && tries < 100 * (extra + 1); ++tries) {
        int a = static_cast<int>(rng.uniform() * n), b = static_cast<int>(rng.uniform() * n);
        if (a == b || has(a, b))
            continue;
        detail::add_skeleton_edge(g, a, b);
        ++k;
    }
    g.name = "random(" + std::to_string(n) + ")";
    return g;
}

// Edge list: one coupling per line `x y J`, '#' starts a comment. An optional
// `vertices N` line declares the vertex count; otherwise it is max id + 1.
inline Graph parse_edge_list(std::istream& in, bool require_connected = true)
{
    std::vector<std::tuple<int, int, double>> rows;
    std::map<std::pair<int, int>, int> seen;
    int declared = -1, max_id = -1;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first))
            continue;
        if (first == "vertices") {
            if (!(ls >> declared) || declared < 0)
                throw std::invalid_argument("edge list line " + std::to_string(lineno) + ": bad vertex count");
            continue;
        }
        long long x, y;
        double J;
        std::istringstream fs(first);
        if (!(fs >> x) || !(ls >> y >> J))
            throw std::invalid_argument("edge list line " + std::to_string(lineno) + ": expected `id id J`");
        std::string extra;
        if (ls >> extra)
            throw std::invalid_argument("edge list line " + std::to_string(lineno) + ": trailing tokens");
        if (x < 0 || y < 0 || x > 50'000'000 || y > 50'000'000)
            throw std::invalid_argument("edge list line " + std::to_string(lineno) + ": vertex id out of range");
        if (x == y)
            throw std::invalid_argument("edge list line " + std::to_string(lineno) + ": self coupling");
        if (!std::isfinite(J))
            throw std::invalid_argument("edge list line " + std::to_string(lineno) + ": non-finite coupling");
        std::pair<int, int> key{static_cast<int>(std::min(x, y)), static_cast<int>(std::max(x, y))};
        if (seen.count(key))
            throw std::invalid_argument("duplicate coupling " + std::to_string(key.first) + " " +
                                        std::to_string(key.second) + " at line " + std::to_string(lineno));
        seen[key] = lineno;
        rows.emplace_back(static_cast<int>(x), static_cast<int>(y), J);
        max_id = std::max<int>(max_id, static_cast<int>(std::max(x, y)));
    }
    int n = declared >= 0 ? declared : max_id + 1;
    if (max_id >= n)
        throw std::invalid_argument("edge list references undeclared vertex " + std::to_string(max_id));
    Graph g = detail::empty_graph(n);
    bool nn = true;
    for (auto [x, y, J] : rows) {
        detail::add_skeleton_edge(g, x, y);
        if (J != 0.0) {
            g.coupling[x].push_back({y, J});
            g.coupling[y].push_back({x, J});
        }
        if (J != 1.0)
            nn = false;
    }
    g.nearest_neighbour = nn;
    if (require_connected && !connected(g))
        throw std::invalid_argument("disconnected graph");
    g.origin = 0;
    g.name = "edge_list";
    return g;
}

inline Graph load_edge_list(const std::string& path, bool require_connected = true)
{
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("cannot open edge list " + path);
    return parse_edge_list(f, require_connected);
}

// J_xy = 1 on skeleton edges.
inline Graph with_nearest_neighbour(Graph g)
{
    for (auto& a : g.coupling)
        a.clear();
    for (int x = 0; x < g.size(); ++x)
        for (int y : g.skeleton[x])
            g.coupling[x].push_back({y, 1.0});
    g.nearest_neighbour = true;
    g.reasonable.reset();
    return g;
}

// J_xy = d_G(x,y)^(-r) for 1 <= d_G(x,y) <= cutoff.
inline Graph with_long_range(Graph g, double r, int cutoff)
{
    if (!(r > 0.0))
        throw std::invalid_argument("long-range interactions need r > 0");
    if (cutoff < 1)
        throw std::invalid_argument("long-range interactions need cutoff >= 1");
    for (auto& a : g.coupling)
        a.clear();
    for (int x = 0; x < g.size(); ++x) {
        auto d = bfs_distances(g, x, nullptr, cutoff);
        for (int y = 0; y < g.size(); ++y)
            if (y != x && d[y] >= 1)
                g.coupling[x].push_back({y, std::pow(static_cast<double>(d[y]), -r)});
    }
    g.nearest_neighbour = false;
    g.reasonable = Reasonable{r, 0.5};
    return g;
}

// Lambda as a vertex mask.
struct Region {
    std::vector<char> in;

    static Region of(int n, const std::vector<int>& verts)
    {
        Region R;
        R.in.assign(n, 0);
        for (int v : verts) {
            if (v < 0 || v >= n)
                throw std::invalid_argument("region vertex out of range");
            R.in[v] = 1;
        }
        return R;
    }
    static Region all(int n)
    {
        Region R;
        R.in.assign(n, 1);
        return R;
    }
    bool contains(int v) const { return in[v] != 0; }
    int size() const { return static_cast<int>(std::count(in.begin(), in.end(), 1)); }
    std::vector<int> vertices() const
    {
        std::vector<int> v;
        for (int i = 0; i < static_cast<int>(in.size()); ++i)
            if (in[i])
                v.push_back(i);
        return v;
    }
    bool subset_of(const Region& o) const
    {
        for (std::size_t i = 0; i < in.size(); ++i)
            if (in[i] && !o.in[i])
                return false;
        return true;
    }
};

inline Region ball_region(const Graph& g, int o, int k)
{
    auto d = bfs_distances(g, o, nullptr, k);
    Region R;
    R.in.assign(g.size(), 0);
    for (int v = 0; v < g.size(); ++v)
        R.in[v] = d[v] >= 0 && d[v] <= k;
    return R;
}

// Vertices of Lambda coupled to the complement.
inline Region boundary_of(const Graph& g, const Region& L)
{
    Region B;
    B.in.assign(g.size(), 0);
    for (int x = 0; x < g.size(); ++x) {
        if (!L.in[x])
            continue;
        for (auto& e : g.coupling[x])
            if (!L.in[e.to]) {
                B.in[x] = 1;
                break;
            }
    }
    return B;
}

inline Region interior_of(const Graph& g, const Region& L)
{
    Region B = boundary_of(g, L);
    Region I;
    I.in.assign(g.size(), 0);
    for (int x = 0; x < g.size(); ++x)
        I.in[x] = L.in[x] && !B.in[x];
    return I;
}

struct BallSize {
    long long size = 0;
    bool saturated = false;  // the ball reached the truncation, so `size` may undercount
};

inline BallSize ball_size(const Graph& g, int o, int k)
{
    if (k < 0)
        throw std::invalid_argument("ball radius must be >= 0");
    auto d = bfs_distances(g, o, nullptr, k);
    BallSize b;
    for (int v = 0; v < g.size(); ++v) {
        if (d[v] < 0)
            continue;
        ++b.size;
        if (g.truncation[v] && d[v] < k)
            b.saturated = true;
    }
    return b;
}

struct HField {
    double value = 0.0;
    bool truncation_flag = false;  // truncation-shell terms exceed 1e-10 of the total
};

// h_{x,Lambda} = sum over y outside Lambda of J_xy xi_y.
inline HField h_field(const Graph& g, const Region& L, const std::vector<double>& xi, int x)
{
    HField h;
    double total_abs = 0.0, shell_abs = 0.0;
    for (auto& e : g.coupling[x]) {
        if (L.in[e.to])
            continue;
        double term = e.J * xi[e.to];
        h.value += term;
        total_abs += std::fabs(term);
        if (g.truncation[e.to])
            shell_abs += std::fabs(term);
    }
    h.truncation_flag = total_abs > 0.0 && shell_abs > 1e-10 * total_abs;
    return h;
}

inline std::vector<double> h_field_all(const Graph& g, const Region& L, const std::vector<double>& xi)
{
    std::vector<double> h(g.size(), 0.0);
    for (int x = 0; x < g.size(); ++x)
        if (L.in[x])
            h[x] = h_field(g, L, xi, x).value;
    return h;
}

struct ValidationReport {
    bool c1_ok = true;
    bool c2_ok = true;
    double M_f_certified = 0.0;
    bool kernel_tail_ok = true;
    bool reasonable_ok = true;
    double c_certified = 0.0;
    std::vector<std::string> notes;
};

// Grid checks use 1000 log-spaced points; they can falsify a condition, not prove it.
inline ValidationReport validate_interactions(const Graph& g, double n)
{
    ValidationReport rep;
    for (int x = 0; x < g.size(); ++x) {
        double row = 0.0;
        for (auto& e : g.coupling[x]) {
            if (e.to == x) {
                rep.c1_ok = false;
                rep.notes.push_back("self coupling at " + std::to_string(x));
            }
            if (g.J(e.to, x) != e.J) {
                rep.c1_ok = false;
                rep.notes.push_back("asymmetric coupling " + std::to_string(x) + "," + std::to_string(e.to));
            }
            row += std::fabs(e.J) * g.kernel(e.J);
        }
        rep.M_f_certified = std::max(rep.M_f_certified, row);
    }
    if (g.kernel.M_f > 0.0 && rep.M_f_certified > g.kernel.M_f * (1.0 + 1e-12)) {
        rep.c2_ok = false;
        rep.notes.push_back("row sum exceeds declared M_f");
    }

    const int grid = 1000;
    const double df = g.kernel.delta_f;
    for (int i = 1; i <= grid; ++i) {
        // t ranges over (delta_f * 1e-280, delta_f) on a log scale
        double t = df * std::pow(10.0, -280.0 * i / grid);
        double lhs = g.kernel(t);
        double rhs = std::pow(std::log(1.0 / t), 1.0 / n);
        if (lhs < rhs * (1.0 - 1e-12)) {
            rep.kernel_tail_ok = false;
            rep.notes.push_back("kernel below log(1/t)^(1/n) at t=" + std::to_string(t));
            break;
        }
    }

    if (g.reasonable) {
        const double r = g.reasonable->r;
        double cmin = std::numeric_limits<double>::infinity();
        double prev = std::numeric_limits<double>::infinity();
        for (int i = 0; i < grid; ++i) {
            double t = std::pow(10.0, -12.0 + 15.0 * i / (grid - 1));
            double ft = g.kernel(t);
            cmin = std::min(cmin, g.kernel(std::pow(2.0, r) * t) / ft);
            if (ft > prev * (1.0 + 1e-12) || g.kernel(-t) != ft) {
                rep.reasonable_ok = false;
                rep.notes.push_back("kernel not even and non-increasing");
            }
            prev = ft;
        }
        rep.c_certified = cmin;
        if (cmin < g.reasonable->c) {
            rep.reasonable_ok = false;
            rep.notes.push_back("f(2^r t) >= c f(t) fails on the grid");
        }
        for (int x = 0; x < g.size(); ++x) {
            auto d = bfs_distances(g, x);
            for (auto& e : g.coupling[x]) {
                if (d[e.to] < 1 || std::fabs(e.J) > std::pow(static_cast<double>(d[e.to]), -r) * (1.0 + 1e-12)) {
                    rep.reasonable_ok = false;
                    rep.notes.push_back("|J| exceeds d^-r");
                    x = g.size();
                    break;
                }
            }
        }
    }
    return rep;
}

}  // namespace gibbs
