#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "graph.hpp"
#include "measures.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace gibbs {

namespace detail {

// |b + v|^p - |b|^p - p |b|^(p-1) sgn(b) v, without cancellation when |v| << |b|.
inline double power_remainder(double b, double p, double v)
{
    if (b == 0.0)
        return abs_pow(v, p);
    const double x = v / b;
    const double scale = abs_pow(b, p);
    if (std::fabs(x) < 1e-2) {
        double term = 1.0, sum = 0.0, xk = x;
        for (int k = 1; k <= 12; ++k) {
            term *= (p - k + 1) / k;
            if (k >= 2)
                sum += term * xk;
            xk *= x;
        }
        return scale * sum;
    }
    return scale * (abs_pow(1.0 + x, p) - 1.0 - p * x);
}

inline double dpotential(const std::vector<PotentialTerm>& terms, double v)
{
    double s = 0.0;
    for (auto& t : terms) {
        if (v == 0.0 && t.power > 1.0)
            continue;
        s += t.coef * t.power * std::pow(std::fabs(v), t.power - 1.0) * (v < 0.0 ? -1.0 : 1.0);
    }
    return s;
}

}  // namespace detail

// Inverse-cdf draws from exp(s u) d rho(u) / Z. Continuous laws use tables cached per bucket of
// sigma(s) (width 1e-3) and interpolated linearly between the two bucket edges, so a draw is
// non-decreasing in both the uniform variate and s. sigma is the identity on |s| <= 64 and
// logarithmic beyond, which keeps huge boundary fields in a bounded number of buckets.
class TiltedSampler {
  public:
    static constexpr double kBucket = 1e-3;
    static constexpr double kLinear = 64.0;

    explicit TiltedSampler(Measure m, int cells = 512, std::size_t max_tables = 16384)
        : m_(std::move(m)), cells_(cells), max_tables_(max_tables)
    {
        if (m_.is_atomic())
            mode_ = Mode::atomic;
        else if (m_.kind() == Measure::Kind::gaussian && m_.outer_terms().empty() && !m_.truncated())
            mode_ = Mode::gaussian;
        if (mode_ == Mode::atomic) {
            for (auto& a : m_.atoms()) {
                double u = a.first + m_.shift();
                atom_u_.push_back(u);
                atom_lw_.push_back(std::log(a.second) - detail::potential(m_.outer_terms(), u));
            }
        }
    }

    const Measure& measure() const { return m_; }
    std::size_t tables_built() const { return built_; }
    std::size_t cached() const { return cache_.size(); }

    static double sigma(double s)
    {
        double a = std::fabs(s);
        return a <= kLinear ? s : std::copysign(kLinear + kLinear * std::log(a / kLinear), s);
    }
    static double sigma_inv(double g)
    {
        double a = std::fabs(g);
        return a <= kLinear ? g : std::copysign(kLinear * std::exp((a - kLinear) / kLinear), g);
    }

    double draw(double s, double U)
    {
        if (!std::isfinite(s))
            throw std::domain_error("non-finite tilt in conditional draw");
        switch (mode_) {
        case Mode::atomic:
            return draw_atomic(s, U);
        case Mode::gaussian: {
            const double a = m_.inner_terms().front().coef;
            double z = -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * U);
            return s / (2.0 * a) + z / std::sqrt(2.0 * a);
        }
        case Mode::table:
            break;
        }
        const double g = sigma(s) / kBucket;
        const double k = std::floor(g);
        const double w = g - k;
        const long long kk = static_cast<long long>(k);
        double v0 = value(kk, U);
        if (w == 0.0)
            return v0;
        double v1 = value(kk + 1, U);
        return v0 + w * (v1 - v0);
    }

    // Mode of the tilted law for |s| beyond the linear range (its centring point).
    double centre(double s) const
    {
        auto psi = [&](double u) { return s - detail::dpotential(m_.inner_terms(), u - m_.shift()) -
                                          detail::dpotential(m_.outer_terms(), u); };
        const double base = m_.truncated() ? m_.shift() : 0.0;
        if (psi(base) <= 0.0 && (m_.truncated() || s == 0.0))
            return base;
        double lo = base, hi = base;
        if (s > 0.0) {
            double step = 1.0;
            hi = base + step;
            while (psi(hi) > 0.0) {
                lo = hi;
                step *= 2.0;
                hi = base + step;
                if (!std::isfinite(hi))
                    throw std::domain_error("tilted mode out of range");
            }
        }
        else {
            double step = 1.0;
            lo = base - step;
            while (psi(lo) <= 0.0) {
                hi = lo;
                step *= 2.0;
                lo = base - step;
                if (!std::isfinite(lo))
                    throw std::domain_error("tilted mode out of range");
            }
        }
        // invariant: psi(lo) > 0 >= psi(hi)
        for (int it = 0; it < 2000; ++it) {
            double mid = lo + 0.5 * (hi - lo);
            if (mid <= lo || mid >= hi)
                break;
            if (psi(mid) > 0.0)
                lo = mid;
            else
                hi = mid;
        }
        return std::fabs(psi(lo)) < std::fabs(psi(hi)) ? lo : hi;
    }

  private:
    enum class Mode { table, atomic, gaussian };

    struct Entry {
        double centre = 0.0;
        QuantileTable table;
    };

    double value(long long k, double U)
    {
        auto it = cache_.find(k);
        if (it == cache_.end()) {
            if (cache_.size() >= max_tables_)
                cache_.clear();
            it = cache_.emplace(k, build(sigma_inv(k * kBucket))).first;
        }
        return it->second.centre + it->second.table.sample(U);
    }

    Entry build(double s)
    {
        ++built_;
        Entry e;
        if (std::fabs(s) <= kLinear) {
            auto g = [&](double u) {
                double v = m_.log_density(u);
                return v == kNegInf ? v : v + s * u;
            };
            e.table = QuantileTable::from_log_density(g, m_.support_lo(), cells_);
            return e;
        }
        const double c = centre(s);
        const double B = m_.shift();
        double lin = s - detail::dpotential(m_.inner_terms(), c - B) - detail::dpotential(m_.outer_terms(), c);
        const bool trunc = m_.truncated();
        // a residual at rounding level only moves the centre below one ulp
        if (std::fabs(lin) <= 64.0 * std::numeric_limits<double>::epsilon() * std::fabs(s) && !(trunc && c == B))
            lin = 0.0;
        double curv = 0.0;
        for (auto& t : m_.inner_terms())
            if (t.power >= 2.0)
                curv += t.coef * t.power * (t.power - 1.0) * std::pow(std::fabs(c - B), t.power - 2.0);
        for (auto& t : m_.outer_terms())
            if (t.power >= 2.0)
                curv += t.coef * t.power * (t.power - 1.0) * std::pow(std::fabs(c), t.power - 2.0);
        // a truncation point many widths away plays no part in the window search
        const bool near_edge = trunc && !(curv > 0.0 && (c - B) * std::sqrt(curv) > 64.0);
        auto g = [&](double v) {
            if (trunc && c + v < B)
                return kNegInf;
            double r = lin * v;
            for (auto& t : m_.inner_terms())
                r -= t.coef * detail::power_remainder(c - B, t.power, v);
            for (auto& t : m_.outer_terms())
                r -= t.coef * detail::power_remainder(c, t.power, v);
            return r;
        };
        e.centre = c;
        e.table = QuantileTable::from_log_density(g, near_edge ? B - c : kNegInf, cells_);
        return e;
    }

    double draw_atomic(double s, double U) const
    {
        double mx = kNegInf;
        std::vector<double> lw(atom_u_.size());
        for (std::size_t i = 0; i < lw.size(); ++i) {
            lw[i] = atom_lw_[i] + s * atom_u_[i];
            mx = std::max(mx, lw[i]);
        }
        double z = 0.0;
        for (double v : lw)
            z += std::exp(v - mx);
        double c = 0.0;
        for (std::size_t i = 0; i + 1 < lw.size(); ++i) {
            c += std::exp(lw[i] - mx) / z;
            if (U <= c)
                return atom_u_[i];
        }
        return atom_u_.back();
    }

    Measure m_;
    int cells_;
    std::size_t max_tables_;
    Mode mode_ = Mode::table;
    std::unordered_map<long long, Entry> cache_;
    std::size_t built_ = 0;
    std::vector<double> atom_u_, atom_lw_;
};

// Per-thread pool of samplers keyed by the exact measure description.
inline TiltedSampler& sampler_for(const Measure& m)
{
    thread_local std::unordered_map<std::string, std::unique_ptr<TiltedSampler>> pool;
    auto key = m.describe();
    auto it = pool.find(key);
    if (it == pool.end()) {
        if (pool.size() > 256)
            pool.clear();
        it = pool.emplace(key, std::make_unique<TiltedSampler>(m)).first;
    }
    return *it->second;
}

// Finite-volume model: chain updates `region`; vertices outside it hold the boundary values xi.
struct ModelSpec {
    Graph graph;
    Region region;
    double beta = 0.0;
    std::vector<Measure> measures;  // distinct single-site laws
    std::vector<int> site_measure;  // per vertex, index into measures
    std::vector<double> xi;         // boundary values (entries inside region ignored)
    std::vector<double> h;          // exterior field, filled by finalize()
    bool truncation_flag = false;

    const Measure& measure_at(int x) const { return measures[site_measure[x]]; }

    void set_boundary(std::vector<double> values)
    {
        xi = std::move(values);
        finalize();
    }

    // Validates and caches the exterior field.
    void finalize()
    {
        const int N = graph.size();
        if (!(beta >= 0.0))
            throw std::invalid_argument("beta must be >= 0");
        if (static_cast<int>(region.in.size()) != N)
            throw std::invalid_argument("region size does not match the graph");
        if (xi.empty())
            xi.assign(N, 0.0);
        if (static_cast<int>(xi.size()) != N || static_cast<int>(site_measure.size()) != N)
            throw std::invalid_argument("boundary or measure map size does not match the graph");
        h.assign(N, 0.0);
        truncation_flag = false;
        for (int x = 0; x < N; ++x) {
            if (!region.in[x])
                continue;
            auto hf = h_field(graph, region, xi, x);
            if (!std::isfinite(hf.value))
                throw std::invalid_argument("exterior field is not finite at vertex " + std::to_string(x));
            h[x] = hf.value;
            truncation_flag = truncation_flag || hf.truncation_flag;
        }
    }

    // Gaussian-tailed sites must dominate the quadratic interaction (Gershgorin bound).
    void check_well_defined() const
    {
        for (int x = 0; x < graph.size(); ++x) {
            if (!region.in[x])
                continue;
            const Measure& m = measure_at(x);
            if (m.is_atomic() || m.tail_exponent() > 2.0)
                continue;
            double row = 0.0;
            for (auto& e : graph.coupling[x])
                if (region.in[e.to])
                    row += std::fabs(e.J);
            if (!check_super_gaussian(m, 0.5 * beta * row, 2.0))
                throw std::invalid_argument("gaussian single-site law too weak for beta at vertex " + std::to_string(x));
        }
    }
};

inline ModelSpec make_spec(const Graph& g, const Region& L, double beta, const Measure& rho,
                           std::vector<double> xi = {})
{
    ModelSpec s;
    s.graph = g;
    s.region = L;
    s.beta = beta;
    s.measures = {rho};
    s.site_measure.assign(g.size(), 0);
    s.xi = std::move(xi);
    s.finalize();
    s.check_well_defined();
    return s;
}

inline void set_site_measure(ModelSpec& s, int x, const Measure& m)
{
    auto key = m.describe();
    for (std::size_t i = 0; i < s.measures.size(); ++i)
        if (s.measures[i].describe() == key) {
            s.site_measure[x] = static_cast<int>(i);
            return;
        }
    s.measures.push_back(m);
    s.site_measure[x] = static_cast<int>(s.measures.size() - 1);
}

// zeta_{a,B} with B from (2/a)(K + log rho_a(R) - log rho_{a/2}(R)), K the regularity exponent.
inline double zeta_shift(const Measure& rho, double a, double K)
{
    if (!(a > 0.0))
        throw std::invalid_argument("zeta shift needs a > 0");
    double la = Density(rho.tilted(a, 2.0)).log_normalization();
    double lh = Density(rho.tilted(0.5 * a, 2.0)).log_normalization();
    double r = (2.0 / a) * (K + la - lh);
    return std::sqrt(std::max(0.0, r));
}

// B_x for product-law domination: exponent C~ A_x^2.
inline double zeta_shift_at(const Measure& rho, double a, double C_tilde, double A)
{
    return zeta_shift(rho, a, C_tilde * A * A);
}

// B for the plus-measure constructions: exponent 2 C~.
inline double plus_zeta_shift(const Measure& rho, double a, double C_tilde)
{
    return zeta_shift(rho, a, 2.0 * C_tilde);
}

// rho~: zeta_{a,B} on the inner boundary of L, rho inside, zero boundary outside.
inline ModelSpec rho_tilde_spec(const Graph& g, const Region& L, double beta, const Measure& rho, double a, double B)
{
    ModelSpec s = make_spec(g, L, beta, rho);
    Measure z = shift_truncate(rho, a, 2.0, B);
    Region d = boundary_of(g, L);
    for (int x = 0; x < g.size(); ++x)
        if (d.in[x])
            set_site_measure(s, x, z);
    s.check_well_defined();
    return s;
}

// t_x = sum_{y in region, y != x} J_xy phi_y + h_x
inline double local_field(const ModelSpec& s, const std::vector<double>& phi, int x)
{
    double t = s.h[x];
    for (auto& e : s.graph.coupling[x])
        if (e.to != x && s.region.in[e.to])
            t += e.J * phi[e.to];
    return t;
}

inline double conditional_draw(const ModelSpec& s, const std::vector<double>& phi, int x, Rng& rng)
{
    return sampler_for(s.measure_at(x)).draw(s.beta * local_field(s, phi, x), rng.uniform());
}

struct Observable {
    std::string name;
    std::function<double(const std::vector<double>&)> f;
};

inline Observable obs_site(int x)
{
    return {"phi_" + std::to_string(x), [x](const std::vector<double>& p) { return p[x]; }};
}
inline Observable obs_abs(int x)
{
    return {"abs_phi_" + std::to_string(x), [x](const std::vector<double>& p) { return std::fabs(p[x]); }};
}
inline Observable obs_product(int x, int y)
{
    return {"phi_" + std::to_string(x) + "_phi_" + std::to_string(y),
            [x, y](const std::vector<double>& p) { return p[x] * p[y]; }};
}
inline Observable obs_indicator_ge(int x, double u)
{
    return {"ind_phi_" + std::to_string(x) + "_ge", [x, u](const std::vector<double>& p) { return p[x] >= u ? 1.0 : 0.0; }};
}

struct ObservableStats {
    std::string name;
    SeriesStats stats;
    Histogram histogram;
    std::vector<double> samples;
};

struct ChainState {
    std::vector<double> phi;
    std::uint64_t stream = 0;
    long long sweep = 0;
    std::vector<double> site_sum, site_sum2;
    long long recorded = 0;
};

struct ChainStats {
    std::vector<ObservableStats> observables;
    ChainState state;
    const ObservableStats& operator[](const std::string& n) const
    {
        for (auto& o : observables)
            if (o.name == n)
                return o;
        throw std::out_of_range("no observable " + n);
    }
    bool empty() const { return observables.empty(); }
};

struct ChainOptions {
    long long sweeps = 1000;
    long long burn_in = 100;
    int thinning = 1;
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;
    int histogram_bins = 50;
    bool keep_samples = true;
    std::vector<double> init;  // full-length start configuration; zeros when empty
};

namespace detail {

struct SweepPlan {
    std::vector<int> order;
    std::vector<std::vector<std::pair<int, double>>> inner;  // couplings inside the region, per position
    std::vector<TiltedSampler*> sampler;
};

inline SweepPlan plan_for(const ModelSpec& s)
{
    SweepPlan p;
    p.order = s.region.vertices();
    for (int x : p.order) {
        std::vector<std::pair<int, double>> in;
        for (auto& e : s.graph.coupling[x])
            if (e.to != x && s.region.in[e.to])
                in.push_back({e.to, e.J});
        p.inner.push_back(std::move(in));
        p.sampler.push_back(&sampler_for(s.measure_at(x)));
    }
    return p;
}

inline std::vector<double> initial_state(const ModelSpec& s, const std::vector<double>& init)
{
    std::vector<double> phi(s.graph.size(), 0.0);
    for (int x = 0; x < s.graph.size(); ++x)
        phi[x] = s.region.in[x] ? (init.empty() ? 0.0 : init[x]) : s.xi[x];
    return phi;
}

inline void sweep(const ModelSpec& s, const SweepPlan& p, std::vector<double>& phi, Rng& rng)
{
    for (std::size_t i = 0; i < p.order.size(); ++i) {
        const int x = p.order[i];
        double t = s.h[x];
        for (auto& [y, J] : p.inner[i])
            t += J * phi[y];
        phi[x] = p.sampler[i]->draw(s.beta * t, rng.uniform());
    }
}

inline void finish_stats(ChainStats& out, std::vector<std::vector<double>>& series, const std::vector<Observable>& obs,
                         const ChainOptions& opt)
{
    for (std::size_t k = 0; k < obs.size(); ++k) {
        ObservableStats os;
        os.name = obs[k].name;
        os.stats = batch_means(series[k]);
        os.histogram = make_histogram(series[k], opt.histogram_bins);
        if (opt.keep_samples)
            os.samples = std::move(series[k]);
        out.observables.push_back(std::move(os));
    }
}

}  // namespace detail

// Systematic-scan heat-bath chain. Deterministic in (spec, options).
inline ChainStats run_chain(const ModelSpec& s, const ChainOptions& opt, const std::vector<Observable>& obs)
{
    ChainStats out;
    if (s.region.size() == 0)
        return out;
    if (!(opt.sweeps > opt.burn_in) || opt.burn_in < 0)
        throw std::invalid_argument("sweeps must exceed burn-in");
    if (opt.thinning < 1)
        throw std::invalid_argument("thinning must be >= 1");
    auto plan = detail::plan_for(s);
    Rng rng(opt.seed, opt.stream);
    auto& st = out.state;
    st.phi = detail::initial_state(s, opt.init);
    st.stream = opt.stream;
    st.site_sum.assign(s.graph.size(), 0.0);
    st.site_sum2.assign(s.graph.size(), 0.0);
    std::vector<std::vector<double>> series(obs.size());
    for (long long t = 0; t < opt.sweeps; ++t) {
        detail::sweep(s, plan, st.phi, rng);
        ++st.sweep;
        if (t < opt.burn_in || (t - opt.burn_in) % opt.thinning != 0)
            continue;
        for (std::size_t k = 0; k < obs.size(); ++k)
            series[k].push_back(obs[k].f(st.phi));
        for (int x : plan.order) {
            st.site_sum[x] += st.phi[x];
            st.site_sum2[x] += st.phi[x] * st.phi[x];
        }
        ++st.recorded;
    }
    detail::finish_stats(out, series, obs, opt);
    return out;
}

enum class CouplingOrder { boundary, beta, identical };

struct CoupledResult {
    ChainStats low, high;
    long long order_violations = 0;         // on the watched vertices
    long long interior_violations = 0;      // on the other updated vertices, reported only
    CouplingOrder order = CouplingOrder::identical;
};

// Classifies the pair as boundary-ordered (same beta, laws, xi <= xi') or beta-ordered (same
// laws and xi, beta <= beta'); anything else is a contract error.
inline CouplingOrder coupling_order(const ModelSpec& lo, const ModelSpec& hi)
{
    if (lo.graph.size() != hi.graph.size() || lo.region.in != hi.region.in)
        throw std::invalid_argument("coupled specs must share the graph and region");
    if (!lo.graph.ferromagnetic() || !hi.graph.ferromagnetic())
        throw std::invalid_argument("coupled specs need ferromagnetic couplings");
    for (int x = 0; x < lo.graph.size(); ++x)
        for (auto& e : lo.graph.coupling[x])
            if (hi.graph.J(x, e.to) != e.J)
                throw std::invalid_argument("coupled specs must share the couplings");
    bool same_laws = true;
    for (int x = 0; x < lo.graph.size(); ++x)
        if (lo.region.in[x] && lo.measure_at(x).describe() != hi.measure_at(x).describe())
            same_laws = false;
    if (!same_laws)
        throw std::invalid_argument("coupled specs must share the single-site laws");
    bool xi_le = true, xi_eq = true;
    for (int x = 0; x < lo.graph.size(); ++x) {
        if (lo.region.in[x])
            continue;
        xi_le = xi_le && lo.xi[x] <= hi.xi[x];
        xi_eq = xi_eq && lo.xi[x] == hi.xi[x];
    }
    if (lo.beta == hi.beta && xi_eq)
        return CouplingOrder::identical;
    if (lo.beta == hi.beta && xi_le)
        return CouplingOrder::boundary;
    if (lo.beta <= hi.beta && xi_eq)
        return CouplingOrder::beta;
    throw std::invalid_argument("coupled specs are not ordered");
}

// Lock-step sweeps sharing one uniform per (vertex, sweep). `watch` selects the vertices whose
// order phi <= phi' is audited (all updated vertices when empty).
inline CoupledResult coupled_run(const ModelSpec& lo, const ModelSpec& hi, const ChainOptions& opt,
                                 const std::vector<Observable>& obs, const std::vector<int>& watch = {})
{
    CoupledResult r;
    r.order = coupling_order(lo, hi);
    if (lo.region.size() == 0)
        return r;
    if (!(opt.sweeps > opt.burn_in))
        throw std::invalid_argument("sweeps must exceed burn-in");
    auto pl = detail::plan_for(lo), ph = detail::plan_for(hi);
    std::vector<char> watched(lo.graph.size(), watch.empty() ? 1 : 0);
    for (int x : watch)
        watched[x] = 1;
    Rng rng(opt.seed, opt.stream);
    auto a = detail::initial_state(lo, opt.init), b = detail::initial_state(hi, opt.init);
    std::vector<std::vector<double>> sa(obs.size()), sb(obs.size());
    for (long long t = 0; t < opt.sweeps; ++t) {
        for (std::size_t i = 0; i < pl.order.size(); ++i) {
            const int x = pl.order[i];
            double ta = lo.h[x], tb = hi.h[x];
            for (auto& [y, J] : pl.inner[i]) {
                ta += J * a[y];
                tb += J * b[y];
            }
            const double U = rng.uniform();
            a[x] = pl.sampler[i]->draw(lo.beta * ta, U);
            b[x] = ph.sampler[i]->draw(hi.beta * tb, U);
            if (a[x] > b[x]) {
                if (watched[x])
                    ++r.order_violations;
                else
                    ++r.interior_violations;
            }
        }
        if (t < opt.burn_in || (t - opt.burn_in) % opt.thinning != 0)
            continue;
        for (std::size_t k = 0; k < obs.size(); ++k) {
            sa[k].push_back(obs[k].f(a));
            sb[k].push_back(obs[k].f(b));
        }
    }
    detail::finish_stats(r.low, sa, obs, opt);
    detail::finish_stats(r.high, sb, obs, opt);
    r.low.state.phi = a;
    r.high.state.phi = b;
    return r;
}

// Random boundary conditions: the inner boundary of L is drawn from the product of the zeta laws,
// then the chain runs on L minus its inner boundary with those values fixed.
struct RandomBoundarySpec {
    ModelSpec interior;            // region = L \ dL
    Region outer;                  // L
    Region boundary;               // dL
    std::vector<Measure> zeta;     // per vertex of the graph; used on dL only
};

inline RandomBoundarySpec random_bc_spec(const Graph& g, const Region& L, double beta, const Measure& rho, double a,
                                         const std::vector<double>& B)
{
    RandomBoundarySpec r;
    r.outer = L;
    r.boundary = boundary_of(g, L);
    Region in = L;
    for (int x = 0; x < g.size(); ++x)
        if (r.boundary.in[x])
            in.in[x] = 0;
    r.interior = make_spec(g, in, beta, rho);
    if (static_cast<int>(B.size()) != g.size())
        throw std::invalid_argument("one shift per vertex expected");
    for (int x = 0; x < g.size(); ++x)
        r.zeta.push_back(r.boundary.in[x] ? shift_truncate(rho, a, 2.0, B[x]) : rho);
    return r;
}

struct RandomBCOptions {
    long long outer_draws = 100;
    ChainOptions chain;  // per boundary draw; seed/stream are derived per draw
};

inline ChainStats sample_random_bc(const RandomBoundarySpec& rb, const RandomBCOptions& opt,
                                   const std::vector<Observable>& obs)
{
    ChainStats out;
    if (rb.outer.size() == 0)
        return out;
    ModelSpec s = rb.interior;
    Rng brng(opt.chain.seed, 0xB0DA);
    std::vector<std::vector<double>> series(obs.size());
    const int N = s.graph.size();
    for (long long d = 0; d < opt.outer_draws; ++d) {
        std::vector<double> xi(N, 0.0);
        for (int x = 0; x < N; ++x)
            if (rb.boundary.in[x])
                xi[x] = sampler_for(rb.zeta[x]).draw(0.0, brng.uniform());
        s.set_boundary(std::move(xi));
        ChainOptions co = opt.chain;
        co.stream = opt.chain.stream * 1000003ull + static_cast<std::uint64_t>(d) + 1;
        co.keep_samples = true;
        if (s.region.size() == 0) {
            // no interior: the sample is the boundary draw itself
            for (std::size_t k = 0; k < obs.size(); ++k)
                series[k].push_back(obs[k].f(s.xi));
            continue;
        }
        auto cs = run_chain(s, co, obs);
        for (std::size_t k = 0; k < obs.size(); ++k)
            series[k].insert(series[k].end(), cs.observables[k].samples.begin(), cs.observables[k].samples.end());
        out.state = cs.state;
    }
    detail::finish_stats(out, series, obs, opt.chain);
    return out;
}

}  // namespace gibbs
