#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

namespace gibbs {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// coef * |v|^power, subtracted from the log-density.
struct PotentialTerm {
    double coef;
    double power;
};

namespace detail {

inline double abs_pow(double v, double p)
{
    double a = std::fabs(v);
    if (p == 2.0)
        return a * a;
    if (p == 4.0) {
        double a2 = a * a;
        return a2 * a2;
    }
    if (p == 1.0)
        return a;
    if (p == 6.0) {
        double a2 = a * a;
        return a2 * a2 * a2;
    }
    if (p == 3.0)
        return a * a * a;
    return std::pow(a, p);
}

inline double potential(const std::vector<PotentialTerm>& terms, double v)
{
    double s = 0.0;
    for (auto& t : terms)
        s += t.coef * abs_pow(v, t.power);
    return s;
}

// Merge equal powers and drop zero coefficients.
inline std::vector<PotentialTerm> normalized(std::vector<PotentialTerm> terms)
{
    std::map<double, double> by_power;
    for (auto& t : terms)
        by_power[t.power] += t.coef;
    std::vector<PotentialTerm> out;
    for (auto& [p, c] : by_power)
        if (c != 0.0)
            out.push_back({c, p});
    return out;
}

// Leading behaviour of a combined potential: +inf-growth iff the highest power has a positive coefficient.
inline bool confining(const std::vector<PotentialTerm>& terms)
{
    auto t = normalized(terms);
    if (t.empty())
        return false;
    const auto& top = t.back();
    return top.power > 0.0 && top.coef > 0.0;
}

// Gauss-Kronrod 15/7 on [a, b]; err is |K15 - G7|.
template <class F>
double gk15(F& f, double a, double b, double& err)
{
    static const auto& x = boost::math::quadrature::gauss_kronrod<double, 15>::abscissa();
    static const auto& wk = boost::math::quadrature::gauss_kronrod<double, 15>::weights();
    static const auto& wg = boost::math::quadrature::gauss<double, 7>::weights();
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double f0 = f(c);
    double k = wk[0] * f0, g = wg[0] * f0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        double v = f(c - h * x[i]) + f(c + h * x[i]);
        k += wk[i] * v;
        if (i % 2 == 0)
            g += wg[i / 2] * v;
    }
    err = std::fabs(h * (k - g));
    return h * k;
}

// Adaptive bisection; a piece is accepted when its error is below rel * |piece| or abs_tol.
template <class F>
double adaptive_gk(F& f, double a, double b, double rel, double abs_tol, int depth, double& err_total)
{
    double e = 0.0;
    double v = gk15(f, a, b, e);
    if (e <= abs_tol || e <= rel * std::fabs(v) || depth <= 0) {
        err_total += e;
        return v;
    }
    double m = 0.5 * (a + b);
    return adaptive_gk(f, a, m, rel, 0.5 * abs_tol, depth - 1, err_total) +
           adaptive_gk(f, m, b, rel, 0.5 * abs_tol, depth - 1, err_total);
}

}  // namespace detail

// One-dimensional single-site law. The log-density is
//   -sum(inner) evaluated at (u - shift) - sum(outer) evaluated at u,
// restricted to u >= shift when truncated.
class Measure {
  public:
    enum class Kind { poly_potential, pure_tail, gaussian, atomic };

    static Measure pure_tail(double a_tilde, double n)
    {
        if (!(a_tilde > 0.0) || !(n > 2.0))
            throw std::invalid_argument("pure_tail needs a > 0 and n > 2");
        Measure m(Kind::pure_tail);
        m.inner_ = {{a_tilde, n}};
        m.n_ = n;
        return m;
    }

    static Measure gaussian(double a)
    {
        if (!(a > 0.0))
            throw std::invalid_argument("gaussian needs a > 0");
        Measure m(Kind::gaussian);
        m.inner_ = {{a, 2.0}};
        m.n_ = 2.0;
        return m;
    }

    // P(u) = sum_k coeffs[k] u^k; must be even with positive leading coefficient and degree >= 4.
    static Measure poly_potential(const std::vector<double>& coeffs)
    {
        int deg = static_cast<int>(coeffs.size()) - 1;
        while (deg >= 0 && coeffs[deg] == 0.0)
            --deg;
        if (deg < 0)
            throw std::invalid_argument("polynomial potential is zero");
        for (int k = 1; k <= deg; k += 2)
            if (coeffs[k] != 0.0)
                throw std::invalid_argument("polynomial potential must be even (odd coefficient at degree " +
                                            std::to_string(k) + ")");
        if (deg < 4)
            throw std::invalid_argument("polynomial potential needs degree >= 4");
        if (!(coeffs[deg] > 0.0))
            throw std::invalid_argument("polynomial potential needs a positive leading coefficient");
        Measure m(Kind::poly_potential);
        for (int k = 2; k <= deg; k += 2)
            if (coeffs[k] != 0.0)
                m.inner_.push_back({coeffs[k], static_cast<double>(k)});
        m.n_ = deg;
        return m;
    }

    // exp(-g u^4 - a u^2)
    static Measure phi4(double g, double a) { return poly_potential({0.0, 0.0, a, 0.0, g}); }

    static Measure atomic(std::vector<std::pair<double, double>> atoms)
    {
        if (atoms.empty())
            throw std::invalid_argument("atomic measure needs at least one atom");
        for (auto& a : atoms)
            if (!(a.second > 0.0) || !std::isfinite(a.first))
                throw std::invalid_argument("atomic measure needs positive masses at finite locations");
        std::sort(atoms.begin(), atoms.end());
        Measure m(Kind::atomic);
        m.atoms_ = std::move(atoms);
        m.n_ = 2.0;
        return m;
    }

    Kind kind() const { return kind_; }
    bool is_atomic() const { return kind_ == Kind::atomic; }
    double tail_exponent() const { return n_; }
    double shift() const { return shift_; }
    bool truncated() const { return truncated_; }
    const std::vector<PotentialTerm>& inner_terms() const { return inner_; }
    const std::vector<PotentialTerm>& outer_terms() const { return outer_; }
    const std::vector<std::pair<double, double>>& atoms() const { return atoms_; }

    double support_lo() const { return truncated_ ? shift_ : kNegInf; }

    // Unnormalized log-density (log of the atom mass for atomic laws, evaluated only at atoms).
    double log_density(double u) const
    {
        if (truncated_ && u < shift_)
            return kNegInf;
        if (kind_ == Kind::atomic) {
            for (auto& a : atoms_)
                if (a.first + shift_ == u)
                    return std::log(a.second) - detail::potential(outer_, u);
            return kNegInf;
        }
        return -detail::potential(inner_, u - shift_) - detail::potential(outer_, u);
    }

    bool even() const
    {
        if (truncated_ || shift_ != 0.0)
            return false;
        if (kind_ != Kind::atomic)
            return true;
        for (auto& a : atoms_) {
            bool found = false;
            for (auto& b : atoms_)
                if (b.first == -a.first && b.second == a.second)
                    found = true;
            if (!found)
                return false;
        }
        return true;
    }

    // Finiteness of the integral of exp(b|u|^n) against this measure.
    // |u - B|^p and |u|^p share their leading behaviour, so the shift does not matter here.
    bool tilt_finite(double b, double n) const
    {
        if (kind_ == Kind::atomic)
            return true;
        auto combined = outer_;
        combined.insert(combined.end(), inner_.begin(), inner_.end());
        if (b != 0.0)
            combined.push_back({-b, n});
        return detail::confining(combined);
    }

    bool normalizable() const { return tilt_finite(0.0, 2.0); }

    // rho_b: density multiplied by exp(b|u|^n).
    Measure tilted(double b, double n) const
    {
        if (b == 0.0)
            return *this;
        if (!tilt_finite(b, n)) {
            std::ostringstream os;
            os << "tilt diverges: exp(" << b << "|u|^" << n << ") is not dominated by the tail of the measure";
            throw std::invalid_argument(os.str());
        }
        Measure m = *this;
        m.outer_.push_back({-b, n});
        m.outer_ = detail::normalized(m.outer_);
        return m;
    }

    // zeta_{a,B}: 1{u >= B} d rho_a(u - B).
    Measure shift_truncated(double a, double n, double B) const
    {
        if (!(B >= 0.0))
            throw std::invalid_argument("shift must be >= 0");
        if (truncated_ || shift_ != 0.0)
            throw std::invalid_argument("measure is already shifted");
        Measure base = tilted(a, n);
        Measure m = base;
        if (kind_ == Kind::atomic) {
            if (!base.outer_.empty())
                for (auto& at : m.atoms_)
                    at.second *= std::exp(-detail::potential(base.outer_, at.first));
            m.outer_.clear();
            std::vector<std::pair<double, double>> kept;
            for (auto& at : m.atoms_)
                if (at.first >= 0.0)
                    kept.push_back(at);
            if (kept.empty())
                throw std::invalid_argument("shift-truncation leaves no atoms");
            m.atoms_ = kept;
        }
        else {
            for (auto& t : base.outer_)
                m.inner_.push_back(t);
            m.inner_ = detail::normalized(m.inner_);
            m.outer_.clear();
        }
        m.shift_ = B;
        m.truncated_ = true;
        return m;
    }

    std::string describe() const
    {
        std::ostringstream os;
        os.precision(17);
        switch (kind_) {
        case Kind::poly_potential:
            os << "poly";
            break;
        case Kind::pure_tail:
            os << "pure_tail";
            break;
        case Kind::gaussian:
            os << "gaussian";
            break;
        case Kind::atomic:
            os << "atomic";
            for (auto& a : atoms_)
                os << " @" << a.first << ":" << a.second;
            break;
        }
        for (auto& t : inner_)
            os << " +" << t.coef << "|u-B|^" << t.power;
        for (auto& t : outer_)
            os << " +" << t.coef << "|u|^" << t.power;
        if (truncated_)
            os << " on [" << shift_ << ",inf)";
        return os.str();
    }

  private:
    explicit Measure(Kind k) : kind_(k) {}

    Kind kind_;
    std::vector<PotentialTerm> inner_;
    std::vector<PotentialTerm> outer_;
    std::vector<std::pair<double, double>> atoms_;
    double n_ = 2.0;
    double shift_ = 0.0;
    bool truncated_ = false;
};

inline Measure tilt(const Measure& m, double b, double n) { return m.tilted(b, n); }
inline Measure shift_truncate(const Measure& m, double a, double n, double B) { return m.shift_truncated(a, n, B); }

// True iff 0 < integral of exp(a|u|^n) d rho < infinity.
inline bool check_super_gaussian(const Measure& m, double a, double n) { return m.tilt_finite(a, n); }

// Support window of a log-concave-tailed density: [lo, hi] where log-density >= max - drop.
struct Window {
    double lo = 0.0, hi = 0.0, mode = 0.0, gmax = kNegInf;
    bool degenerate() const { return !(hi - lo > 1e-13 * std::max(1.0, std::fabs(mode))); }
};

template <class G>
Window find_window(const G& g, double support_lo, double drop = 40.0)
{
    Window w;
    const bool bounded = std::isfinite(support_lo);
    const double x0 = bounded ? support_lo : 0.0;
    double best_x = x0, best = g(x0);
    auto consider = [&](double x, double v) {
        if (v > best || !std::isfinite(best)) {
            best = v;
            best_x = x;
        }
    };

    auto expand = [&](int dir) {
        double step = 1.0, prev = g(x0), edge = x0;
        for (int it = 0; it < 2100; ++it) {
            double x = x0 + dir * step;
            double v = g(x);
            consider(x, v);
            edge = x;
            if ((v < best - drop - 10.0 || v == kNegInf) && v <= prev && it > 0)
                break;
            prev = v;
            step *= 2.0;
            if (!std::isfinite(x))
                break;
        }
        return edge;
    };
    double right = expand(+1);
    double left = bounded ? support_lo : expand(-1);
    if (!std::isfinite(best))
        throw std::runtime_error("density vanishes on the probed range");

    // dense scan for the global maximum, then golden-section refinement
    const int K = 2048;
    std::vector<double> xs(K + 1), gs(K + 1);
    int ib = 0;
    for (int i = 0; i <= K; ++i) {
        xs[i] = left + (right - left) * i / K;
        gs[i] = g(xs[i]);
        if (gs[i] > gs[ib])
            ib = i;
    }
    double a = xs[std::max(ib - 1, 0)], b = xs[std::min(ib + 1, K)];
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double gc = g(c), gd = g(d);
    for (int it = 0; it < 200 && (b - a) > 1e-15 * std::max(1.0, std::fabs(a)); ++it) {
        if (gc >= gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        }
        else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
    }
    double xm = 0.5 * (a + b);
    double gm = g(xm);
    if (gs[ib] > gm) {
        xm = xs[ib];
        gm = gs[ib];
    }
    if (best > gm) {
        xm = best_x;
        gm = best;
    }
    w.mode = xm;
    w.gmax = gm;
    const double thr = gm - drop;

    // outermost crossings of the threshold
    auto bisect = [&](double inside, double outside) {
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (inside + outside);
            if (mid == inside || mid == outside)
                break;
            if (g(mid) >= thr)
                inside = mid;
            else
                outside = mid;
        }
        return inside;
    };
    int il = 0;
    while (il <= K && gs[il] < thr)
        ++il;
    int ir = K;
    while (ir >= 0 && gs[ir] < thr)
        --ir;
    if (il > K) {
        // the peak is narrower than the scan spacing
        w.lo = bisect(xm, xs[std::max(ib - 1, 0)]);
        w.hi = bisect(xm, xs[std::min(ib + 1, K)]);
        if (w.lo > xm)
            w.lo = xm;
        if (w.hi < xm)
            w.hi = xm;
    }
    else {
        w.lo = (il == 0) ? xs[0] : bisect(std::min(xs[il], xm), xs[il - 1]);
        w.hi = (ir == K) ? xs[K] : bisect(std::max(xs[ir], xm), xs[ir + 1]);
        w.lo = std::min(w.lo, xm);
        w.hi = std::max(w.hi, xm);
    }
    if (bounded)
        w.lo = std::max(w.lo, support_lo);
    return w;
}

struct QuadratureOptions {
    double tolerance = 1e-10;
    double drop = 40.0;
};

// Numerical evaluation of integrals against rho tilted by exp(s u).
class Density {
  public:
    explicit Density(const Measure& m, double s = 0.0, QuadratureOptions opt = {})
        : m_(m), s_(s), opt_(opt)
    {
        if (m_.is_atomic()) {
            double mx = kNegInf;
            for (auto& a : m_.atoms())
                mx = std::max(mx, log_weight_atom(a));
            double z = 0.0;
            for (auto& a : m_.atoms())
                z += std::exp(log_weight_atom(a) - mx);
            log_z_ = mx + std::log(z);
            return;
        }
        if (!m_.normalizable())
            throw std::invalid_argument("measure is not normalizable");
        auto g = [this](double u) { return log_g(u); };
        w_ = find_window(g, m_.support_lo(), opt_.drop);
        if (w_.degenerate()) {
            log_z_ = w_.gmax;
            return;
        }
        double err = 0.0;
        total_ = integrate_scaled([](double) { return 1.0; }, w_.lo, w_.hi, &err);
        if (!(total_ > 0.0) || !std::isfinite(total_))
            throw std::runtime_error("normalization failed");
        if (err > opt_.tolerance * total_)
            throw std::runtime_error("quadrature did not converge: achieved relative error " + std::to_string(err / total_));
        log_z_ = w_.gmax + std::log(total_);
    }

    const Measure& measure() const { return m_; }
    double tilt() const { return s_; }
    const Window& window() const { return w_; }

    double log_normalization() const { return log_z_; }
    double normalization() const { return std::exp(log_z_); }

    double log_g(double u) const
    {
        double v = m_.log_density(u);
        return v == kNegInf ? v : v + s_ * u;
    }

    // E[w(U)] under the normalized law.
    template <class F>
    double expect(F w) const
    {
        if (m_.is_atomic()) {
            double s = 0.0;
            for (auto& a : m_.atoms())
                s += w(a.first + m_.shift()) * std::exp(log_weight_atom(a) - log_z_);
            return s;
        }
        if (w_.degenerate())
            return w(w_.mode);
        return integrate_scaled(w, w_.lo, w_.hi) / total_;
    }

    double moment(int k) const
    {
        return expect([k](double u) { return std::pow(u, k); });
    }

    double mean() const { return moment(1); }

    double cdf(double u) const
    {
        if (m_.is_atomic()) {
            double s = 0.0;
            for (auto& a : m_.atoms())
                if (a.first + m_.shift() <= u)
                    s += std::exp(log_weight_atom(a) - log_z_);
            return std::min(1.0, s);
        }
        if (w_.degenerate())
            return u >= w_.mode ? 1.0 : 0.0;
        if (u <= w_.lo)
            return 0.0;
        if (u >= w_.hi)
            return 1.0;
        double left = integrate_scaled([](double) { return 1.0; }, w_.lo, u);
        return std::clamp(left / total_, 0.0, 1.0);
    }

    // P[U >= t]
    double upper_tail(double t) const
    {
        if (m_.is_atomic()) {
            double s = 0.0;
            for (auto& a : m_.atoms())
                if (a.first + m_.shift() >= t)
                    s += std::exp(log_weight_atom(a) - log_z_);
            return std::min(1.0, s);
        }
        if (w_.degenerate())
            return t <= w_.mode ? 1.0 : 0.0;
        if (t >= w_.hi)
            return 0.0;
        if (t <= w_.lo)
            return 1.0;
        return std::clamp(integrate_scaled([](double) { return 1.0; }, t, w_.hi) / total_, 0.0, 1.0);
    }

    // P[U <= t]
    double lower_tail(double t) const { return cdf(t); }

    // P[|U| >= t]
    double tail_mass(double t) const
    {
        t = std::fabs(t);
        if (t == 0.0)
            return 1.0;
        return std::min(1.0, upper_tail(t) + lower_mass_below(-t));
    }

    double quantile(double q) const
    {
        if (!(q > 0.0 && q < 1.0))
            throw std::invalid_argument("quantile level must lie in (0,1)");
        if (m_.is_atomic()) {
            double s = 0.0;
            for (auto& a : m_.atoms()) {
                s += std::exp(log_weight_atom(a) - log_z_);
                if (s >= q)
                    return a.first + m_.shift();
            }
            return m_.atoms().back().first + m_.shift();
        }
        if (w_.degenerate())
            return w_.mode;
        boost::uintmax_t iters = 200;
        auto f = [&](double u) { return cdf(u) - q; };
        auto r = boost::math::tools::toms748_solve(f, w_.lo, w_.hi, f(w_.lo), f(w_.hi),
                                                   boost::math::tools::eps_tolerance<double>(50), iters);
        return 0.5 * (r.first + r.second);
    }

    // log of the unnormalized mass of [lo, hi]
    double log_mass(double lo, double hi) const
    {
        if (m_.is_atomic()) {
            double mx = kNegInf;
            std::vector<double> lw;
            for (auto& a : m_.atoms())
                if (a.first + m_.shift() >= lo && a.first + m_.shift() <= hi)
                    lw.push_back(log_weight_atom(a));
            if (lw.empty())
                return kNegInf;
            for (double v : lw)
                mx = std::max(mx, v);
            double z = 0.0;
            for (double v : lw)
                z += std::exp(v - mx);
            return mx + std::log(z);
        }
        if (w_.degenerate())
            return (w_.mode >= lo && w_.mode <= hi) ? log_z_ : kNegInf;
        double a = std::max(lo, w_.lo), b = std::min(hi, w_.hi);
        if (!(b > a)) {
            // interval outside the window: integrate directly with its own scale
            return raw_log_mass(lo, hi);
        }
        double v = integrate_scaled([](double) { return 1.0; }, a, b);
        return v > 0.0 ? w_.gmax + std::log(v) : kNegInf;
    }

  private:
    double log_weight_atom(const std::pair<double, double>& a) const
    {
        double u = a.first + m_.shift();
        return std::log(a.second) - detail::potential(m_.outer_terms(), u) + s_ * u;
    }

    double lower_mass_below(double t) const
    {
        if (t <= w_.lo)
            return 0.0;
        return cdf(t);
    }

    double raw_log_mass(double lo, double hi) const
    {
        if (!std::isfinite(lo))
            lo = -1e3;
        if (!std::isfinite(hi))
            hi = 1e3;
        lo = std::max(lo, m_.support_lo());
        if (!(hi > lo))
            return kNegInf;
        double mx = kNegInf;
        for (int i = 0; i <= 256; ++i)
            mx = std::max(mx, log_g(lo + (hi - lo) * i / 256));
        if (mx == kNegInf)
            return kNegInf;
        auto f = [&](double u) { return std::exp(log_g(u) - mx); };
        double e = 0.0;
        double v = detail::adaptive_gk(f, lo, hi, 1e-12, 0.0, 20, e);
        return v > 0.0 ? mx + std::log(v) : kNegInf;
    }

    template <class F>
    double integrate_scaled(F w, double a, double b, double* err_out = nullptr) const
    {
        // split into panels so narrow features are not missed by the first Kronrod pass
        const int panels = 16;
        double sum = 0.0, err = 0.0;
        auto f = [&](double u) {
            double v = log_g(u);
            return v == kNegInf ? 0.0 : w(u) * std::exp(v - w_.gmax);
        };
        // absolute floor relative to the window scale, so tiny sub-intervals terminate
        const double abs_tol = 1e-15 * std::max(total_, 1e-300) + 1e-300;
        for (int i = 0; i < panels; ++i) {
            double pa = a + (b - a) * i / panels, pb = a + (b - a) * (i + 1) / panels;
            sum += detail::adaptive_gk(f, pa, pb, 1e-13, total_ > 0.0 ? abs_tol / panels : 0.0, 30, err);
        }
        if (err_out)
            *err_out = err;
        return sum;
    }

    Measure m_;
    double s_ = 0.0;
    QuadratureOptions opt_;
    Window w_;
    double total_ = 0.0;
    double log_z_ = 0.0;
};

enum class Query { normalization, moment, cdf, quantile, tail_mass };

// Single entry point for one-dimensional integrals against a measure.
inline double quadrature_eval(const Measure& m, Query q, double arg = 0.0)
{
    Density d(m);
    switch (q) {
    case Query::normalization:
        return d.normalization();
    case Query::moment:
        return d.moment(static_cast<int>(arg));
    case Query::cdf:
        return d.cdf(arg);
    case Query::quantile:
        return d.quantile(arg);
    case Query::tail_mass:
        return d.tail_mass(arg);
    }
    return 0.0;
}

// log of the integral of exp(b|u|^n) over [-R, R] against m, without assuming integrability.
// Used to exhibit divergence of a tilt that check_super_gaussian rejects.
inline double truncated_log_mass(const Measure& m, double b, double n, double R)
{
    auto lg = [&](double u) {
        double v = m.log_density(u);
        return v == kNegInf ? v : v + b * std::pow(std::fabs(u), n);
    };
    double mx = kNegInf;
    const int K = 4096;
    for (int i = 0; i <= K; ++i)
        mx = std::max(mx, lg(-R + 2.0 * R * i / K));
    if (mx == kNegInf)
        return kNegInf;
    auto f = [&](double u) {
        double v = lg(u);
        return v == kNegInf ? 0.0 : std::exp(v - mx);
    };
    double s = 0.0;
    for (int i = 0; i < 64; ++i)
    {
        double e = 0.0;
        s += detail::adaptive_gk(f, -R + 2.0 * R * i / 64, -R + 2.0 * R * (i + 1) / 64, 1e-12, 0.0, 15, e);
    }
    return mx + std::log(s);
}

// Inverse-CDF table: equal-mass cells (4096 by default) with monotone cubic (Fritsch-Butland) interpolation.
class QuantileTable {
  public:
    static constexpr int kCells = 4096;

    QuantileTable() = default;

    explicit QuantileTable(const Measure& m, double s = 0.0, double drop = 40.0)
    {
        if (m.is_atomic()) {
            build_atomic(m, s);
            return;
        }
        auto g = [&](double u) {
            double v = m.log_density(u);
            return v == kNegInf ? v : v + s * u;
        };
        Window w = find_window(g, m.support_lo(), drop);
        u_.assign(kCells + 1, w.mode);
        if (w.degenerate())
            return;
        build_continuous(g, w);
    }

    // Table for an arbitrary unnormalized log-density with `cells` equal-mass cells.
    template <class G>
    static QuantileTable from_log_density(const G& g, double support_lo, int cells, double drop = 40.0)
    {
        if (cells < 8)
            throw std::invalid_argument("quantile table needs at least 8 cells");
        QuantileTable t;
        t.cells_ = cells;
        Window w = find_window(g, support_lo, drop);
        t.u_.assign(cells + 1, w.mode);
        if (!w.degenerate())
            t.build_continuous(g, w);
        return t;
    }

    bool atomic() const { return !atoms_.empty(); }

    // Non-decreasing in U, strictly increasing on continuous laws.
    double sample(double U) const
    {
        if (!atoms_.empty()) {
            auto it = std::upper_bound(atom_cdf_.begin(), atom_cdf_.end(), U);
            std::size_t i = std::min<std::size_t>(it - atom_cdf_.begin(), atoms_.size() - 1);
            return atoms_[i];
        }
        const int cells = cells_;
        double x = U * cells;
        int k = static_cast<int>(x);
        k = std::clamp(k, 0, cells - 1);
        double t = x - k;
        // the two outermost cells carry their own equal-mass subdivision
        if (k == 0 && !lo_tail_.empty()) {
            double y = t * kTail;
            // last sub-cell: exponential tail matched to the density at its inner node
            if (y < 1.0)
                return y <= 0.0 ? lo_tail_[0] : std::max(lo_tail_[0], lo_tail_[1] + lo_scale_ * std::log(y));
            return interp(lo_tail_, y);
        }
        if (k == cells - 1 && !hi_tail_.empty()) {
            double y = t * kTail;
            if (y > kTail - 1.0)
                return y >= kTail ? hi_tail_[kTail] : std::min(hi_tail_[kTail], hi_tail_[kTail - 1] - hi_scale_ * std::log(kTail - y));
            return interp(hi_tail_, y);
        }
        return interp(u_, x);
    }

    double lo() const { return atoms_.empty() ? u_.front() : atoms_.front(); }
    double hi() const { return atoms_.empty() ? u_.back() : atoms_.back(); }
    const std::vector<double>& nodes() const { return u_; }

  private:
    static constexpr int kTail = 64;

    // Fritsch-Butland cubic through equal-mass nodes, x in [0, nodes.size() - 1].
    static double interp(const std::vector<double>& u, double x)
    {
        const int cells = static_cast<int>(u.size()) - 1;
        int k = std::clamp(static_cast<int>(x), 0, cells - 1);
        double t = x - k;
        const double u0 = u[k], u1 = u[k + 1];
        const double d = u1 - u0;
        if (d <= 0.0)
            return u0;
        double dl = k > 0 ? u0 - u[k - 1] : d;
        double dr = k + 2 <= cells ? u[k + 2] - u1 : d;
        double m0 = (dl > 0.0) ? 2.0 * dl * d / (dl + d) : 0.0;
        double m1 = (dr > 0.0) ? 2.0 * d * dr / (d + dr) : 0.0;
        double t2 = t * t, t3 = t2 * t;
        double v = (2 * t3 - 3 * t2 + 1) * u0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * u1 + (t3 - t2) * m1;
        return std::clamp(v, u0, u1);
    }

    void build_atomic(const Measure& m, double s)
    {
        double mx = kNegInf;
        std::vector<double> lw;
        for (auto& a : m.atoms()) {
            double u = a.first + m.shift();
            lw.push_back(std::log(a.second) - detail::potential(m.outer_terms(), u) + s * u);
            atoms_.push_back(u);
            mx = std::max(mx, lw.back());
        }
        double z = 0.0;
        for (double v : lw)
            z += std::exp(v - mx);
        double c = 0.0;
        for (double v : lw) {
            c += std::exp(v - mx) / z;
            atom_cdf_.push_back(c);
        }
        atom_cdf_.back() = 1.0;
    }

    template <class G>
    void build_continuous(const G& g, const Window& w)
    {
        const int cells = cells_;
        const int M = std::max(2 * cells, 1024);
        const double h = (w.hi - w.lo) / M;
        std::vector<double> f(M + 1), fm(M), cum(M + 1, 0.0);
        for (int i = 0; i <= M; ++i) {
            double v = g(w.lo + h * i);
            f[i] = v == kNegInf ? 0.0 : std::exp(v - w.gmax);
        }
        for (int i = 0; i < M; ++i) {
            double v = g(w.lo + h * (i + 0.5));
            fm[i] = v == kNegInf ? 0.0 : std::exp(v - w.gmax);
            cum[i + 1] = cum[i] + h / 6.0 * (f[i] + 4.0 * fm[i] + f[i + 1]);
        }
        const double total = cum[M];
        // position with cumulative mass `target`, inverting the quadratic density of its sub-cell
        auto invert = [&](double target) {
            int i = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), target) - cum.begin()) - 1;
            i = std::clamp(i, 0, M - 1);
            double r = target - cum[i];
            double mass = cum[i + 1] - cum[i];
            double tau = mass > 0.0 ? std::clamp(r / mass, 0.0, 1.0) : 0.0;
            // quadratic density through (0, f0), (1/2, fm), (1, f1) in cell units
            const double f0 = f[i], f1 = f[i + 1], fc = fm[i];
            const double bq = -3.0 * f0 + 4.0 * fc - f1, cq = 2.0 * f0 - 4.0 * fc + 2.0 * f1;
            auto C = [&](double x) { return h * (f0 * x + bq * x * x / 2.0 + cq * x * x * x / 3.0); };
            double a = 0.0, b = 1.0;
            for (int it = 0; it < 60; ++it) {
                double val = C(tau) - r;
                if (val > 0.0)
                    b = tau;
                else
                    a = tau;
                double dens = h * (f0 + bq * tau + cq * tau * tau);
                double next = dens > 0.0 ? tau - val / dens : 0.5 * (a + b);
                if (!(next > a && next < b))
                    next = 0.5 * (a + b);
                if (std::fabs(next - tau) < 1e-15)
                    break;
                tau = next;
            }
            return w.lo + h * (i + tau);
        };
        u_[0] = w.lo;
        u_[cells] = w.hi;
        for (int k = 1; k < cells; ++k)
            u_[k] = std::max(u_[k - 1], invert(total * k / cells));
        for (int k = 1; k <= cells; ++k)
            u_[k] = std::max(u_[k], u_[k - 1]);
        lo_tail_.assign(kTail + 1, w.lo);
        hi_tail_.assign(kTail + 1, w.hi);
        lo_tail_[kTail] = u_[1];
        hi_tail_[0] = u_[cells - 1];
        for (int j = 1; j < kTail; ++j) {
            lo_tail_[j] = std::clamp(invert(total * j / (static_cast<double>(cells) * kTail)), lo_tail_[j - 1], u_[1]);
            hi_tail_[j] = std::clamp(invert(total * ((cells - 1.0) / cells + j / (static_cast<double>(cells) * kTail))),
                                     hi_tail_[j - 1], w.hi);
        }
        const double sub = total / (static_cast<double>(cells) * kTail);
        auto scale = [&](double u) {
            double v = g(u);
            double fu = v == kNegInf ? 0.0 : std::exp(v - w.gmax);
            return fu > 0.0 ? sub / fu : 0.0;
        };
        lo_scale_ = scale(lo_tail_[1]);
        hi_scale_ = scale(hi_tail_[kTail - 1]);
    }

    int cells_ = kCells;
    std::vector<double> u_;
    std::vector<double> lo_tail_, hi_tail_;
    double lo_scale_ = 0.0, hi_scale_ = 0.0;
    std::vector<double> atoms_;
    std::vector<double> atom_cdf_;
};

// Draw from the measure with one uniform variate.
template <class RNG>
double draw(const QuantileTable& table, RNG& rng)
{
    return table.sample(rng.uniform());
}

// Default alpha_0: smallest grid value >= 1 with rho_a([-alpha_0, alpha_0]) > 0.
inline double default_alpha0(const Measure& m, double a, double n)
{
    Measure ra = m.tilted(a, n);
    Density d(ra);
    for (int i = 0; i <= 400; ++i) {
        double al = 1.0 + 0.25 * i;
        if (d.log_mass(-al, al) > kNegInf)
            return al;
    }
    throw std::runtime_error("no alpha_0 <= 101 carries positive mass");
}

// Conditions for vertex-dependent single-site laws rho_x = exp(-a_x u^2) d mu_x.
struct VertexMeasureCheck {
    bool a_bounds_ok = true;
    bool t_mass_ok = true;
    bool total_mass_ok = true;
    double min_t_mass = std::numeric_limits<double>::infinity();
    double max_total_mass = 0.0;
};

inline VertexMeasureCheck check_vertex_measures(const std::vector<Measure>& rho, const std::vector<double>& a_x,
                                                double a_min, double a_max, double t_lo, double t_hi, double M1,
                                                double M2)
{
    VertexMeasureCheck c;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        if (a_x[i] < a_min || a_x[i] > a_max)
            c.a_bounds_ok = false;
        Measure mu = rho[i].tilted(a_x[i], 2.0);
        Density d(mu);
        double tm = std::exp(d.log_mass(t_lo, t_hi));
        c.min_t_mass = std::min(c.min_t_mass, tm);
        c.max_total_mass = std::max(c.max_total_mass, d.normalization());
    }
    c.t_mass_ok = c.min_t_mass >= M1;
    c.total_mass_ok = c.max_total_mass <= M2;
    return c;
}

}  // namespace gibbs
