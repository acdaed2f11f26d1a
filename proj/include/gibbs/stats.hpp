#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace gibbs {

// One-sided DKW half-width: P(sup (F_n - F) > eps) <= alpha.
inline double dkw_epsilon(long long n, double alpha = 0.01) { return std::sqrt(std::log(1.0 / alpha) / (2.0 * n)); }

// Two-sided asymptotic Kolmogorov critical value for sqrt(n) D_n.
inline double ks_critical(long long n, double alpha)
{
    return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

struct SeriesStats {
    long long n = 0;
    double mean = 0.0;
    double variance = 0.0;
    double stderr_ = 0.0;
    double tau = 1.0;  // integrated autocorrelation time, n * se^2 / var
    double ess = 0.0;
};

// Batch means over `batches` contiguous blocks; a short series falls back to the iid formula.
inline SeriesStats batch_means(const std::vector<double>& xs, int batches = 32)
{
    SeriesStats s;
    s.n = static_cast<long long>(xs.size());
    if (s.n == 0)
        return s;
    double sum = 0.0;
    for (double v : xs)
        sum += v;
    s.mean = sum / s.n;
    double ss = 0.0;
    for (double v : xs)
        ss += (v - s.mean) * (v - s.mean);
    s.variance = s.n > 1 ? ss / (s.n - 1) : 0.0;
    const long long b = s.n / batches;
    if (b < 2 || batches < 2) {
        s.stderr_ = std::sqrt(s.variance / s.n);
        s.ess = static_cast<double>(s.n);
        return s;
    }
    std::vector<double> bm(batches, 0.0);
    for (int k = 0; k < batches; ++k) {
        double t = 0.0;
        for (long long i = k * b; i < (k + 1) * b; ++i)
            t += xs[i];
        bm[k] = t / b;
    }
    double mb = 0.0;
    for (double v : bm)
        mb += v;
    mb /= batches;
    double vb = 0.0;
    for (double v : bm)
        vb += (v - mb) * (v - mb);
    vb /= (batches - 1);
    s.stderr_ = std::sqrt(vb / batches);
    if (s.variance > 0.0) {
        s.tau = std::max(1.0, s.n * s.stderr_ * s.stderr_ / s.variance);
        // never report an error bar below the iid one
        s.stderr_ = std::max(s.stderr_, std::sqrt(s.variance / s.n));
    }
    s.ess = s.n / s.tau;
    return s;
}

// Empirical quantile (type 7 interpolation) of an unsorted sample.
inline double empirical_quantile(std::vector<double> xs, double q)
{
    if (xs.empty())
        throw std::invalid_argument("quantile of an empty sample");
    std::sort(xs.begin(), xs.end());
    double h = (xs.size() - 1) * q;
    std::size_t i = static_cast<std::size_t>(std::floor(h));
    if (i + 1 >= xs.size())
        return xs.back();
    return xs[i] + (h - i) * (xs[i + 1] - xs[i]);
}

struct QuantileEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

// Quantile with a batch standard error (spread of per-batch quantiles).
inline QuantileEstimate batch_quantile(const std::vector<double>& xs, double q, int batches = 32)
{
    QuantileEstimate e;
    e.value = empirical_quantile(xs, q);
    const std::size_t b = xs.size() / batches;
    if (b < 8)
        return e;
    std::vector<double> qs;
    for (int k = 0; k < batches; ++k)
        qs.push_back(empirical_quantile(std::vector<double>(xs.begin() + k * b, xs.begin() + (k + 1) * b), q));
    double m = 0.0;
    for (double v : qs)
        m += v;
    m /= batches;
    double v2 = 0.0;
    for (double v : qs)
        v2 += (v - m) * (v - m);
    e.stderr_ = std::sqrt(v2 / (batches - 1) / batches);
    return e;
}

struct Histogram {
    std::vector<double> edges;
    std::vector<long long> counts;
    long long total() const
    {
        long long t = 0;
        for (auto c : counts)
            t += c;
        return t;
    }
};

// Equal-width bins on [lo, hi]; values outside go to the end bins so mass equals the sample count.
inline Histogram make_histogram(const std::vector<double>& xs, double lo, double hi, int bins)
{
    if (!(hi > lo) || bins < 1)
        throw std::invalid_argument("histogram needs hi > lo and bins >= 1");
    Histogram h;
    h.edges.resize(bins + 1);
    for (int i = 0; i <= bins; ++i)
        h.edges[i] = lo + (hi - lo) * i / bins;
    h.counts.assign(bins, 0);
    for (double v : xs) {
        int k = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
        h.counts[std::clamp(k, 0, bins - 1)]++;
    }
    return h;
}

inline Histogram make_histogram(const std::vector<double>& xs, int bins)
{
    if (xs.empty())
        return make_histogram(xs, 0.0, 1.0, bins);
    auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
    double lo = *mn, hi = *mx;
    if (!(hi > lo))
        hi = lo + 1.0;
    return make_histogram(xs, lo, hi, bins);
}

// sup_u |F_n(u) - F(u)| for a continuous reference cdf.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf)
{
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double D = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double F = cdf(xs[i]);
        D = std::max({D, F - i / n, (i + 1) / n - F});
    }
    return D;
}

// sup_u (F_a(u) - F_b(u)) over the pooled sample: positive values say a sits below b somewhere.
inline double one_sided_ks(std::vector<double> a, std::vector<double> b)
{
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double D = 0.0;
    while (i < a.size() || j < b.size()) {
        double u = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
        while (i < a.size() && a[i] <= u)
            ++i;
        while (j < b.size() && b[j] <= u)
            ++j;
        D = std::max(D, i / na - j / nb);
    }
    return D;
}

// Critical value for one_sided_ks at level alpha.
inline double one_sided_ks_critical(long long na, long long nb, double alpha)
{
    return std::sqrt(-std::log(alpha) * (na + nb) / (2.0 * na * nb));
}

}  // namespace gibbs
