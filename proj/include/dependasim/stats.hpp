#pragma once

// Small statistics toolkit used by tests, the report command and acceptance checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace dependasim {

struct KsResult {
    double statistic = 0.0;
    double critical_01 = 0.0;  // alpha = 0.01 asymptotic critical value
    bool reject_01() const { return statistic > critical_01; }
};

template <typename T>
KsResult ks_two_sample(std::span<const T> a_in, std::span<const T> b_in) {
    KsResult r;
    if (a_in.empty() || b_in.empty()) return r;
    std::vector<T> a(a_in.begin(), a_in.end()), b(b_in.begin(), b_in.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const T x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    r.statistic = d;
    r.critical_01 = 1.628 * std::sqrt((n + m) / (n * m));
    return r;
}

template <typename T>
KsResult ks_two_sample(const std::vector<T>& a, const std::vector<T>& b) {
    return ks_two_sample(std::span<const T>(a), std::span<const T>(b));
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double t = 0.0;
    double p_two_sided = 1.0;
    std::size_t n = 0;
};

// Ordinary least squares y = a + b x with a t-test on the slope.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    LinearFit f;
    f.n = std::min(x.size(), y.size());
    if (f.n < 2) return f;
    const double n = static_cast<double>(f.n);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < f.n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < f.n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (f.n < 3) return f;
    double sse = 0;
    for (std::size_t i = 0; i < f.n; ++i) {
        const double e = y[i] - f.intercept - f.slope * x[i];
        sse += e * e;
    }
    const double dof = n - 2.0;
    f.slope_se = std::sqrt(sse / dof / sxx);
    if (f.slope_se == 0) {
        f.t = f.slope == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), f.slope);
        f.p_two_sided = f.slope == 0 ? 1.0 : 0.0;
        return f;
    }
    f.t = f.slope / f.slope_se;
    boost::math::students_t dist(dof);
    f.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(f.t)));
    return f;
}

// Quantile of a histogram given as bucket -> count (bucket index is the value).
inline double histogram_quantile(const std::map<std::uint64_t, std::uint64_t>& hist, double q) {
    std::uint64_t total = 0;
    for (const auto& [_, c] : hist) total += c;
    if (total == 0) return std::numeric_limits<double>::quiet_NaN();
    const double target = q * static_cast<double>(total);
    std::uint64_t acc = 0;
    for (const auto& [b, c] : hist) {
        acc += c;
        if (static_cast<double>(acc) >= target) return static_cast<double>(b);
    }
    return static_cast<double>(hist.rbegin()->first);
}

struct Bimodality {
    bool bimodal = false;
    double split = 0.0;  // Otsu threshold on log10(bucket + 1) used to seed the fit
    double ashman_d = 0.0;
    double low_weight = 0.0;  // mixture weight of the lower component
    double low_mean = 0.0, high_mean = 0.0;
    double bic_gain = 0.0;  // BIC(one Gaussian) - BIC(two Gaussians)
};

// Two-mode test on a log scale. A two-component Gaussian mixture is fitted by EM to
// log10(bucket + 1), seeded from the Otsu split. Bimodal when Ashman's D between the
// components exceeds 2, each component holds at least 5% of the mass and the mixture
// beats a single Gaussian on BIC.
inline Bimodality bimodality(const std::map<std::uint64_t, std::uint64_t>& hist) {
    Bimodality out;
    std::vector<std::pair<double, double>> pts;  // log value, weight
    double total = 0;
    for (const auto& [b, c] : hist) {
        if (!c) continue;
        pts.emplace_back(std::log10(static_cast<double>(b) + 1.0), static_cast<double>(c));
        total += static_cast<double>(c);
    }
    if (pts.size() < 2) return out;

    double best = -1.0;
    std::size_t best_k = 1;
    for (std::size_t k = 1; k < pts.size(); ++k) {
        double w0 = 0, s0 = 0, w1 = 0, s1 = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            auto& [v, w] = pts[i];
            (i < k ? w0 : w1) += w;
            (i < k ? s0 : s1) += w * v;
        }
        const double m0 = s0 / w0, m1 = s1 / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            best_k = k;
        }
    }
    out.split = 0.5 * (pts[best_k - 1].first + pts[best_k].first);

    // Bucket width sets a floor on the resolvable spread.
    constexpr double kMinVar = 0.01;
    constexpr double kLog2Pi = 1.8378770664093453;
    auto log_pdf = [&](double x, double m, double var) { return -0.5 * (kLog2Pi + std::log(var) + (x - m) * (x - m) / var); };

    double mean1 = 0, var1 = 0;
    for (auto& [v, w] : pts) mean1 += w * v;
    mean1 /= total;
    for (auto& [v, w] : pts) var1 += w * (v - mean1) * (v - mean1);
    var1 = std::max(kMinVar, var1 / total);
    double ll1 = 0;
    for (auto& [v, w] : pts) ll1 += w * log_pdf(v, mean1, var1);

    std::array<double, 2> pi{}, mu{}, var{};
    {
        std::array<double, 2> w{}, s{}, q{};
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const int c = i < best_k ? 0 : 1;
            w[c] += pts[i].second;
            s[c] += pts[i].second * pts[i].first;
            q[c] += pts[i].second * pts[i].first * pts[i].first;
        }
        for (int c = 0; c < 2; ++c) {
            pi[c] = w[c] / total;
            mu[c] = s[c] / w[c];
            var[c] = std::max(kMinVar, q[c] / w[c] - mu[c] * mu[c]);
        }
    }
    double ll2 = 0;
    for (int iter = 0; iter < 500; ++iter) {
        std::array<double, 2> w{}, s{}, q{};
        double ll = 0;
        for (auto& [v, wt] : pts) {
            const double a0 = std::log(pi[0]) + log_pdf(v, mu[0], var[0]);
            const double a1 = std::log(pi[1]) + log_pdf(v, mu[1], var[1]);
            const double mx = std::max(a0, a1);
            const double lse = mx + std::log(std::exp(a0 - mx) + std::exp(a1 - mx));
            const double r0 = std::exp(a0 - lse);
            ll += wt * lse;
            w[0] += wt * r0;
            w[1] += wt * (1 - r0);
            s[0] += wt * r0 * v;
            s[1] += wt * (1 - r0) * v;
            q[0] += wt * r0 * v * v;
            q[1] += wt * (1 - r0) * v * v;
        }
        bool degenerate = false;
        for (int c = 0; c < 2; ++c) {
            if (w[c] <= 1e-9 * total) {
                degenerate = true;
                break;
            }
            pi[c] = w[c] / total;
            mu[c] = s[c] / w[c];
            var[c] = std::max(kMinVar, q[c] / w[c] - mu[c] * mu[c]);
        }
        if (degenerate) return out;
        const bool done = iter > 0 && std::abs(ll - ll2) < 1e-9 * std::abs(ll);
        ll2 = ll;
        if (done) break;
    }
    const int lo = mu[0] <= mu[1] ? 0 : 1, hi = 1 - lo;
    out.low_mean = mu[lo];
    out.high_mean = mu[hi];
    out.low_weight = pi[lo];
    out.ashman_d = std::sqrt(2.0) * std::abs(mu[hi] - mu[lo]) / std::sqrt(var[lo] + var[hi]);
    // Parameters: 2 for one Gaussian, 5 for the mixture.
    out.bic_gain = (-2.0 * ll1 + 2.0 * std::log(total)) - (-2.0 * ll2 + 5.0 * std::log(total));
    out.bimodal = out.ashman_d > 2.0 && out.low_weight >= 0.05 && out.low_weight <= 0.95 && out.bic_gain > 0.0;
    return out;
}

}  // namespace dependasim
