#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "rrlstm/tensor.hpp"

namespace rrlstm {

/// Regularized incomplete beta I_x(a, b) (Lentz continued fraction).
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - regularized_incomplete_beta(b, a, 1.0 - x);

    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double tiny = 1e-300;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double f = d;
    for (int m = 1; m <= 10000; ++m) {
        const double m2 = 2.0 * m;
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        f *= d * c;
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(log_front) * f / a;
}

/// Two-sided p-value of Student's t statistic with df degrees of freedom.
inline double student_t_two_sided_p(double t, double df) {
    if (std::isinf(t)) return 0.0;
    return regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

struct Correlation {
    double coefficient = 0.0;
    double p_value = 1.0;
};

namespace detail {

inline Correlation correlation_with_t_test(double r, std::size_t n) {
    r = std::clamp(r, -1.0, 1.0);
    const double df = static_cast<double>(n) - 2.0;
    if (std::abs(r) == 1.0) return {r, 0.0};
    const double t = r * std::sqrt(df / (1.0 - r * r));
    return {r, student_t_two_sided_p(t, df)};
}

inline double pearson_r(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw NumericalError("correlation undefined: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

/// Sample Pearson r with a two-sided t-test p-value (n - 2 degrees of freedom).
inline Correlation pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionError("pearson: length mismatch");
    if (x.size() < 3) throw DimensionError("pearson: need at least 3 points");
    return detail::correlation_with_t_test(detail::pearson_r(x, y), x.size());
}

/// 1-based ranks; tied values share their mean rank.
inline Vector average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    Vector ranks(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

/// Spearman rho: Pearson on average ranks, same t approximation for p.
inline Correlation spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionError("spearman: length mismatch");
    if (x.size() < 3) throw DimensionError("spearman: need at least 3 points");
    const Vector rx = average_ranks(x);
    const Vector ry = average_ranks(y);
    return detail::correlation_with_t_test(detail::pearson_r(rx, ry), x.size());
}

}  // namespace rrlstm
