#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "wimec/error.hpp"

namespace wimec::stats {

inline double mean(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double stddev(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

// Normal-approximation 95% half-width used in experiment summaries.
inline double ci95_normal(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    return 1.959963984540054 * stddev(x) / std::sqrt(static_cast<double>(x.size()));
}

struct Interval {
    double mean = 0;
    double lo = 0;
    double hi = 0;
};

// Student-t confidence interval for the mean of `x`.
inline Interval t_interval(const std::vector<double>& x, double level = 0.95) {
    Interval r;
    r.mean = mean(x);
    if (x.size() < 2) {
        r.lo = r.hi = r.mean;
        return r;
    }
    boost::math::students_t dist(static_cast<double>(x.size() - 1));
    const double q = boost::math::quantile(dist, 0.5 + level / 2.0);
    const double h = q * stddev(x) / std::sqrt(static_cast<double>(x.size()));
    r.lo = r.mean - h;
    r.hi = r.mean + h;
    return r;
}

inline std::vector<double> differences(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ModelError("paired samples differ in length");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}

// One-sided p-value for H1: mean(x) > 0.
inline double t_test_greater(const std::vector<double>& x) {
    const double s = stddev(x);
    const double m = mean(x);
    if (x.size() < 2) return 1.0;
    if (s == 0) return m > 0 ? 0.0 : 1.0;
    const double t = m / (s / std::sqrt(static_cast<double>(x.size())));
    boost::math::students_t dist(static_cast<double>(x.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, t));
}

// Average ranks (ties share the mean rank).
inline std::vector<double> ranks(const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean(x), my = mean(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks(x), ranks(y));
}

// One-sided sign test p-value for "positives outnumber negatives"; zeros dropped.
inline double sign_test_greater(int positives, int negatives) {
    const int n = positives + negatives;
    if (n == 0) return 1.0;
    boost::math::binomial dist(n, 0.5);
    if (positives == 0) return 1.0;
    return boost::math::cdf(boost::math::complement(dist, positives - 1));
}

}  // namespace wimec::stats
