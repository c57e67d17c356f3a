#pragma once

// Deterministic summation helpers.
//
// Monte Carlo results must be bitwise independent of the worker count, so all
// reductions over per-path values go through pairwise summation of a fully
// materialised buffer: the tree shape depends only on the buffer length.

#include <cstddef>
#include <vector>

namespace refract::detail {

/// Pairwise (cascade) sum of v[begin, end). Error grows like O(log n * eps).
inline double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(v.data(), v.size());
}

struct MeanVar {
    double mean = 0.0;
    double variance = 0.0;  ///< unbiased sample variance
};

/// Two-pass mean/variance, both passes pairwise for determinism.
inline MeanVar mean_variance(const std::vector<double>& v) {
    MeanVar out;
    const std::size_t n = v.size();
    if (n == 0) return out;
    out.mean = pairwise_sum(v) / static_cast<double>(n);
    if (n < 2) return out;
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = v[i] - out.mean;
        sq[i] = d * d;
    }
    out.variance = pairwise_sum(sq) / static_cast<double>(n - 1);
    return out;
}

}  // namespace refract::detail
