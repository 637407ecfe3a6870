#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "friquee/error.hpp"

namespace friquee::eval {

namespace detail {

inline void require_pair(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw Error(ErrorKind::InvalidArgument, "correlation inputs differ in length");
    if (a.size() < 3) throw Error(ErrorKind::InvalidArgument, "correlation needs at least 3 points");
}

}  // namespace detail

/// 1-based ranks; tied values share the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    std::vector<double> rank(x.size());
    for (std::size_t lo = 0; lo < order.size();) {
        std::size_t hi = lo + 1;
        while (hi < order.size() && x[order[hi]] == x[order[lo]]) ++hi;
        const double r = 0.5 * static_cast<double>(lo + hi + 1);
        for (std::size_t k = lo; k < hi; ++k) rank[order[k]] = r;
        lo = hi;
    }
    return rank;
}

/// Pearson correlation of raw values. Empty when either side has zero variance.
inline std::optional<double> plcc(std::span<const double> a, std::span<const double> b) {
    detail::require_pair(a, b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline std::optional<double> srocc(std::span<const double> a, std::span<const double> b) {
    detail::require_pair(a, b);
    const std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
    return plcc(ra, rb);
}

/// Fraction of predictions further than two subjective standard deviations from the MOS.
/// Throws NotAvailable when any standard deviation is missing.
inline double outlier_ratio(std::span<const double> pred, std::span<const double> mos,
                            std::span<const std::optional<double>> mos_std) {
    if (pred.size() != mos.size() || pred.size() != mos_std.size())
        throw Error(ErrorKind::InvalidArgument, "outlier ratio inputs differ in length");
    if (pred.empty()) throw Error(ErrorKind::InvalidArgument, "outlier ratio of an empty set");
    std::size_t outside = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!mos_std[i]) throw Error(ErrorKind::NotAvailable, "score standard deviation missing");
        if (std::abs(pred[i] - mos[i]) > 2.0 * *mos_std[i]) ++outside;
    }
    return static_cast<double>(outside) / static_cast<double>(pred.size());
}

}  // namespace friquee::eval
