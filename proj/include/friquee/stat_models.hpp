#pragma once

// Moment-matching estimators for the parametric models fitted to every feature map:
// zero-mean generalized Gaussian (GGD), asymmetric generalized Gaussian (AGGD) and the
// wrapped Cauchy circular model, plus standardized sample moments and a bounded
// histogram goodness-of-fit score.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "friquee/error.hpp"

namespace friquee::stats {

struct GgdFit {
    double alpha = 0.0;  ///< shape
    double sigma = 0.0;  ///< standard deviation
    bool saturated = false;  ///< moment ratio fell outside the tabulated shape range
};

struct AggdFit {
    double nu = 0.0;  ///< shape
    double eta = 0.0;  ///< mean offset (beta_r - beta_l) * G(2/nu) / G(1/nu)
    double sigma_l = 0.0;
    double sigma_r = 0.0;
    bool saturated = false;
};

struct WrappedCauchyFit {
    double location = 0.0;  ///< in (-pi, pi]
    double concentration = 0.0;  ///< in [0, 1)
};

struct SampleStats {
    double mean = 0.0;
    double std = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;  ///< non-excess: Gaussian -> 3
    bool degenerate = false;  ///< zero variance; skewness/kurtosis reported as 0
};

inline constexpr double kMinShape = 0.05;
inline constexpr double kMaxShape = 10.0;
inline constexpr double kShapeStep = 0.001;
inline constexpr std::size_t kMinFitSamples = 64;
inline constexpr double kMaxConcentration = 1.0 - 1e-9;

/// rho(a) = G(2/a)^2 / (G(1/a) G(3/a)), the ratio E[|x|]^2 / E[x^2] of a GGD with shape a.
inline double ggd_moment_ratio(double shape) {
    return std::exp(2.0 * std::lgamma(2.0 / shape) - std::lgamma(1.0 / shape) - std::lgamma(3.0 / shape));
}

namespace detail {

struct ShapeTable {
    std::vector<double> shapes;
    std::vector<double> ratios;  // increasing in shape
};

inline const ShapeTable& shape_table() {
    static const ShapeTable table = [] {
        ShapeTable t;
        const auto n = static_cast<std::size_t>(std::llround((kMaxShape - kMinShape) / kShapeStep)) + 1;
        t.shapes.resize(n);
        t.ratios.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Built from integer thousandths so the endpoints are exactly the range limits.
            t.shapes[i] = static_cast<double>(std::llround(kMinShape * 1000.0) + static_cast<long long>(i)) / 1000.0;
            t.ratios[i] = ggd_moment_ratio(t.shapes[i]);
        }
        return t;
    }();
    return table;
}

struct ShapeLookup {
    double shape;
    bool saturated;
};

// Nearest tabulated shape whose moment ratio is closest to `ratio`.
inline ShapeLookup invert_moment_ratio(double ratio) {
    const ShapeTable& t = shape_table();
    if (!(ratio > t.ratios.front())) return {t.shapes.front(), true};
    if (!(ratio < t.ratios.back())) return {t.shapes.back(), true};
    const auto it = std::lower_bound(t.ratios.begin(), t.ratios.end(), ratio);
    auto idx = static_cast<std::size_t>(it - t.ratios.begin());
    if (idx > 0 && std::abs(t.ratios[idx - 1] - ratio) <= std::abs(t.ratios[idx] - ratio)) --idx;
    return {t.shapes[idx], false};
}

inline void require_finite(std::span<const double> samples) {
    for (double v : samples)
        if (!std::isfinite(v)) throw Error(ErrorKind::DegenerateSample, "non-finite sample");
}

}  // namespace detail

/// Zero-mean GGD fit: sigma^2 = E[x^2], shape from E[|x|]^2 / E[x^2].
inline GgdFit fit_ggd(std::span<const double> samples) {
    if (samples.size() < kMinFitSamples)
        throw Error(ErrorKind::DegenerateSample, "fit_ggd needs at least 64 samples");
    detail::require_finite(samples);
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (double v : samples) {
        abs_sum += std::abs(v);
        sq_sum += v * v;
    }
    if (!(sq_sum > 0.0)) throw Error(ErrorKind::DegenerateSample, "all samples are zero");
    const auto n = static_cast<double>(samples.size());
    const double mean_abs = abs_sum / n;
    const double mean_sq = sq_sum / n;
    const auto lookup = detail::invert_moment_ratio(mean_abs * mean_abs / mean_sq);
    return {lookup.shape, std::sqrt(mean_sq), lookup.saturated};
}

/// AGGD fit: left/right scales from the mean squares of the negative/positive samples.
inline AggdFit fit_aggd(std::span<const double> samples) {
    if (samples.size() < kMinFitSamples)
        throw Error(ErrorKind::DegenerateSample, "fit_aggd needs at least 64 samples");
    detail::require_finite(samples);
    double left_sq = 0.0, right_sq = 0.0, abs_sum = 0.0, sq_sum = 0.0;
    std::size_t left_n = 0, right_n = 0;
    for (double v : samples) {
        const double sq = v * v;
        if (v < 0.0) {
            left_sq += sq;
            ++left_n;
        } else if (v > 0.0) {
            right_sq += sq;
            ++right_n;
        }
        abs_sum += std::abs(v);
        sq_sum += sq;
    }
    if (left_n == 0 || right_n == 0)
        throw Error(ErrorKind::OneSidedSample, "AGGD needs both negative and positive samples");

    const auto n = static_cast<double>(samples.size());
    const double sl = std::sqrt(left_sq / static_cast<double>(left_n));
    const double sr = std::sqrt(right_sq / static_cast<double>(right_n));
    const double mean_abs = abs_sum / n;
    const double r_hat = mean_abs * mean_abs / (sq_sum / n);
    // (g^3 + 1)(g + 1) / (g^2 + 1)^2 with g = sl / sr, kept symmetric in (sl, sr).
    const double s2 = sl * sl + sr * sr;
    const double big_r = r_hat * (sl * sl * sl + sr * sr * sr) * (sl + sr) / (s2 * s2);
    const auto lookup = detail::invert_moment_ratio(big_r);
    const double nu = lookup.shape;

    const double scale = std::sqrt(std::tgamma(1.0 / nu) / std::tgamma(3.0 / nu));
    const double beta_l = sl * scale;
    const double beta_r = sr * scale;
    const double eta = (beta_r - beta_l) * std::exp(std::lgamma(2.0 / nu) - std::lgamma(1.0 / nu));
    return {nu, eta, sl, sr, lookup.saturated};
}

/// Wrapped Cauchy fit via the first circular moment (its resultant length equals rho).
inline WrappedCauchyFit fit_wrapped_cauchy(std::span<const double> angles) {
    if (angles.empty()) throw Error(ErrorKind::DegenerateSample, "no angles");
    detail::require_finite(angles);
    double c = 0.0, s = 0.0;
    for (double a : angles) {
        c += std::cos(a);
        s += std::sin(a);
    }
    const auto n = static_cast<double>(angles.size());
    c /= n;
    s /= n;
    double location = std::atan2(s, c);
    if (location <= -std::numbers::pi) location = std::numbers::pi;
    const double resultant = std::hypot(c, s);
    return {location, std::min(resultant, kMaxConcentration)};
}

/// Wrapped Cauchy density (1 - r^2) / (2 pi (1 + r^2 - 2 r cos(theta - mu))).
inline double wrapped_cauchy_pdf(double theta, const WrappedCauchyFit& fit) {
    const double r = fit.concentration;
    return (1.0 - r * r) /
           (2.0 * std::numbers::pi * (1.0 + r * r - 2.0 * r * std::cos(theta - fit.location)));
}

/// Mean, population std, skewness m3/m2^1.5 and non-excess kurtosis m4/m2^2.
inline SampleStats sample_stats(std::span<const double> samples) {
    if (samples.size() < 4) throw Error(ErrorKind::DegenerateSample, "sample_stats needs at least 4 samples");
    detail::require_finite(samples);
    const auto n = static_cast<double>(samples.size());
    double sum = 0.0;
    for (double v : samples) sum += v;
    SampleStats out;
    out.mean = sum / n;
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    if (*lo == *hi) {
        out.mean = *lo;
        out.degenerate = true;
        return out;
    }
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : samples) {
        const double d = v - out.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    out.std = std::sqrt(m2);
    if (!(m2 > 0.0)) {
        out.degenerate = true;
        return out;
    }
    out.skewness = m3 / (m2 * std::sqrt(m2));
    out.kurtosis = m4 / (m2 * m2);
    return out;
}

inline double ggd_beta(double alpha, double sigma) {
    return sigma * std::sqrt(std::tgamma(1.0 / alpha) / std::tgamma(3.0 / alpha));
}

inline double ggd_pdf(double x, const GgdFit& fit) {
    const double beta = ggd_beta(fit.alpha, fit.sigma);
    return fit.alpha / (2.0 * beta * std::tgamma(1.0 / fit.alpha)) *
           std::exp(-std::pow(std::abs(x) / beta, fit.alpha));
}

inline double ggd_cdf(double x, const GgdFit& fit) {
    const double beta = ggd_beta(fit.alpha, fit.sigma);
    const double half_mass = 0.5 * boost::math::gamma_p(1.0 / fit.alpha, std::pow(std::abs(x) / beta, fit.alpha));
    return x < 0.0 ? 0.5 - half_mass : 0.5 + half_mass;
}

inline double aggd_pdf(double x, const AggdFit& fit) {
    const double scale = std::sqrt(std::tgamma(1.0 / fit.nu) / std::tgamma(3.0 / fit.nu));
    const double beta_l = fit.sigma_l * scale;
    const double beta_r = fit.sigma_r * scale;
    const double norm = fit.nu / ((beta_l + beta_r) * std::tgamma(1.0 / fit.nu));
    const double beta = x < 0.0 ? beta_l : beta_r;
    return norm * std::exp(-std::pow(std::abs(x) / beta, fit.nu));
}

inline constexpr std::size_t kGoodnessBins = 99;

/// 1 - total-variation distance between the empirical 99-bin histogram on [-4 sigma, 4 sigma]
/// and the fitted GGD bin masses. Mass outside the range is compared as one extra bin.
inline double ggd_goodness(std::span<const double> samples, const GgdFit& fit) {
    if (!(fit.alpha > 0.0) || !(fit.sigma > 0.0))
        throw Error(ErrorKind::InvalidArgument, "ggd_goodness needs a valid fit");
    if (samples.empty()) throw Error(ErrorKind::DegenerateSample, "no samples");
    const double lo = -4.0 * fit.sigma;
    const double width = 8.0 * fit.sigma / static_cast<double>(kGoodnessBins);
    std::array<std::size_t, kGoodnessBins> counts{};
    std::size_t outside = 0;
    for (double v : samples) {
        const double pos = (v - lo) / width;
        if (!(pos >= 0.0) || pos >= static_cast<double>(kGoodnessBins)) {
            ++outside;
            continue;
        }
        ++counts[static_cast<std::size_t>(pos)];
    }
    const auto n = static_cast<double>(samples.size());
    double l1 = 0.0;
    double inside_model = 0.0;
    double prev_cdf = ggd_cdf(lo, fit);
    for (std::size_t b = 0; b < kGoodnessBins; ++b) {
        const double edge = lo + static_cast<double>(b + 1) * width;
        const double cdf = ggd_cdf(edge, fit);
        const double model = cdf - prev_cdf;
        prev_cdf = cdf;
        inside_model += model;
        l1 += std::abs(static_cast<double>(counts[b]) / n - model);
    }
    l1 += std::abs(static_cast<double>(outside) / n - (1.0 - inside_model));
    return std::clamp(1.0 - 0.5 * l1, 0.0, 1.0);
}

}  // namespace friquee::stats
