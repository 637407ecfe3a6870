#pragma once

// Spatial NSS machinery shared by every channel: divisive normalization, sigma fields,
// neighbouring paired products, difference-of-Gaussians chains, the first Laplacian and
// dyadic downscaling. All borders use half-sample mirror reflection (... b a | a b ...).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "friquee/error.hpp"
#include "friquee/plane.hpp"

namespace friquee::maps {

inline constexpr int kNormRadius = 3;
inline constexpr double kNormStd = 7.0 / 6.0;
inline constexpr double kDogSigma1 = 1.16;
inline constexpr double kDogSigma2 = 1.5 * kDogSigma1;
inline constexpr int kLowpassRadius = 2;
inline constexpr double kLowpassStd = 1.0;

/// Half-sample symmetric reflection of an index into [0, n).
inline std::size_t mirror_index(long i, std::size_t n) noexcept {
    const long period = 2 * static_cast<long>(n);
    long m = i % period;
    if (m < 0) m += period;
    if (m >= static_cast<long>(n)) m = period - 1 - m;
    return static_cast<std::size_t>(m);
}

/// Sampled Gaussian exp(-x^2 / 2 s^2) on [-radius, radius], scaled to unit sum.
inline std::vector<double> gaussian_kernel(int radius, double std_dev) {
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int x = -radius; x <= radius; ++x) {
        const double v = std::exp(-static_cast<double>(x * x) / (2.0 * std_dev * std_dev));
        k[static_cast<std::size_t>(x + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

inline void require_size(const Plane& p, std::size_t min_h, std::size_t min_w, const char* what) {
    if (p.height() < min_h || p.width() < min_w)
        throw Error(ErrorKind::TooSmall, std::string(what) + ": plane " + std::to_string(p.height()) + "x" +
                                             std::to_string(p.width()) + " is below " + std::to_string(min_h) +
                                             "x" + std::to_string(min_w));
}

/// Separable correlation with a symmetric odd-length kernel: rows first, then columns.
inline Plane convolve_separable(const Plane& in, const std::vector<double>& kernel) {
    const long radius = static_cast<long>(kernel.size() / 2);
    const std::size_t h = in.height(), w = in.width(), taps = kernel.size();
    Plane tmp(h, w), out(h, w);
    // Each line is copied once into a mirror-padded buffer so the tap loop needs no index folding.
    std::vector<double> line(std::max(h, w) + 2 * static_cast<std::size_t>(radius));
    for (std::size_t r = 0; r < h; ++r) {
        for (long i = -radius; i < static_cast<long>(w) + radius; ++i)
            line[static_cast<std::size_t>(i + radius)] = in(r, mirror_index(i, w));
        for (std::size_t c = 0; c < w; ++c) {
            const double* src = &line[c];
            double acc = 0.0;
            for (std::size_t k = 0; k < taps; ++k) acc += kernel[k] * src[k];
            tmp(r, c) = acc;
        }
    }
    std::vector<const double*> rows(h + 2 * static_cast<std::size_t>(radius));
    for (long i = -radius; i < static_cast<long>(h) + radius; ++i)
        rows[static_cast<std::size_t>(i + radius)] = &tmp(mirror_index(i, h), 0);
    std::vector<double> acc(w);
    for (std::size_t r = 0; r < h; ++r) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t k = 0; k < taps; ++k) {
            const double* src = rows[r + k];
            const double kv = kernel[k];
            for (std::size_t c = 0; c < w; ++c) acc[c] += kv * src[c];
        }
        for (std::size_t c = 0; c < w; ++c) out(r, c) = acc[c];
    }
    return out;
}

/// Dense 2-D correlation with a (2R+1)x(2R+1) kernel stored row-major.
inline Plane convolve_2d(const Plane& in, const std::vector<double>& kernel, int radius) {
    const std::size_t h = in.height(), w = in.width();
    const auto side = static_cast<std::size_t>(2 * radius + 1);
    Plane out(h, w);
    std::vector<std::size_t> cols(w * side);
    for (std::size_t c = 0; c < w; ++c)
        for (int k = -radius; k <= radius; ++k)
            cols[c * side + static_cast<std::size_t>(k + radius)] = mirror_index(static_cast<long>(c) + k, w);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int dy = -radius; dy <= radius; ++dy) {
                const std::size_t rr = mirror_index(static_cast<long>(r) + dy, h);
                const double* krow = &kernel[static_cast<std::size_t>(dy + radius) * side];
                const std::size_t* crow = &cols[c * side];
                for (std::size_t k = 0; k < side; ++k) acc += krow[k] * in(rr, crow[k]);
            }
            out(r, c) = acc;
        }
    }
    return out;
}

/// Locally normalized coefficients with the local means and deviations that produced them.
struct NormalizedField {
    Plane nlc;
    Plane mu;
    Plane sigma;
};

/// Divisive normalization with a 7x7 unit-sum Gaussian window (std 7/6):
///   mu    = w * L
///   sigma = sqrt(w * (L - mu)^2)
///   nlc   = (L - mu) / (sigma + 1)
/// The plane is first offset by its top-left sample so constant inputs produce exact zeros.
inline NormalizedField normalize(const Plane& map) {
    constexpr auto side = static_cast<std::size_t>(2 * kNormRadius + 1);
    require_size(map, side, side, "normalize");
    static const std::vector<double> window = gaussian_kernel(kNormRadius, kNormStd);
    const double ref = map(0, 0);
    const Plane shifted = map_plane(map, [ref](double v) { return v - ref; });
    const Plane mu = convolve_separable(shifted, window);
    const Plane resid_sq = zip_planes(shifted, mu, [](double x, double m) { return (x - m) * (x - m); });
    Plane sigma = convolve_separable(resid_sq, window);
    for (double& v : sigma.values()) v = std::sqrt(std::max(v, 0.0));

    NormalizedField out{Plane(map.height(), map.width()), Plane(map.height(), map.width()), std::move(sigma)};
    const auto x = shifted.values();
    const auto m = mu.values();
    const std::span<const double> s = out.sigma.values();
    auto nlc = out.nlc.values();
    auto mu_out = out.mu.values();
    for (std::size_t i = 0; i < x.size(); ++i) {
        nlc[i] = (x[i] - m[i]) / (s[i] + 1.0);
        mu_out[i] = m[i] + ref;
    }
    return out;
}

struct PairedProducts {
    Plane horizontal;  ///< x(i,j) x(i,j+1)
    Plane vertical;  ///< x(i,j) x(i+1,j)
    Plane main_diagonal;  ///< x(i,j) x(i+1,j+1)
    Plane anti_diagonal;  ///< x(i,j) x(i+1,j-1), j >= 1
};

inline PairedProducts paired_products(const Plane& nlc) {
    require_size(nlc, 2, 2, "paired_products");
    const std::size_t h = nlc.height(), w = nlc.width();
    PairedProducts out{Plane(h, w - 1), Plane(h - 1, w), Plane(h - 1, w - 1), Plane(h - 1, w - 1)};
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c + 1 < w; ++c) out.horizontal(r, c) = nlc(r, c) * nlc(r, c + 1);
    for (std::size_t r = 0; r + 1 < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) out.vertical(r, c) = nlc(r, c) * nlc(r + 1, c);
        for (std::size_t c = 0; c + 1 < w; ++c) {
            out.main_diagonal(r, c) = nlc(r, c) * nlc(r + 1, c + 1);
            out.anti_diagonal(r, c) = nlc(r, c + 1) * nlc(r + 1, c);
        }
    }
    return out;
}

inline int dog_radius() { return static_cast<int>(std::ceil(3.0 * kDogSigma2)); }

/// (1/sqrt(2 pi)) (exp(-r^2 / 2 s1^2) / s1 - exp(-r^2 / 2 s2^2) / s2), row-major, unnormalized.
inline std::vector<double> dog_kernel() {
    const int radius = dog_radius();
    const auto side = static_cast<std::size_t>(2 * radius + 1);
    std::vector<double> k(side * side);
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (int y = -radius; y <= radius; ++y) {
        for (int x = -radius; x <= radius; ++x) {
            const double r2 = static_cast<double>(x * x + y * y);
            k[static_cast<std::size_t>(y + radius) * side + static_cast<std::size_t>(x + radius)] =
                norm * (std::exp(-r2 / (2.0 * kDogSigma1 * kDogSigma1)) / kDogSigma1 -
                        std::exp(-r2 / (2.0 * kDogSigma2 * kDogSigma2)) / kDogSigma2);
        }
    }
    return k;
}

/// Correlation with dog_kernel(), computed as the difference of two separable Gaussian passes.
inline Plane dog_filter(const Plane& map) {
    const int radius = dog_radius();
    const auto side = static_cast<std::size_t>(2 * radius + 1);
    require_size(map, side, side, "dog_filter");
    auto profile = [radius](double s) {
        std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
        for (int x = -radius; x <= radius; ++x)
            k[static_cast<std::size_t>(x + radius)] = std::exp(-static_cast<double>(x * x) / (2.0 * s * s));
        return k;
    };
    static const std::vector<double> g1 = profile(kDogSigma1), g2 = profile(kDogSigma2);
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    const Plane a = convolve_separable(map, g1), b = convolve_separable(map, g2);
    Plane out(map.height(), map.width());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.values()[i] = norm * (a.values()[i] / kDogSigma1 - b.values()[i] / kDogSigma2);
    return out;
}

struct DogSigmaChain {
    Plane dog_sigma;  ///< normalized coefficients of DoG(sigma field)
    Plane dog_sigma_prime;  ///< normalized coefficients of the sigma field of dog_sigma
};

inline DogSigmaChain dog_sigma_chain(const Plane& sigma_field) {
    NormalizedField first = normalize(dog_filter(sigma_field));
    const NormalizedField of_first = normalize(first.nlc);
    NormalizedField second = normalize(of_first.sigma);
    return {std::move(first.nlc), std::move(second.nlc)};
}

inline Plane lowpass(const Plane& map) {
    static const std::vector<double> kernel = gaussian_kernel(kLowpassRadius, kLowpassStd);
    return convolve_separable(map, kernel);
}

inline Plane decimate2(const Plane& map) {
    const std::size_t h = (map.height() + 1) / 2, w = (map.width() + 1) / 2;
    Plane out(h, w);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) out(r, c) = map(2 * r, 2 * c);
    return out;
}

/// Decimated difference between a map and its 5x5 Gaussian low-pass.
inline Plane laplacian(const Plane& map) {
    constexpr auto min_side = static_cast<std::size_t>(2 * (2 * kLowpassRadius + 1));
    require_size(map, min_side, min_side, "laplacian");
    const Plane low = lowpass(map);
    return decimate2(zip_planes(map, low, [](double a, double b) { return a - b; }));
}

inline Plane downsample2(const Plane& map) {
    require_size(map, 4, 4, "downsample2");
    return decimate2(lowpass(map));
}

}  // namespace friquee::maps
