#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>

#include "friquee/error.hpp"
#include "friquee/plane.hpp"

namespace friquee {

/// Decoded RGB image, three equally sized planes with values in [0, 255].
struct RgbImage {
    Plane r, g, b;

    RgbImage() = default;
    RgbImage(std::size_t height, std::size_t width, double fill = 0.0)
        : r(height, width, fill), g(height, width, fill), b(height, width, fill) {}
    RgbImage(Plane red, Plane green, Plane blue) : r(std::move(red)), g(std::move(green)), b(std::move(blue)) {
        if (!r.same_shape(g) || !r.same_shape(b))
            throw Error(ErrorKind::InvalidArgument, "RGB planes differ in size");
    }

    [[nodiscard]] std::size_t height() const noexcept { return r.height(); }
    [[nodiscard]] std::size_t width() const noexcept { return r.width(); }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

inline RgbImage rotate180(const RgbImage& img) {
    return {rotate180(img.r), rotate180(img.g), rotate180(img.b)};
}

namespace color {

/// BT.601 luma.
inline Plane to_luma(const RgbImage& img) {
    Plane out(img.height(), img.width());
    const auto r = img.r.values(), g = img.g.values(), b = img.b.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    return out;
}

namespace detail {

inline double srgb_to_linear(double v255) {
    const double c = v255 / 255.0;
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

inline double lab_f(double t) {
    constexpr double delta = 6.0 / 29.0;
    return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

// sRGB (D65) -> XYZ rows, each divided by its row sum so that the D65 white maps to (1,1,1).
inline constexpr std::array<std::array<double, 3>, 3> kXyzRows = {{
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
}};

// X/Xn written as g + wr (r - g) + wb (b - g) so neutral pixels give X/Xn = Y/Yn = Z/Zn exactly.
inline double white_relative(std::size_t row, double r, double g, double b) {
    const auto& m = kXyzRows[row];
    const double sum = m[0] + m[1] + m[2];
    return g + (m[0] / sum) * (r - g) + (m[2] / sum) * (b - g);
}

}  // namespace detail

struct Lab {
    double l, a, b;
};

/// CIELAB under D65 / 2-degree observer for one sRGB pixel in [0, 255].
inline Lab rgb_to_lab(double r, double g, double b) {
    const double rl = detail::srgb_to_linear(r);
    const double gl = detail::srgb_to_linear(g);
    const double bl = detail::srgb_to_linear(b);
    const double fx = detail::lab_f(detail::white_relative(0, rl, gl, bl));
    const double fy = detail::lab_f(detail::white_relative(1, rl, gl, bl));
    const double fz = detail::lab_f(detail::white_relative(2, rl, gl, bl));
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

/// CIELAB chroma sqrt(a*^2 + b*^2).
inline Plane to_chroma(const RgbImage& img) {
    Plane out(img.height(), img.width());
    const auto r = img.r.values(), g = img.g.values(), b = img.b.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        const Lab lab = rgb_to_lab(r[i], g[i], b[i]);
        o[i] = std::hypot(lab.a, lab.b);
    }
    return out;
}

inline constexpr std::array<std::array<double, 3>, 3> kRgbToLms = {{
    {0.3811, 0.5783, 0.0402},
    {0.1967, 0.7244, 0.0782},
    {0.0241, 0.1288, 0.8444},
}};

inline constexpr double kLogFloor = 1e-4;

struct LogLms {
    Plane l, m, s;  ///< ln(max(LMS, 1e-4)) with RGB scaled to [0, 1]
};

inline LogLms to_log_lms(const RgbImage& img) {
    LogLms out{Plane(img.height(), img.width()), Plane(img.height(), img.width()),
               Plane(img.height(), img.width())};
    const auto r = img.r.values(), g = img.g.values(), b = img.b.values();
    std::array<std::span<double>, 3> dst = {out.l.values(), out.m.values(), out.s.values()};
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double rs = r[i] / 255.0, gs = g[i] / 255.0, bs = b[i] / 255.0;
        for (std::size_t k = 0; k < 3; ++k) {
            const double v = kRgbToLms[k][0] * rs + kRgbToLms[k][1] * gs + kRgbToLms[k][2] * bs;
            dst[k][i] = std::log(std::max(v, kLogFloor));
        }
    }
    return out;
}

struct Opponents {
    Plane by, rg, achromatic;
};

/// Orthonormal opponent projection of the normalized log-cone planes.
inline Opponents opponents(const Plane& l_hat, const Plane& m_hat, const Plane& s_hat) {
    if (!l_hat.same_shape(m_hat) || !l_hat.same_shape(s_hat))
        throw Error(ErrorKind::InvalidArgument, "opponent planes differ in size");
    const double inv3 = 1.0 / std::numbers::sqrt3;
    const double inv6 = 1.0 / std::sqrt(6.0);
    const double inv2 = 1.0 / std::numbers::sqrt2;
    Opponents out{Plane(l_hat.height(), l_hat.width()), Plane(l_hat.height(), l_hat.width()),
                  Plane(l_hat.height(), l_hat.width())};
    const auto l = l_hat.values(), m = m_hat.values(), s = s_hat.values();
    auto by = out.by.values(), rg = out.rg.values(), ach = out.achromatic.values();
    for (std::size_t i = 0; i < l.size(); ++i) {
        ach[i] = (l[i] + m[i] + s[i]) * inv3;
        by[i] = (l[i] + m[i] - 2.0 * s[i]) * inv6;
        rg[i] = (l[i] - m[i]) * inv2;
    }
    return out;
}

/// Rows of the opponent projection (achromatic, BY, RG).
inline std::array<std::array<double, 3>, 3> opponent_matrix() {
    const double a = 1.0 / std::numbers::sqrt3, b = 1.0 / std::sqrt(6.0), c = 1.0 / std::numbers::sqrt2;
    return {{{a, a, a}, {b, b, -2.0 * b}, {c, -c, 0.0}}};
}

struct Hsi {
    Plane hue;  ///< [0, 2 pi); 0 where undefined
    Plane saturation;  ///< [0, 1]
    Mask hue_valid;  ///< 0 for achromatic pixels
};

inline Hsi to_hsi(const RgbImage& img) {
    Hsi out{Plane(img.height(), img.width()), Plane(img.height(), img.width()),
            Mask(img.height(), img.width(), 0)};
    const auto r = img.r.values(), g = img.g.values(), b = img.b.values();
    auto hue = out.hue.values(), sat = out.saturation.values();
    auto valid = out.hue_valid.values();
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double intensity = (r[i] + g[i] + b[i]) / 3.0;
        const double lo = std::min({r[i], g[i], b[i]});
        sat[i] = intensity > 0.0 ? std::clamp(1.0 - lo / intensity, 0.0, 1.0) : 0.0;
        const double rg = r[i] - g[i], rb = r[i] - b[i], gb = g[i] - b[i];
        const double den = std::sqrt(rg * rg + rb * gb);
        if (!(den > 0.0)) continue;
        const double theta = std::acos(std::clamp(0.5 * (rg + rb) / den, -1.0, 1.0));
        double h = b[i] <= g[i] ? theta : two_pi - theta;
        if (h >= two_pi) h = 0.0;
        hue[i] = h;
        valid[i] = 1;
    }
    return out;
}

/// Y = (R + G) / 2 - |R - G| / 2 - B.
inline Plane yellow_map(const RgbImage& img) {
    Plane out(img.height(), img.width());
    const auto r = img.r.values(), g = img.g.values(), b = img.b.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = (r[i] + g[i]) / 2.0 - std::abs(r[i] - g[i]) / 2.0 - b[i];
    return out;
}

}  // namespace color
}  // namespace friquee
