#pragma once

// Complex steerable pyramid (3 scales x 6 orientations) built in the frequency domain with
// polar-separable filters, and the fixed 82-slot statistical block computed from it.
//
// Radial windows are raised cosines on a log2 frequency axis (Nyquist = 1):
//   high(r) = cos(pi/2 * -log2 r) on (1/2, 1), 0 below, 1 above;  low = sqrt(1 - high^2).
// Orientation k of K = 6 uses the one-sided angular window 2 a_K cos^5(theta - pi k / K) for
// cos(theta - pi k / K) > 0, so each subband is analytic and its real part is the ordinary
// real steerable band with window a_K |cos|^5. Every scale after the first is obtained by
// cropping the band-limited low-pass spectrum to half size.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "friquee/error.hpp"
#include "friquee/feature_maps.hpp"
#include "friquee/plane.hpp"
#include "friquee/stat_models.hpp"

namespace friquee::steerable {

using Complex = std::complex<double>;
using ComplexPlane = BasicPlane<Complex>;

inline constexpr std::size_t kScales = 3;
inline constexpr std::size_t kOrientations = 6;
inline constexpr std::size_t kMinSide = 64;
inline constexpr std::size_t kBlockSize = 82;

struct ComplexPyramid {
    /// bands[scale][orientation]; scale s has ceil(size / 2^s) rows and columns.
    std::array<std::array<ComplexPlane, kOrientations>, kScales> bands;
    Plane highpass;
    Plane lowpass;
    std::size_t height = 0;
    std::size_t width = 0;

    /// Original-resolution pixels represented by one coefficient of scale `s`.
    [[nodiscard]] double pixel_weight(std::size_t s) const {
        const auto& b = bands[s][0];
        return static_cast<double>(height * width) / static_cast<double>(b.height() * b.width());
    }
    /// Energy of the real steerable band (real part of the analytic band), in input units.
    [[nodiscard]] double band_energy(std::size_t s, std::size_t o) const {
        double e = 0.0;
        for (const Complex& c : bands[s][o].values()) e += c.real() * c.real();
        return e * pixel_weight(s);
    }
    [[nodiscard]] double highpass_energy() const {
        double e = 0.0;
        for (double v : highpass.values()) e += v * v;
        return e;
    }
    [[nodiscard]] double lowpass_energy() const {
        double e = 0.0;
        for (double v : lowpass.values()) e += v * v;
        return e * static_cast<double>(height * width) / static_cast<double>(lowpass.size());
    }
    [[nodiscard]] double total_energy() const {
        double e = highpass_energy() + lowpass_energy();
        for (std::size_t s = 0; s < kScales; ++s)
            for (std::size_t o = 0; o < kOrientations; ++o) e += band_energy(s, o);
        return e;
    }
};

namespace detail {

inline void fft2(ComplexPlane& p, bool inverse) {
    Eigen::FFT<double> fft;
    const std::size_t h = p.height(), w = p.width();
    std::vector<Complex> src, dst;
    src.resize(w);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) src[c] = p(r, c);
        if (inverse)
            fft.inv(dst, src);
        else
            fft.fwd(dst, src);
        for (std::size_t c = 0; c < w; ++c) p(r, c) = dst[c];
    }
    src.resize(h);
    for (std::size_t c = 0; c < w; ++c) {
        for (std::size_t r = 0; r < h; ++r) src[r] = p(r, c);
        if (inverse)
            fft.inv(dst, src);
        else
            fft.fwd(dst, src);
        for (std::size_t r = 0; r < h; ++r) p(r, c) = dst[r];
    }
}

inline long signed_frequency(std::size_t k, std::size_t n) {
    return k < (n + 1) / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

inline double high_window(double r) {
    if (r <= 0.0) return 0.0;
    const double lr = std::log2(r);
    if (lr <= -1.0) return 0.0;
    if (lr >= 0.0) return 1.0;
    return std::cos(0.5 * std::numbers::pi * -lr);
}

inline double low_window(double r) {
    if (r <= 0.0) return 1.0;
    const double lr = std::log2(r);
    if (lr <= -1.0) return 1.0;
    if (lr >= 0.0) return 0.0;
    return std::sin(0.5 * std::numbers::pi * -lr);
}

inline double angular_constant() {
    // a_K = 2^(K-1) (K-1)! / sqrt(K (2(K-1))!)
    constexpr double k = static_cast<double>(kOrientations);
    return std::pow(2.0, k - 1.0) * std::tgamma(k) / std::sqrt(k * std::tgamma(2.0 * (k - 1.0) + 1.0));
}

struct Polar {
    double radius;  // Nyquist = 1
    double angle;
};

inline Polar polar(std::size_t r, std::size_t c, std::size_t h, std::size_t w) {
    const double uy = static_cast<double>(signed_frequency(r, h)) / static_cast<double>(h);
    const double ux = static_cast<double>(signed_frequency(c, w)) / static_cast<double>(w);
    return {2.0 * std::hypot(ux, uy), std::atan2(uy, ux)};
}

inline ComplexPlane crop_half(const ComplexPlane& spec) {
    const std::size_t h = spec.height(), w = spec.width();
    const std::size_t nh = (h + 1) / 2, nw = (w + 1) / 2;
    ComplexPlane out(nh, nw);
    for (std::size_t r = 0; r < nh; ++r) {
        const long fy = signed_frequency(r, nh);
        const std::size_t sr = static_cast<std::size_t>(fy >= 0 ? fy : fy + static_cast<long>(h));
        for (std::size_t c = 0; c < nw; ++c) {
            const long fx = signed_frequency(c, nw);
            const std::size_t sc = static_cast<std::size_t>(fx >= 0 ? fx : fx + static_cast<long>(w));
            out(r, c) = spec(sr, sc);
        }
    }
    return out;
}

inline Plane real_part(const ComplexPlane& p, double scale) {
    Plane out(p.height(), p.width());
    for (std::size_t i = 0; i < p.size(); ++i) out.values()[i] = p.values()[i].real() * scale;
    return out;
}

}  // namespace detail

/// Builds the pyramid of a mean-removed plane. Constant inputs yield all-zero coefficients.
inline ComplexPyramid build_pyramid(const Plane& map) {
    maps::require_size(map, kMinSide, kMinSide, "build_pyramid");
    const std::size_t h = map.height(), w = map.width();
    const double full = static_cast<double>(h * w);

    ComplexPyramid pyr;
    pyr.height = h;
    pyr.width = w;

    const auto [lo_it, hi_it] = std::minmax_element(map.values().begin(), map.values().end());
    if (*lo_it == *hi_it) {
        std::size_t sh = h, sw = w;
        for (std::size_t s = 0; s < kScales; ++s) {
            for (auto& band : pyr.bands[s]) band = ComplexPlane(sh, sw);
            sh = (sh + 1) / 2;
            sw = (sw + 1) / 2;
        }
        pyr.highpass = Plane(h, w);
        pyr.lowpass = Plane(sh, sw);
        return pyr;
    }

    ComplexPlane spec(h, w);
    for (std::size_t i = 0; i < map.size(); ++i) spec.values()[i] = Complex(map.values()[i], 0.0);
    detail::fft2(spec, false);
    spec(0, 0) = 0.0;

    ComplexPlane hi(h, w);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            const double rad = detail::polar(r, c, h, w).radius;
            hi(r, c) = spec(r, c) * detail::high_window(rad);
            spec(r, c) *= detail::low_window(rad);
        }
    }
    detail::fft2(hi, true);
    pyr.highpass = detail::real_part(hi, 1.0);

    const double amp = 2.0 * detail::angular_constant();
    constexpr double pi = std::numbers::pi;
    for (std::size_t s = 0; s < kScales; ++s) {
        const std::size_t sh = spec.height(), sw = spec.width();
        const double coef_scale = static_cast<double>(sh * sw) / full;
        for (std::size_t o = 0; o < kOrientations; ++o) {
            const double theta_o = pi * static_cast<double>(o) / static_cast<double>(kOrientations);
            ComplexPlane band(sh, sw);
            for (std::size_t r = 0; r < sh; ++r) {
                for (std::size_t c = 0; c < sw; ++c) {
                    const auto p = detail::polar(r, c, sh, sw);
                    const double radial = detail::high_window(2.0 * p.radius);
                    if (radial == 0.0) continue;
                    const double cs = std::cos(p.angle - theta_o);
                    if (cs <= 0.0) continue;
                    const double cs2 = cs * cs;
                    band(r, c) = spec(r, c) * (radial * amp * cs2 * cs2 * cs);
                }
            }
            detail::fft2(band, true);
            for (Complex& v : band.values()) v *= coef_scale;
            pyr.bands[s][o] = std::move(band);
        }
        for (std::size_t r = 0; r < sh; ++r)
            for (std::size_t c = 0; c < sw; ++c)
                spec(r, c) *= detail::low_window(2.0 * detail::polar(r, c, sh, sw).radius);
        spec = detail::crop_half(spec);
    }
    const double lo_scale = static_cast<double>(spec.size()) / full;
    detail::fft2(spec, true);
    pyr.lowpass = detail::real_part(spec, lo_scale);
    return pyr;
}

/// Fixed-layout block of 82 statistics. Slots rejected by an estimator hold 0 and are listed
/// in `degenerate_slots`.
struct SteerableBlock {
    std::array<double, kBlockSize> values{};
    std::vector<std::size_t> degenerate_slots;
};

/// Slot names, in block order:
///   [0, 36)   s{s}.o{o}.mag_alpha / mag_sigma: GGD fit of normalized subband magnitudes
///   [36, 54)  s{s}.o{o}.phase_conc: wrapped-Cauchy concentration of horizontal relative phase
///   [54, 72)  s{s}.o{o}.log_energy: log mean squared magnitude
///   [72, 75)  s{s}.orient_entropy: entropy of the across-orientation energy distribution
///   [75, 78)  s{s}.orient_corr: mean pairwise correlation of magnitudes across orientations
///   78        highpass_frac: high-pass residual share of total energy
///   [79, 81)  s{s}s{s+1}.parent_phase_conc: child/parent phase-difference concentration
///   81        lowpass_frac: low-pass residual share of total energy
inline const std::array<std::string, kBlockSize>& block_slot_names() {
    static const std::array<std::string, kBlockSize> names = [] {
        std::array<std::string, kBlockSize> n;
        std::size_t i = 0;
        auto band = [](std::size_t s, std::size_t o) {
            return "s" + std::to_string(s) + ".o" + std::to_string(o) + ".";
        };
        for (std::size_t s = 0; s < kScales; ++s)
            for (std::size_t o = 0; o < kOrientations; ++o) {
                n[i++] = band(s, o) + "mag_alpha";
                n[i++] = band(s, o) + "mag_sigma";
            }
        for (std::size_t s = 0; s < kScales; ++s)
            for (std::size_t o = 0; o < kOrientations; ++o) n[i++] = band(s, o) + "phase_conc";
        for (std::size_t s = 0; s < kScales; ++s)
            for (std::size_t o = 0; o < kOrientations; ++o) n[i++] = band(s, o) + "log_energy";
        for (std::size_t s = 0; s < kScales; ++s) n[i++] = "s" + std::to_string(s) + ".orient_entropy";
        for (std::size_t s = 0; s < kScales; ++s) n[i++] = "s" + std::to_string(s) + ".orient_corr";
        n[i++] = "highpass_frac";
        for (std::size_t s = 0; s + 1 < kScales; ++s)
            n[i++] = "s" + std::to_string(s) + "s" + std::to_string(s + 1) + ".parent_phase_conc";
        n[i++] = "lowpass_frac";
        return n;
    }();
    return names;
}

namespace detail {

inline Plane magnitudes(const ComplexPlane& band) {
    Plane out(band.height(), band.width());
    for (std::size_t i = 0; i < band.size(); ++i) out.values()[i] = std::abs(band.values()[i]);
    return out;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return std::nan("");
    return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

inline SteerableBlock block_from_pyramid(const ComplexPyramid& pyr) {
    SteerableBlock out;
    auto degenerate = [&out](std::size_t slot) {
        out.values[slot] = 0.0;
        out.degenerate_slots.push_back(slot);
    };

    std::array<std::array<double, kOrientations>, kScales> mean_energy{};
    std::array<std::array<Plane, kOrientations>, kScales> mags;
    for (std::size_t s = 0; s < kScales; ++s) {
        for (std::size_t o = 0; o < kOrientations; ++o) {
            const ComplexPlane& band = pyr.bands[s][o];
            mags[s][o] = detail::magnitudes(band);
            double e = 0.0;
            for (double m : mags[s][o].values()) e += m * m;
            mean_energy[s][o] = e / static_cast<double>(band.size());

            const std::size_t b = s * kOrientations + o;
            const std::size_t alpha_slot = 2 * b, sigma_slot = 2 * b + 1;
            const std::size_t phase_slot = 36 + b, energy_slot = 54 + b;
            if (!(mean_energy[s][o] > 0.0)) {
                degenerate(alpha_slot);
                degenerate(sigma_slot);
                degenerate(phase_slot);
                degenerate(energy_slot);
                continue;
            }
            try {
                const auto nlc = maps::normalize(mags[s][o]).nlc;
                const auto fit = stats::fit_ggd(nlc.values());
                out.values[alpha_slot] = fit.alpha;
                out.values[sigma_slot] = fit.sigma;
            } catch (const Error&) {
                degenerate(alpha_slot);
                degenerate(sigma_slot);
            }
            std::vector<double> phase;
            phase.reserve(band.size());
            for (std::size_t r = 0; r < band.height(); ++r)
                for (std::size_t c = 0; c + 1 < band.width(); ++c) {
                    const Complex z = band(r, c + 1) * std::conj(band(r, c));
                    if (z != Complex(0.0, 0.0)) phase.push_back(std::arg(z));
                }
            if (phase.empty())
                degenerate(phase_slot);
            else
                out.values[phase_slot] = stats::fit_wrapped_cauchy(phase).concentration;
            out.values[energy_slot] = std::log(mean_energy[s][o]);
        }
    }

    for (std::size_t s = 0; s < kScales; ++s) {
        double total = 0.0;
        for (double e : mean_energy[s]) total += e;
        if (!(total > 0.0)) {
            degenerate(72 + s);
        } else {
            double entropy = 0.0;
            for (double e : mean_energy[s]) {
                const double p = e / total;
                if (p > 0.0) entropy -= p * std::log(p);
            }
            out.values[72 + s] = entropy;
        }
        double corr_sum = 0.0;
        std::size_t pairs = 0;
        for (std::size_t a = 0; a < kOrientations; ++a)
            for (std::size_t b = a + 1; b < kOrientations; ++b) {
                const double rho = detail::pearson(mags[s][a].values(), mags[s][b].values());
                if (std::isfinite(rho)) {
                    corr_sum += rho;
                    ++pairs;
                }
            }
        if (pairs == 0)
            degenerate(75 + s);
        else
            out.values[75 + s] = corr_sum / static_cast<double>(pairs);
    }

    const double total = pyr.total_energy();
    if (!(total > 0.0)) {
        degenerate(78);
        degenerate(81);
    } else {
        out.values[78] = pyr.highpass_energy() / total;
        out.values[81] = pyr.lowpass_energy() / total;
    }

    for (std::size_t s = 0; s + 1 < kScales; ++s) {
        double conc_sum = 0.0;
        std::size_t used = 0;
        for (std::size_t o = 0; o < kOrientations; ++o) {
            const ComplexPlane& child = pyr.bands[s][o];
            const ComplexPlane& parent = pyr.bands[s + 1][o];
            std::vector<double> diff;
            diff.reserve(child.size());
            for (std::size_t r = 0; r < child.height(); ++r)
                for (std::size_t c = 0; c < child.width(); ++c) {
                    const Complex z = child(r, c) * std::conj(parent(r / 2, c / 2));
                    if (z != Complex(0.0, 0.0)) diff.push_back(std::arg(z));
                }
            if (diff.empty()) continue;
            conc_sum += stats::fit_wrapped_cauchy(diff).concentration;
            ++used;
        }
        if (used == 0)
            degenerate(79 + s);
        else
            out.values[79 + s] = conc_sum / static_cast<double>(used);
    }
    std::sort(out.degenerate_slots.begin(), out.degenerate_slots.end());
    return out;
}

inline SteerableBlock steerable_features(const Plane& map) { return block_from_pyramid(build_pyramid(map)); }

}  // namespace friquee::steerable
