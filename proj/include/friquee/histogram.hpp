#pragma once

// Histogram data for the coefficient maps, with the fitted parametric density alongside.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "friquee/channels.hpp"
#include "friquee/color.hpp"
#include "friquee/error.hpp"
#include "friquee/feature_maps.hpp"
#include "friquee/stat_models.hpp"

namespace friquee::hist {

inline constexpr std::string_view kMapNames[] = {"nlc", "dog_sigma", "dog_sigma_prime", "chroma", "chroma_sigma",
                                                 "rg",  "by",        "yellow",          "yellow_sigma"};

struct MapSamples {
    std::vector<double> values;
    bool asymmetric = false;  ///< fitted with an AGGD rather than a GGD
};

inline MapSamples sample_map(const RgbImage& img, std::string_view name) {
    auto copy = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
    auto nlc_of = [&copy](const Plane& p) { return copy(maps::normalize(p).nlc.values()); };
    if (name == "nlc") return {nlc_of(color::to_luma(img)), false};
    if (name == "dog_sigma" || name == "dog_sigma_prime") {
        const auto chain = maps::dog_sigma_chain(maps::normalize(color::to_luma(img)).sigma);
        return {copy((name == "dog_sigma" ? chain.dog_sigma : chain.dog_sigma_prime).values()), false};
    }
    if (name == "chroma") return {nlc_of(color::to_chroma(img)), false};
    if (name == "chroma_sigma") return {nlc_of(maps::normalize(color::to_chroma(img)).sigma), false};
    if (name == "rg" || name == "by") {
        const auto ch = color::make_channels(img);
        return {copy((name == "rg" ? ch.rg : ch.by).values()), true};
    }
    if (name == "yellow") return {nlc_of(color::yellow_map(img)), false};
    if (name == "yellow_sigma") return {nlc_of(maps::normalize(color::yellow_map(img)).sigma), false};
    throw Error(ErrorKind::InvalidArgument, "unknown map '" + std::string(name) + "'");
}

struct Histogram {
    std::vector<double> centers, density, fitted;  ///< fitted is empty when no fit exists
    double width = 0.0;
    std::string fit_description;  ///< e.g. "ggd alpha=2.1 sigma=0.4", or why no fit exists
};

/// Density histogram over [-m, m] with m = max |x| (1 for an all-zero sample).
inline Histogram make_histogram(const MapSamples& s, std::size_t bins = 99) {
    if (bins == 0) throw Error(ErrorKind::InvalidArgument, "histogram needs at least one bin");
    if (s.values.empty()) throw Error(ErrorKind::DegenerateSample, "map has no samples");
    double m = 0.0;
    for (double v : s.values) m = std::max(m, std::abs(v));
    if (!(m > 0.0)) m = 1.0;
    Histogram h;
    h.width = 2.0 * m / static_cast<double>(bins);
    std::vector<std::size_t> counts(bins, 0);
    for (double v : s.values) {
        const auto b = static_cast<std::size_t>(std::clamp((v + m) / h.width, 0.0, static_cast<double>(bins - 1)));
        ++counts[b];
    }
    const double n = static_cast<double>(s.values.size());
    for (std::size_t b = 0; b < bins; ++b) {
        h.centers.push_back(-m + (static_cast<double>(b) + 0.5) * h.width);
        h.density.push_back(static_cast<double>(counts[b]) / (n * h.width));
    }
    char buf[160];
    try {
        if (s.asymmetric) {
            const auto fit = stats::fit_aggd(s.values);
            for (double c : h.centers) h.fitted.push_back(stats::aggd_pdf(c, fit));
            std::snprintf(buf, sizeof buf, "aggd nu=%.6g eta=%.6g sigma_l=%.6g sigma_r=%.6g", fit.nu, fit.eta,
                          fit.sigma_l, fit.sigma_r);
        } else {
            const auto fit = stats::fit_ggd(s.values);
            for (double c : h.centers) h.fitted.push_back(stats::ggd_pdf(c, fit));
            std::snprintf(buf, sizeof buf, "ggd alpha=%.6g sigma=%.6g", fit.alpha, fit.sigma);
        }
        h.fit_description = buf;
    } catch (const Error& e) {
        h.fitted.clear();
        h.fit_description = std::string("no fit (") + std::string(to_string(e.kind())) + ")";
    }
    return h;
}

inline std::string to_csv(const Histogram& h, std::string_view map_name) {
    std::ostringstream out;
    out.precision(17);
    out << "# map=" << map_name << " bins=" << h.centers.size() << " bin_width=" << h.width << '\n';
    out << "# fit: " << h.fit_description << '\n';
    out << "bin_center,empirical_density,fitted_density\n";
    for (std::size_t b = 0; b < h.centers.size(); ++b) {
        out << h.centers[b] << ',' << h.density[b] << ',';
        if (h.fitted.empty()) out << "nan"; else out << h.fitted[b];
        out << '\n';
    }
    return out.str();
}

}  // namespace friquee::hist
