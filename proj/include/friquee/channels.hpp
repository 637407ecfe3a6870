#pragma once

#include "friquee/color.hpp"
#include "friquee/feature_maps.hpp"

namespace friquee::color {

struct LmsHat {
    Plane l_hat, m_hat, s_hat;
};

/// Divisively normalized log-cone planes.
inline LmsHat to_lms_hat(const LogLms& log_lms) {
    return {maps::normalize(log_lms.l).nlc, maps::normalize(log_lms.m).nlc, maps::normalize(log_lms.s).nlc};
}

inline LmsHat to_lms_hat(const RgbImage& img) { return to_lms_hat(to_log_lms(img)); }

/// Every channel map the feature extractors consume, all at source resolution.
struct ChannelSet {
    Plane luma;
    Plane chroma;
    Plane m_hat_source;  ///< log M before normalization
    Plane s_hat_source;  ///< log S before normalization
    Plane rg;
    Plane by;
    Plane hue;
    Mask hue_valid;
    Plane saturation;
    Plane yellow;
};

inline ChannelSet make_channels(const RgbImage& img) {
    LogLms log_lms = to_log_lms(img);
    const LmsHat hat = to_lms_hat(log_lms);
    Opponents opp = opponents(hat.l_hat, hat.m_hat, hat.s_hat);
    Hsi hsi = to_hsi(img);
    return {to_luma(img),       to_chroma(img),          std::move(log_lms.m), std::move(log_lms.s),
            std::move(opp.rg),  std::move(opp.by),       std::move(hsi.hue),   std::move(hsi.hue_valid),
            std::move(hsi.saturation), yellow_map(img)};
}

}  // namespace friquee::color
