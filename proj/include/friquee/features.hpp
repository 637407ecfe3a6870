#pragma once

// The 564-slot feature vector: layout descriptor (names and provenance of every slot) and the
// extractors that fill it block by block:
//
//   luma (155) | yellow (2) | chroma (163) | lms (240) | hsi (4)
//
// Estimators that reject their sample (constant maps, one-sided AGGD input) leave 0 in the
// affected slots and record the slot index in FeatureVector::degenerate_slots.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "friquee/channels.hpp"
#include "friquee/color.hpp"
#include "friquee/error.hpp"
#include "friquee/feature_maps.hpp"
#include "friquee/plane.hpp"
#include "friquee/stat_models.hpp"
#include "friquee/steerable.hpp"

namespace friquee::features {

inline constexpr std::string_view kLayoutVersion = "friquee-564-v1";
inline constexpr std::size_t kFeatureCount = 564;
inline constexpr std::size_t kMinImageSide = 128;

enum class GroupKind {
    Ggd,  ///< alpha, sigma2, kurtosis, skewness of a symmetric map
    AggdFull,  ///< nu, eta, sigma_l2, sigma_r2, kurtosis, skewness
    AggdShort,  ///< nu, sigma_l2, sigma_r2, kurtosis, skewness
    SigmaStats,  ///< mean, kurtosis, skewness of a raw sigma field
    DogSigma,  ///< alpha, std, skewness, kurtosis
    DogSigmaPrime,  ///< kurtosis, skewness
    Steerable,  ///< 82-slot pyramid block
    Goodness,  ///< GGD goodness of fit
    MeanStd,  ///< arithmetic mean, standard deviation
};

struct GroupStat {
    std::string_view statistic;
    std::string_view model;
};

inline std::vector<GroupStat> group_statistics(GroupKind kind) {
    switch (kind) {
        case GroupKind::Ggd:
            return {{"alpha", "ggd"}, {"sigma2", "ggd"}, {"kurtosis", "sample"}, {"skewness", "sample"}};
        case GroupKind::AggdFull:
            return {{"nu", "aggd"},       {"eta", "aggd"},          {"sigma_l2", "aggd"},
                    {"sigma_r2", "aggd"}, {"kurtosis", "sample"}, {"skewness", "sample"}};
        case GroupKind::AggdShort:
            return {{"nu", "aggd"}, {"sigma_l2", "aggd"}, {"sigma_r2", "aggd"}, {"kurtosis", "sample"},
                    {"skewness", "sample"}};
        case GroupKind::SigmaStats:
            return {{"mean", "sample"}, {"kurtosis", "sample"}, {"skewness", "sample"}};
        case GroupKind::DogSigma:
            return {{"alpha", "ggd"}, {"std", "ggd"}, {"skewness", "sample"}, {"kurtosis", "sample"}};
        case GroupKind::DogSigmaPrime:
            return {{"kurtosis", "sample"}, {"skewness", "sample"}};
        case GroupKind::Steerable: {
            std::vector<GroupStat> out;
            for (const auto& n : steerable::block_slot_names()) {
                std::string_view model = "energy";
                if (n.find("mag_") != std::string::npos) model = "ggd";
                if (n.find("phase") != std::string::npos) model = "wrapped_cauchy";
                if (n.find("corr") != std::string::npos) model = "sample";
                out.push_back({n, model});
            }
            return out;
        }
        case GroupKind::Goodness:
            return {{"goodness", "ggd"}};
        case GroupKind::MeanStd:
            return {{"mean", "sample"}, {"std", "sample"}};
    }
    return {};
}

struct SlotInfo {
    std::string name;
    std::string block;
    std::string map;
    std::string model;
    std::string statistic;
    int scale = -1;  ///< -1 when the statistic is not tied to one image scale
    std::string color_space;
};

struct GroupSpec {
    GroupKind kind;
    std::string prefix;  ///< slot names are prefix + "." + statistic
    std::string map;
    int scale;
    std::string color_space;
};

struct BlockInfo {
    std::string name;
    std::size_t size;
    std::size_t first_slot;
    std::size_t first_group;
};

struct LayoutDescriptor {
    std::string version;
    std::vector<BlockInfo> blocks;
    std::vector<GroupSpec> groups;
    std::vector<SlotInfo> slots;

    [[nodiscard]] std::size_t index_of(std::string_view name) const {
        for (std::size_t i = 0; i < slots.size(); ++i)
            if (slots[i].name == name) return i;
        throw Error(ErrorKind::InvalidArgument, "unknown feature slot " + std::string(name));
    }
};

namespace detail {

inline std::string scale_tag(int s) { return "scale" + std::to_string(s); }

// NLC GGD at two scales, the sigma-field groups, DoG chain, Laplacian, steerable block.
inline void spatial_groups(std::vector<GroupSpec>& g, const std::string& ch, const std::string& space,
                           bool paired_products, bool sigma_ggd) {
    for (int s = 0; s < 2; ++s) g.push_back({GroupKind::Ggd, ch + ".nlc." + scale_tag(s), ch + ".nlc", s, space});
    if (paired_products) {
        for (int s = 0; s < 2; ++s)
            for (const char* pp : {"pp_h", "pp_v", "pp_d", "pp_a"})
                g.push_back({GroupKind::AggdFull, ch + "." + pp + "." + scale_tag(s), ch + "." + pp, s, space});
    }
    if (sigma_ggd) {
        for (int s = 0; s < 2; ++s)
            g.push_back({GroupKind::Ggd, ch + ".sigma_nlc." + scale_tag(s), ch + ".sigma_nlc", s, space});
    }
    for (int s = 0; s < 2; ++s)
        g.push_back({GroupKind::SigmaStats, ch + ".sigma." + scale_tag(s), ch + ".sigma", s, space});
    g.push_back({GroupKind::DogSigma, ch + ".dog_sigma", ch + ".dog_sigma", 0, space});
    g.push_back({GroupKind::DogSigmaPrime, ch + ".dog_sigma_prime", ch + ".dog_sigma_prime", 0, space});
    g.push_back({GroupKind::AggdShort, ch + ".laplacian", ch + ".laplacian", 0, space});
    g.push_back({GroupKind::Steerable, ch + ".steer", ch + ".steer", -1, space});
}

inline LayoutDescriptor build_layout() {
    LayoutDescriptor d;
    d.version = std::string(kLayoutVersion);
    auto block = [&d](const std::string& name, const std::vector<GroupSpec>& groups) {
        const std::size_t first_slot = d.slots.size(), first_group = d.groups.size();
        std::size_t size = 0;
        for (const GroupSpec& gs : groups) {
            for (const GroupStat& st : group_statistics(gs.kind)) {
                int scale = gs.scale;
                const std::string stat(st.statistic);
                if (gs.kind == GroupKind::Steerable && stat.size() > 1 && stat[0] == 's' &&
                    stat[1] >= '0' && stat[1] <= '9')
                    scale = stat[1] - '0';
                d.slots.push_back({gs.prefix + "." + stat, name, gs.map, std::string(st.model), stat, scale,
                                   gs.color_space});
                ++size;
            }
            d.groups.push_back(gs);
        }
        d.blocks.push_back({name, size, first_slot, first_group});
    };

    std::vector<GroupSpec> g;
    spatial_groups(g, "luma", "luminance", true, false);
    block("luma", g);

    g.clear();
    g.push_back({GroupKind::Goodness, "yellow.nlc", "yellow.nlc", 0, "rgb"});
    g.push_back({GroupKind::Goodness, "yellow.sigma_nlc", "yellow.sigma_nlc", 0, "rgb"});
    block("yellow", g);

    g.clear();
    spatial_groups(g, "chroma", "cielab", true, true);
    block("chroma", g);

    g.clear();
    g.push_back({GroupKind::AggdShort, "lms.rg", "lms.rg", 0, "lms"});
    g.push_back({GroupKind::AggdShort, "lms.by", "lms.by", 0, "lms"});
    spatial_groups(g, "lms.m", "lms", false, true);
    spatial_groups(g, "lms.s", "lms", false, true);
    block("lms", g);

    g.clear();
    g.push_back({GroupKind::MeanStd, "hsi.hue", "hsi.hue", 0, "hsi"});
    g.push_back({GroupKind::MeanStd, "hsi.saturation", "hsi.saturation", 0, "hsi"});
    block("hsi", g);
    return d;
}

}  // namespace detail

inline const LayoutDescriptor& layout() {
    static const LayoutDescriptor d = detail::build_layout();
    return d;
}

struct FeatureVector {
    std::vector<double> values;
    std::string layout_version;
    std::vector<std::size_t> degenerate_slots;  ///< absolute slot indices holding the 0 sentinel

    [[nodiscard]] double at(std::string_view slot) const { return values.at(layout().index_of(slot)); }
};

struct BlockResult {
    std::vector<double> values;
    std::vector<std::size_t> degenerate;  ///< absolute slot indices
};

/// Values for consecutive groups of one block, checked against the layout as they arrive.
class BlockWriter {
public:
    explicit BlockWriter(std::string_view block) {
        for (const BlockInfo& b : layout().blocks)
            if (b.name == block) {
                slot_ = b.first_slot;
                group_ = b.first_group;
                return;
            }
        throw std::logic_error("unknown feature block " + std::string(block));
    }

    void put(std::string_view prefix, const std::vector<double>& values, const std::vector<std::size_t>& bad = {}) {
        const LayoutDescriptor& d = layout();
        if (group_ >= d.groups.size() || d.groups[group_].prefix != prefix)
            throw std::logic_error("feature group out of layout order: " + std::string(prefix));
        if (values.size() != group_statistics(d.groups[group_].kind).size())
            throw std::logic_error("feature group size mismatch: " + std::string(prefix));
        for (std::size_t b : bad) out_.degenerate.push_back(slot_ + out_.values.size() + b);
        out_.values.insert(out_.values.end(), values.begin(), values.end());
        ++group_;
    }

    [[nodiscard]] BlockResult take() && { return std::move(out_); }

private:
    std::size_t slot_ = 0;
    std::size_t group_ = 0;
    BlockResult out_;
};

namespace detail {

struct GroupValues {
    std::vector<double> values;
    std::vector<std::size_t> bad;  // indices within the group
};

inline void put_moments(GroupValues& g, std::span<const double> samples, bool kurt_first) {
    const std::size_t base = g.values.size();
    try {
        const auto st = stats::sample_stats(samples);
        g.values.push_back(kurt_first ? st.kurtosis : st.skewness);
        g.values.push_back(kurt_first ? st.skewness : st.kurtosis);
        if (st.degenerate) g.bad.insert(g.bad.end(), {base, base + 1});
    } catch (const Error&) {
        g.values.insert(g.values.end(), {0.0, 0.0});
        g.bad.insert(g.bad.end(), {base, base + 1});
    }
}

inline GroupValues ggd_group(std::span<const double> samples) {
    GroupValues g;
    try {
        const auto fit = stats::fit_ggd(samples);
        g.values = {fit.alpha, fit.sigma * fit.sigma};
    } catch (const Error&) {
        g.values = {0.0, 0.0};
        g.bad = {0, 1};
    }
    put_moments(g, samples, true);
    return g;
}

inline GroupValues aggd_group(std::span<const double> samples, bool with_eta) {
    GroupValues g;
    try {
        const auto fit = stats::fit_aggd(samples);
        g.values.push_back(fit.nu);
        if (with_eta) g.values.push_back(fit.eta);
        g.values.push_back(fit.sigma_l * fit.sigma_l);
        g.values.push_back(fit.sigma_r * fit.sigma_r);
    } catch (const Error&) {
        const std::size_t n = with_eta ? 4 : 3;
        g.values.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) g.bad.push_back(i);
    }
    put_moments(g, samples, true);
    return g;
}

inline GroupValues sigma_stats_group(std::span<const double> sigma) {
    GroupValues g;
    try {
        const auto st = stats::sample_stats(sigma);
        g.values = {st.mean, st.kurtosis, st.skewness};
        if (st.degenerate) g.bad = {1, 2};
    } catch (const Error&) {
        g.values = {0.0, 0.0, 0.0};
        g.bad = {0, 1, 2};
    }
    return g;
}

inline GroupValues dog_sigma_group(std::span<const double> samples) {
    GroupValues g;
    try {
        const auto fit = stats::fit_ggd(samples);
        g.values = {fit.alpha, fit.sigma};
    } catch (const Error&) {
        g.values = {0.0, 0.0};
        g.bad = {0, 1};
    }
    put_moments(g, samples, false);
    return g;
}

inline GroupValues moments_group(std::span<const double> samples) {
    GroupValues g;
    put_moments(g, samples, true);
    return g;
}

inline GroupValues goodness_group(std::span<const double> samples) {
    try {
        const auto fit = stats::fit_ggd(samples);
        return {{stats::ggd_goodness(samples, fit)}, {}};
    } catch (const Error&) {
        return {{0.0}, {0}};
    }
}

inline GroupValues steerable_group(const Plane& map) {
    const auto block = steerable::steerable_features(map);
    return {std::vector<double>(block.values.begin(), block.values.end()), block.degenerate_slots};
}

inline void emit(BlockWriter& w, const std::string& prefix, const GroupValues& g) { w.put(prefix, g.values, g.bad); }

// Everything from the NLC groups through the steerable block for one channel map.
inline void spatial_block(BlockWriter& w, const std::string& ch, const Plane& map, bool paired, bool sigma_ggd) {
    const Plane half = maps::downsample2(map);
    const maps::NormalizedField field0 = maps::normalize(map);
    const maps::NormalizedField field1 = maps::normalize(half);
    const std::array<const maps::NormalizedField*, 2> fields = {&field0, &field1};

    for (int s = 0; s < 2; ++s) emit(w, ch + ".nlc." + scale_tag(s), ggd_group(fields[s]->nlc.values()));
    if (paired) {
        for (int s = 0; s < 2; ++s) {
            const auto pp = maps::paired_products(fields[s]->nlc);
            emit(w, ch + ".pp_h." + scale_tag(s), aggd_group(pp.horizontal.values(), true));
            emit(w, ch + ".pp_v." + scale_tag(s), aggd_group(pp.vertical.values(), true));
            emit(w, ch + ".pp_d." + scale_tag(s), aggd_group(pp.main_diagonal.values(), true));
            emit(w, ch + ".pp_a." + scale_tag(s), aggd_group(pp.anti_diagonal.values(), true));
        }
    }
    if (sigma_ggd) {
        for (int s = 0; s < 2; ++s)
            emit(w, ch + ".sigma_nlc." + scale_tag(s), ggd_group(maps::normalize(fields[s]->sigma).nlc.values()));
    }
    for (int s = 0; s < 2; ++s) emit(w, ch + ".sigma." + scale_tag(s), sigma_stats_group(fields[s]->sigma.values()));

    const auto chain = maps::dog_sigma_chain(field0.sigma);
    emit(w, ch + ".dog_sigma", dog_sigma_group(chain.dog_sigma.values()));
    emit(w, ch + ".dog_sigma_prime", moments_group(chain.dog_sigma_prime.values()));
    emit(w, ch + ".laplacian", aggd_group(maps::laplacian(map).values(), false));
    emit(w, ch + ".steer", steerable_group(map));
}

inline void require_image(const RgbImage& rgb) {
    if (rgb.height() < kMinImageSide || rgb.width() < kMinImageSide)
        throw Error(ErrorKind::TooSmall, "image " + std::to_string(rgb.height()) + "x" +
                                             std::to_string(rgb.width()) + " is below 128x128");
}

inline BlockResult luma_block(const Plane& luma) {
    BlockWriter w("luma");
    spatial_block(w, "luma", luma, true, false);
    return std::move(w).take();
}

inline BlockResult yellow_block(const Plane& yellow) {
    BlockWriter w("yellow");
    const auto field = maps::normalize(yellow);
    emit(w, "yellow.nlc", goodness_group(field.nlc.values()));
    emit(w, "yellow.sigma_nlc", goodness_group(maps::normalize(field.sigma).nlc.values()));
    return std::move(w).take();
}

inline BlockResult chroma_block(const Plane& chroma) {
    BlockWriter w("chroma");
    spatial_block(w, "chroma", chroma, true, true);
    return std::move(w).take();
}

inline BlockResult lms_block(const color::ChannelSet& ch) {
    BlockWriter w("lms");
    emit(w, "lms.rg", aggd_group(ch.rg.values(), false));
    emit(w, "lms.by", aggd_group(ch.by.values(), false));
    spatial_block(w, "lms.m", ch.m_hat_source, false, true);
    spatial_block(w, "lms.s", ch.s_hat_source, false, true);
    return std::move(w).take();
}

inline BlockResult hsi_block(const color::ChannelSet& ch) {
    BlockWriter w("hsi");
    std::vector<double> hue;
    hue.reserve(ch.hue.size());
    for (std::size_t i = 0; i < ch.hue.size(); ++i)
        if (ch.hue_valid.values()[i]) hue.push_back(ch.hue.values()[i]);
    auto mean_std = [](std::span<const double> v) -> GroupValues {
        if (v.empty()) return {{0.0, 0.0}, {0, 1}};
        double sum = 0.0;
        for (double x : v) sum += x;
        const double mean = sum / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return {{mean, std::sqrt(ss / static_cast<double>(v.size()))}, {}};
    };
    emit(w, "hsi.hue", mean_std(hue));
    emit(w, "hsi.saturation", mean_std(ch.saturation.values()));
    return std::move(w).take();
}

}  // namespace detail

inline std::vector<double> extract_luma_features(const RgbImage& rgb) {
    detail::require_image(rgb);
    return detail::luma_block(color::to_luma(rgb)).values;
}

inline std::vector<double> extract_yellow_features(const RgbImage& rgb) {
    detail::require_image(rgb);
    return detail::yellow_block(color::yellow_map(rgb)).values;
}

inline std::vector<double> extract_chroma_features(const RgbImage& rgb) {
    detail::require_image(rgb);
    return detail::chroma_block(color::to_chroma(rgb)).values;
}

inline std::vector<double> extract_lms_features(const RgbImage& rgb) {
    detail::require_image(rgb);
    return detail::lms_block(color::make_channels(rgb)).values;
}

inline std::vector<double> extract_hsi_features(const RgbImage& rgb) {
    detail::require_image(rgb);
    return detail::hsi_block(color::make_channels(rgb)).values;
}

/// luma || yellow || chroma || lms || hsi, stamped with the layout version.
inline FeatureVector extract_all(const RgbImage& rgb) {
    detail::require_image(rgb);
    const color::ChannelSet ch = color::make_channels(rgb);
    FeatureVector out;
    out.layout_version = std::string(kLayoutVersion);
    out.values.reserve(kFeatureCount);
    auto append = [&out](BlockResult block) {
        out.values.insert(out.values.end(), block.values.begin(), block.values.end());
        out.degenerate_slots.insert(out.degenerate_slots.end(), block.degenerate.begin(), block.degenerate.end());
    };
    append(detail::luma_block(ch.luma));
    append(detail::yellow_block(ch.yellow));
    append(detail::chroma_block(ch.chroma));
    append(detail::lms_block(ch));
    append(detail::hsi_block(ch));
    if (out.values.size() != kFeatureCount) throw std::logic_error("feature vector length mismatch");
    for (double v : out.values)
        if (!std::isfinite(v)) throw Error(ErrorKind::DegenerateSample, "non-finite feature value");
    return out;
}

}  // namespace friquee::features
