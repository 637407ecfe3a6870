#include <catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "friquee/channels.hpp"
#include "friquee/color.hpp"

using namespace friquee;
using namespace friquee::color;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

RgbImage pixel(double r, double g, double b) { return {Plane(1, 1, r), Plane(1, 1, g), Plane(1, 1, b)}; }

// Textbook sRGB -> XYZ -> CIELAB with the tabulated D65 white, written independently.
std::array<double, 3> reference_lab(double r, double g, double b) {
    auto lin = [](double v) {
        v /= 255.0;
        return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
    };
    const double R = lin(r), G = lin(g), B = lin(b);
    const double X = 0.4124564 * R + 0.3575761 * G + 0.1804375 * B;
    const double Y = 0.2126729 * R + 0.7151522 * G + 0.0721750 * B;
    const double Z = 0.0193339 * R + 0.1191920 * G + 0.9503041 * B;
    auto f = [](double t) { return t > 216.0 / 24389.0 ? std::cbrt(t) : (24389.0 / 27.0 * t + 16.0) / 116.0; };
    const double fx = f(X / 0.95047), fy = f(Y / 1.0), fz = f(Z / 1.08883);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

RgbImage random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
    RgbImage img(h, w);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 255.0);
    for (Plane* p : {&img.r, &img.g, &img.b})
        for (double& v : p->values()) v = u(rng);
    return img;
}

// Gray exponential ramp: every log-cone plane is exactly linear in the column index.
RgbImage exponential_ramp(std::size_t h, std::size_t w, double gain) {
    RgbImage img(h, w);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            const double v = gain * 20.0 * std::exp(0.03 * static_cast<double>(c) + 0.01 * static_cast<double>(r));
            img.r(r, c) = img.g(r, c) = img.b(r, c) = v;
        }
    return img;
}

}  // namespace

TEST_CASE("BT.601 luma", "[color]") {
    CHECK(to_luma(pixel(255, 255, 255))(0, 0) == Catch::Approx(255.0).epsilon(1e-15));
    CHECK(to_luma(pixel(0, 0, 0))(0, 0) == 0.0);
    CHECK_THAT(to_luma(pixel(255, 0, 0))(0, 0), WithinAbs(76.245, 1e-12));
}

TEST_CASE("CIELAB chroma", "[color]") {
    for (double v : {0.0, 1.0, 10.0, 77.0, 128.0, 200.0, 255.0}) CHECK(to_chroma(pixel(v, v, v))(0, 0) == 0.0);

    const auto ref = reference_lab(255, 0, 0);
    const double ref_chroma = std::hypot(ref[1], ref[2]);
    CHECK_THAT(ref_chroma, WithinAbs(104.6, 0.1));
    CHECK_THAT(to_chroma(pixel(255, 0, 0))(0, 0), WithinAbs(ref_chroma, 0.01));

    const auto img = random_image(40, 40, 3);
    const auto chroma = to_chroma(img);
    double worst = 0.0;
    for (std::size_t i = 0; i < chroma.size(); ++i) {
        CHECK(chroma.values()[i] >= 0.0);
        const auto lab = reference_lab(img.r.values()[i], img.g.values()[i], img.b.values()[i]);
        worst = std::max(worst, std::abs(chroma.values()[i] - std::hypot(lab[1], lab[2])));
    }
    CHECK(worst < 0.01);
}

TEST_CASE("log-LMS normalized planes", "[color][lms]") {
    const auto flat = to_lms_hat(RgbImage(32, 32, 90.0));
    for (const Plane* p : {&flat.l_hat, &flat.m_hat, &flat.s_hat})
        for (double v : p->values()) CHECK(v == 0.0);

    // Doubling the exposure adds ln 2 to every log plane, which normalization removes.
    const auto base = to_lms_hat(exponential_ramp(40, 48, 1.0));
    const auto doubled = to_lms_hat(exponential_ramp(40, 48, 2.0));
    double worst = 0.0;
    for (std::size_t i = 0; i < base.m_hat.size(); ++i) {
        worst = std::max(worst, std::abs(base.l_hat.values()[i] - doubled.l_hat.values()[i]));
        worst = std::max(worst, std::abs(base.m_hat.values()[i] - doubled.m_hat.values()[i]));
        worst = std::max(worst, std::abs(base.s_hat.values()[i] - doubled.s_hat.values()[i]));
    }
    CHECK(worst < 1e-6);

    // Local mean of the normalized plane under the 7x7 window, away from the borders.
    const auto window = maps::gaussian_kernel(maps::kNormRadius, maps::kNormStd);
    for (const Plane* p : {&base.l_hat, &base.m_hat, &base.s_hat}) {
        double local = 0.0;
        for (std::size_t r = 6; r + 6 < p->height(); ++r)
            for (std::size_t c = 6; c + 6 < p->width(); ++c) {
                double acc = 0.0;
                for (int dy = -3; dy <= 3; ++dy)
                    for (int dx = -3; dx <= 3; ++dx) acc += window[dy + 3] * window[dx + 3] * (*p)(r + dy, c + dx);
                local = std::max(local, std::abs(acc));
            }
        CHECK(local < 1e-6);
    }
}

TEST_CASE("opponent projection", "[color][lms]") {
    const auto hat = to_lms_hat(random_image(16, 16, 6));
    const auto same = opponents(hat.l_hat, hat.l_hat, hat.s_hat);
    for (double v : same.rg.values()) CHECK(v == 0.0);

    const auto all = opponents(hat.m_hat, hat.m_hat, hat.m_hat);
    for (std::size_t i = 0; i < all.by.size(); ++i) {
        CHECK_THAT(all.by.values()[i], WithinAbs(0.0, 1e-15));
        CHECK_THAT(all.achromatic.values()[i], WithinAbs(std::numbers::sqrt3 * hat.m_hat.values()[i], 1e-12));
    }

    const auto m = opponent_matrix();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += m[i][k] * m[j][k];
            CHECK_THAT(dot, WithinAbs(i == j ? 1.0 : 0.0, 1e-12));
        }
}

TEST_CASE("HSI hue and saturation", "[color][hsi]") {
    for (double v : {0.0, 50.0, 255.0}) {
        const auto h = to_hsi(pixel(v, v, v));
        CHECK(h.saturation(0, 0) == 0.0);
        CHECK(h.hue_valid(0, 0) == 0);
        CHECK(h.hue(0, 0) == 0.0);
    }
    CHECK(to_hsi(pixel(255, 0, 0)).hue(0, 0) == 0.0);
    CHECK(to_hsi(pixel(255, 0, 0)).saturation(0, 0) == 1.0);
    CHECK_THAT(to_hsi(pixel(0, 255, 0)).hue(0, 0), WithinAbs(2.0 * std::numbers::pi / 3.0, 1e-12));
    CHECK_THAT(to_hsi(pixel(0, 0, 255)).hue(0, 0), WithinAbs(4.0 * std::numbers::pi / 3.0, 1e-12));

    const auto h = to_hsi(random_image(30, 30, 9));
    for (std::size_t i = 0; i < h.hue.size(); ++i) {
        CHECK(h.hue.values()[i] >= 0.0);
        CHECK(h.hue.values()[i] < 2.0 * std::numbers::pi);
        CHECK(h.saturation.values()[i] >= 0.0);
        CHECK(h.saturation.values()[i] <= 1.0);
    }
}

TEST_CASE("yellow channel", "[color][yellow]") {
    CHECK(yellow_map(pixel(255, 255, 0))(0, 0) == 255.0);
    CHECK(yellow_map(pixel(0, 0, 255))(0, 0) == -255.0);
    CHECK(yellow_map(pixel(90, 90, 90))(0, 0) == 0.0);
    const std::array<double, 4> levels = {0, 64, 128, 255};
    for (double r : levels)
        for (double g : levels)
            for (double b : levels) CHECK(yellow_map(pixel(r, g, b))(0, 0) == std::min(r, g) - b);
}

TEST_CASE("channel maps are deterministic and share the source size", "[color]") {
    const auto img = random_image(33, 47, 12);
    const auto a = make_channels(img);
    const auto b = make_channels(img);
    CHECK(a.luma == b.luma);
    CHECK(a.chroma == b.chroma);
    CHECK(a.rg == b.rg);
    CHECK(a.by == b.by);
    CHECK(a.hue == b.hue);
    CHECK(a.yellow == b.yellow);
    for (const Plane* p : {&a.luma, &a.chroma, &a.m_hat_source, &a.s_hat_source, &a.rg, &a.by, &a.hue, &a.saturation,
                           &a.yellow}) {
        CHECK(p->height() == 33);
        CHECK(p->width() == 47);
    }
}
