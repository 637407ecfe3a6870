#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "friquee/error.hpp"

namespace friquee {

/// Single-channel row-major 2-D map of reals (luma, chroma, sigma field, subband, ...).
template <class T>
class BasicPlane {
public:
    using value_type = T;

    BasicPlane() = default;
    BasicPlane(std::size_t height, std::size_t width, T fill = T{})
        : height_(height), width_(width), data_(height * width, fill) {}
    BasicPlane(std::size_t height, std::size_t width, std::vector<T> data)
        : height_(height), width_(width), data_(std::move(data)) {
        if (data_.size() != height_ * width_)
            throw Error(ErrorKind::InvalidArgument, "plane data size does not match dimensions");
    }

    [[nodiscard]] std::size_t height() const noexcept { return height_; }
    [[nodiscard]] std::size_t width() const noexcept { return width_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t row, std::size_t col) noexcept {
        assert(row < height_ && col < width_);
        return data_[row * width_ + col];
    }
    const T& operator()(std::size_t row, std::size_t col) const noexcept {
        assert(row < height_ && col < width_);
        return data_[row * width_ + col];
    }

    [[nodiscard]] std::span<T> values() noexcept { return data_; }
    [[nodiscard]] std::span<const T> values() const noexcept { return data_; }
    [[nodiscard]] const std::vector<T>& vector() const noexcept { return data_; }

    [[nodiscard]] bool same_shape(const BasicPlane& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_;
    }

    friend bool operator==(const BasicPlane&, const BasicPlane&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<T> data_;
};

using Plane = BasicPlane<double>;
using Mask = BasicPlane<unsigned char>;

/// Elementwise transform producing a plane of the same shape.
template <class T, class F>
[[nodiscard]] BasicPlane<T> map_plane(const BasicPlane<T>& in, F&& f) {
    BasicPlane<T> out(in.height(), in.width());
    std::transform(in.values().begin(), in.values().end(), out.values().begin(), f);
    return out;
}

template <class T, class F>
[[nodiscard]] BasicPlane<T> zip_planes(const BasicPlane<T>& a, const BasicPlane<T>& b, F&& f) {
    if (!a.same_shape(b)) throw Error(ErrorKind::InvalidArgument, "plane shapes differ");
    BasicPlane<T> out(a.height(), a.width());
    std::transform(a.values().begin(), a.values().end(), b.values().begin(), out.values().begin(), f);
    return out;
}

/// Rotates a plane by 180 degrees.
template <class T>
[[nodiscard]] BasicPlane<T> rotate180(const BasicPlane<T>& in) {
    BasicPlane<T> out(in.height(), in.width());
    std::reverse_copy(in.values().begin(), in.values().end(), out.values().begin());
    return out;
}

/// Rotates a plane by 90 degrees counter-clockwise.
template <class T>
[[nodiscard]] BasicPlane<T> rotate90(const BasicPlane<T>& in) {
    BasicPlane<T> out(in.width(), in.height());
    for (std::size_t r = 0; r < in.height(); ++r)
        for (std::size_t c = 0; c < in.width(); ++c) out(in.width() - 1 - c, r) = in(r, c);
    return out;
}

}  // namespace friquee
