#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "harmony/error.hpp"

namespace harmony {

enum class ColorSpace { RGB, LAB, YCBCR };

constexpr std::string_view to_string(ColorSpace space) {
    switch (space) {
        case ColorSpace::RGB: return "RGB";
        case ColorSpace::LAB: return "LAB";
        case ColorSpace::YCBCR: return "YCBCR";
    }
    return "?";
}

/// Three-channel raster. Pixels are stored as an N x 3 matrix, one row per
/// pixel in row-major scan order (index = y * width + x), so a pixel cloud can
/// be fed straight into Eigen linear algebra.
template <typename Scalar>
class Image {
public:
    using PixelMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;
    using Pixel = Eigen::Matrix<Scalar, 1, 3>;

    Image() = default;

    Image(int width, int height, ColorSpace space = ColorSpace::RGB)
        : width_(width), height_(height), space_(space),
          pixels_(PixelMatrix::Zero(Eigen::Index(width) * height, 3)) {
        if (width <= 0 || height <= 0) {
            throw Error(Errc::invalid_argument, "image dimensions must be positive");
        }
    }

    Image(int width, int height, PixelMatrix pixels, ColorSpace space = ColorSpace::RGB)
        : width_(width), height_(height), space_(space), pixels_(std::move(pixels)) {
        if (width <= 0 || height <= 0 || pixels_.rows() != Eigen::Index(width) * height) {
            throw Error(Errc::dimension_mismatch, "pixel matrix does not match image dimensions");
        }
    }

    static Image constant(int width, int height, const Pixel& value) {
        Image img(width, height);
        img.pixels_.rowwise() = value;
        return img;
    }

    int width() const { return width_; }
    int height() const { return height_; }
    Eigen::Index pixel_count() const { return pixels_.rows(); }
    ColorSpace space() const { return space_; }
    void set_space(ColorSpace space) { space_ = space; }

    PixelMatrix& pixels() { return pixels_; }
    const PixelMatrix& pixels() const { return pixels_; }

    Eigen::Index index(int x, int y) const { return Eigen::Index(y) * width_ + x; }
    Scalar& at(int x, int y, int c) { return pixels_(index(x, y), c); }
    Scalar at(int x, int y, int c) const { return pixels_(index(x, y), c); }
    auto pixel(int x, int y) { return pixels_.row(index(x, y)); }
    auto pixel(int x, int y) const { return pixels_.row(index(x, y)); }

    bool same_shape(const Image& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

    template <typename T>
    Image<T> cast() const {
        return Image<T>(width_, height_, pixels_.template cast<T>(), space_);
    }

    bool operator==(const Image& other) const {
        return same_shape(other) && space_ == other.space_ && pixels_ == other.pixels_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    ColorSpace space_ = ColorSpace::RGB;
    PixelMatrix pixels_;
};

using ImageRGB = Image<double>;

/// Strictly binary region indicator (1 = foreground).
class Mask {
public:
    using Data = Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>;

    Mask() = default;

    Mask(int width, int height, std::uint8_t fill = 0)
        : width_(width), height_(height), data_(Data::Constant(Eigen::Index(width) * height, fill ? 1 : 0)) {
        if (width <= 0 || height <= 0) {
            throw Error(Errc::invalid_argument, "mask dimensions must be positive");
        }
    }

    /// Thresholds 8-bit values at >= 128.
    static Mask from_gray8(int width, int height, const std::uint8_t* values) {
        Mask m(width, height);
        for (Eigen::Index i = 0; i < m.data_.size(); ++i) m.data_[i] = values[i] >= 128 ? 1 : 0;
        return m;
    }

    int width() const { return width_; }
    int height() const { return height_; }
    Eigen::Index size() const { return data_.size(); }

    std::uint8_t operator[](Eigen::Index i) const { return data_[i]; }
    bool at(int x, int y) const { return data_[Eigen::Index(y) * width_ + x] != 0; }
    void set(int x, int y, bool fg) { data_[Eigen::Index(y) * width_ + x] = fg ? 1 : 0; }
    void set(Eigen::Index i, bool fg) { data_[i] = fg ? 1 : 0; }
    const Data& data() const { return data_; }

    Eigen::Index count() const { return data_.template cast<Eigen::Index>().sum(); }

    Mask complement() const {
        Mask m = *this;
        m.data_ = 1 - data_;
        return m;
    }

    template <typename Scalar>
    bool matches(const Image<Scalar>& img) const {
        return width_ == img.width() && height_ == img.height();
    }

    bool operator==(const Mask& other) const {
        return width_ == other.width_ && height_ == other.height_ && (data_ == other.data_).all();
    }

private:
    int width_ = 0;
    int height_ = 0;
    Data data_;
};

template <typename Scalar>
void require_same_shape(const Image<Scalar>& img, const Mask& mask) {
    if (!mask.matches(img)) {
        throw Error(Errc::dimension_mismatch, "mask " + std::to_string(mask.width()) + "x" +
                                                  std::to_string(mask.height()) + " vs image " +
                                                  std::to_string(img.width()) + "x" +
                                                  std::to_string(img.height()));
    }
}

template <typename Scalar>
void require_same_shape(const Image<Scalar>& a, const Image<Scalar>& b) {
    if (!a.same_shape(b)) {
        throw Error(Errc::dimension_mismatch, "image " + std::to_string(a.width()) + "x" +
                                                  std::to_string(a.height()) + " vs " +
                                                  std::to_string(b.width()) + "x" +
                                                  std::to_string(b.height()));
    }
}

/// Rows of `pixels` selected by the mask, in scan order.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 3> gather(const Eigen::MatrixBase<Derived>& pixels,
                                                                  const Mask& mask) {
    Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 3> out(mask.count(), 3);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        if (mask[i]) out.row(k++) = pixels.row(i);
    }
    return out;
}

/// Inverse of gather: writes `rows` back into the masked positions of `pixels`.
template <typename Scalar, typename Derived>
void scatter(Eigen::Matrix<Scalar, Eigen::Dynamic, 3>& pixels, const Mask& mask,
             const Eigen::MatrixBase<Derived>& rows) {
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        if (mask[i]) pixels.row(i) = rows.row(k++);
    }
}

}  // namespace harmony
