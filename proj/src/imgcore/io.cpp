#include "harmony/imgcore/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace harmony {

namespace fs = std::filesystem;

std::uint8_t quantize8(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

ImageRGB quantize(const ImageRGB& img) {
    ImageRGB out = img;
    out.pixels() = img.pixels().unaryExpr([](double v) { return quantize8(v) / 255.0; });
    return out;
}

std::vector<std::uint8_t> to_rgb8(const ImageRGB& img) {
    if (img.space() != ColorSpace::RGB) throw Error(Errc::unsupported, "only RGB images can be encoded");
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(img.pixel_count()) * 3);
    for (Eigen::Index i = 0; i < img.pixel_count(); ++i) {
        for (int c = 0; c < 3; ++c) bytes[static_cast<std::size_t>(i) * 3 + c] = quantize8(img.pixels()(i, c));
    }
    return bytes;
}

ImageRGB from_rgb8(int width, int height, const std::uint8_t* data) {
    ImageRGB img(width, height);
    for (Eigen::Index i = 0; i < img.pixel_count(); ++i) {
        for (int c = 0; c < 3; ++c) img.pixels()(i, c) = data[i * 3 + c] / 255.0;
    }
    return img;
}

namespace {

std::vector<std::uint8_t> read_png_raw(const fs::path& path, std::uint32_t format, int& width, int& height) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw Error(Errc::io, "cannot read PNG " + path.string() + ": " + image.message);
    }
    image.format = format;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw Error(Errc::io, "cannot decode PNG " + path.string() + ": " + msg);
    }
    width = static_cast<int>(image.width);
    height = static_cast<int>(image.height);
    return buffer;
}

void write_png_raw(const fs::path& path, std::uint32_t format, int width, int height, const std::uint8_t* data) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;
    if (!png_image_write_to_file(&image, path.c_str(), 0, data, 0, nullptr)) {
        throw Error(Errc::io, "cannot write PNG " + path.string() + ": " + image.message);
    }
}

}  // namespace

ImageRGB read_png(const fs::path& path) {
    int w = 0, h = 0;
    const auto bytes = read_png_raw(path, PNG_FORMAT_RGB, w, h);
    return from_rgb8(w, h, bytes.data());
}

void write_png(const fs::path& path, const ImageRGB& img) {
    const auto bytes = to_rgb8(img);
    write_png_raw(path, PNG_FORMAT_RGB, img.width(), img.height(), bytes.data());
}

Mask read_mask_png(const fs::path& path) {
    int w = 0, h = 0;
    const auto bytes = read_png_raw(path, PNG_FORMAT_GRAY, w, h);
    return Mask::from_gray8(w, h, bytes.data());
}

void write_mask_png(const fs::path& path, const Mask& mask) {
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(mask.size()));
    for (Eigen::Index i = 0; i < mask.size(); ++i) bytes[static_cast<std::size_t>(i)] = mask[i] ? 255 : 0;
    write_png_raw(path, PNG_FORMAT_GRAY, mask.width(), mask.height(), bytes.data());
}

namespace {

std::string next_token(std::istream& in) {
    std::string tok;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(c);
    }
    return tok;
}

}  // namespace

ImageRGB read_ppm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());
    if (next_token(in) != "P6") throw Error(Errc::parse, path.string() + ": not a binary PPM");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token(in));
        h = std::stoi(next_token(in));
        maxval = std::stoi(next_token(in));
    } catch (const std::exception&) {
        throw Error(Errc::parse, path.string() + ": malformed PPM header");
    }
    if (w <= 0 || h <= 0 || maxval != 255) throw Error(Errc::parse, path.string() + ": unsupported PPM header");
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw Error(Errc::parse, path.string() + ": truncated PPM data");
    }
    return from_rgb8(w, h, bytes.data());
}

void write_ppm(const fs::path& path, const ImageRGB& img) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
    const auto bytes = to_rgb8(img);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ImageRGB read_image(const fs::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".ppm") return read_ppm(path);
    if (ext == ".png") return read_png(path);
    throw Error(Errc::unsupported, "unsupported image extension: " + path.string());
}

void write_image(const fs::path& path, const ImageRGB& img) {
    const auto ext = path.extension().string();
    if (ext == ".ppm") return write_ppm(path, img);
    if (ext == ".png") return write_png(path, img);
    throw Error(Errc::unsupported, "unsupported image extension: " + path.string());
}

ImageRGB resize_bilinear(const ImageRGB& img, int width, int height) {
    if (img.width() == width && img.height() == height) return img;
    ImageRGB out(width, height, img.space());
    const double sx = static_cast<double>(img.width()) / width;
    const double sy = static_cast<double>(img.height()) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height() - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width() - 1);
            const double wx = fx - x0;
            out.pixel(x, y) = (1 - wy) * ((1 - wx) * img.pixel(x0, y0) + wx * img.pixel(x1, y0)) +
                              wy * ((1 - wx) * img.pixel(x0, y1) + wx * img.pixel(x1, y1));
        }
    }
    return out;
}

Mask resize_nearest(const Mask& mask, int width, int height) {
    if (mask.width() == width && mask.height() == height) return mask;
    Mask out(width, height);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(static_cast<int>((y + 0.5) * mask.height() / height), mask.height() - 1);
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(static_cast<int>((x + 0.5) * mask.width() / width), mask.width() - 1);
            out.set(x, y, mask.at(sx, sy));
        }
    }
    return out;
}

}  // namespace harmony
