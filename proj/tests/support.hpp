#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include "harmony/imgcore/image.hpp"
#include "harmony/rng.hpp"

namespace testing {

inline harmony::ImageRGB random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    harmony::SplitMix rng(seed);
    harmony::ImageRGB img(w, h);
    for (Eigen::Index i = 0; i < img.pixels().size(); ++i) img.pixels().data()[i] = lo + (hi - lo) * rng.uniform();
    return img;
}

inline harmony::Mask rect_mask(int w, int h, int x0, int y0, int x1, int y1) {
    harmony::Mask m(w, h);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) m.set(x, y, true);
    return m;
}

inline harmony::Mask random_mask(int w, int h, std::uint64_t seed, double p = 0.5) {
    harmony::SplitMix rng(seed);
    harmony::Mask m(w, h);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.set(i, rng.uniform() < p);
    if (m.count() == 0) m.set(0, true);
    if (m.count() == m.size()) m.set(m.size() - 1, false);
    return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("harmony-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
