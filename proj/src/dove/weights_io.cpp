#include "harmony/dove/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace harmony::dove {

namespace {

static_assert(sizeof(float) == 4);

float decode_le(const unsigned char* b) {
    const std::uint32_t bits = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
                               (std::uint32_t(b[3]) << 24);
    return std::bit_cast<float>(bits);
}

void encode_le(float v, unsigned char* b) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
}

}  // namespace

ConvWeights<float> read_conv_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot open weights " + path.string());
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    int out = 0, inc = 0, kh = 0, kw = 0;
    if (!(hs >> out >> inc >> kh >> kw) || out <= 0 || inc <= 0 || kh <= 0 || kw <= 0) {
        throw Error(Errc::parse, path.string() + ": header must be `out in kh kw`");
    }
    auto w = ConvWeights<float>::zeros(out, inc, kh, kw);
    const std::size_t count = static_cast<std::size_t>(out) * inc * kh * kw + static_cast<std::size_t>(out);
    std::vector<unsigned char> raw(count * 4);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw Error(Errc::parse, path.string() + ": truncated weight data");
    }
    if (in.peek() != std::char_traits<char>::eof()) throw Error(Errc::parse, path.string() + ": trailing bytes");
    std::size_t k = 0;
    for (int o = 0; o < out; ++o)
        for (int i = 0; i < inc; ++i)
            for (int y = 0; y < kh; ++y)
                for (int x = 0; x < kw; ++x, ++k) w.at(o, i, y, x) = decode_le(&raw[k * 4]);
    for (int o = 0; o < out; ++o, ++k) w.bias[o] = decode_le(&raw[k * 4]);
    w.validate();
    return w;
}

void write_conv_weights(const std::filesystem::path& path, const ConvWeights<float>& w) {
    w.validate();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write weights " + path.string());
    out << w.out_channels << ' ' << w.in_channels << ' ' << w.kernel_h << ' ' << w.kernel_w << '\n';
    unsigned char b[4];
    for (int o = 0; o < w.out_channels; ++o)
        for (int i = 0; i < w.in_channels; ++i)
            for (int y = 0; y < w.kernel_h; ++y)
                for (int x = 0; x < w.kernel_w; ++x) {
                    encode_le(w.at(o, i, y, x), b);
                    out.write(reinterpret_cast<const char*>(b), 4);
                }
    for (int o = 0; o < w.out_channels; ++o) {
        encode_le(w.bias[o], b);
        out.write(reinterpret_cast<const char*>(b), 4);
    }
}

}  // namespace harmony::dove
