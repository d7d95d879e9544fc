#include "drift/data/image_io.hpp"

#include "drift/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace drift::data {
namespace {

unsigned char to_byte(float v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

std::string encode_pnm(const Image& image) {
    if (image.channels != 1 && image.channels != 3) {
        throw IoError(fmt::format("cannot encode a {}-channel image as PNM", image.channels));
    }
    std::string out = fmt::format("{}\n{} {}\n255\n", image.channels == 3 ? "P6" : "P5", image.width,
                                  image.height);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < image.channels; ++c) out.push_back(static_cast<char>(to_byte(image.at(c, y, x))));
        }
    }
    return out;
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    const auto bytes = encode_pnm(image);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

Image decode_pnm(const std::string& bytes) {
    std::istringstream in(bytes);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (!in || (magic != "P6" && magic != "P5") || w <= 0 || h <= 0 || maxval != 255) {
        throw IngestionError("unsupported or malformed PNM header");
    }
    in.get();
    const int channels = magic == "P6" ? 3 : 1;
    Image img(channels, h, w);
    const auto offset = static_cast<std::size_t>(in.tellg());
    if (bytes.size() < offset + img.pixels.size()) throw IngestionError("truncated PNM pixel data");
    std::size_t k = offset;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                img.at(c, y, x) = static_cast<unsigned char>(bytes[k++]) / 255.0f;
            }
        }
    }
    return img;
}

Image read_pnm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IngestionError(fmt::format("cannot open image '{}'", path.string()));
    std::ostringstream ss;
    ss << f.rdbuf();
    return decode_pnm(ss.str());
}

void quantize_8bit(Image& image) {
    for (auto& v : image.pixels) v = to_byte(v) / 255.0f;
}

}  // namespace drift::data
