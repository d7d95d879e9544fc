#pragma once

#include <cstddef>
#include <vector>

namespace drift {

/// Channel-major (C x H x W) image with intensities in [0, 1].
struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int c, int h, int w) : channels(c), height(h), width(w), pixels(std::size_t(c) * h * w, 0.0f) {}

    float& at(int c, int y, int x) { return pixels[(std::size_t(c) * height + y) * width + x]; }
    float at(int c, int y, int x) const { return pixels[(std::size_t(c) * height + y) * width + x]; }

    bool operator==(const Image&) const = default;
};

}  // namespace drift
