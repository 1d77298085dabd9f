#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace sgdf {

// Row-major H x W x C layout: index = (h*W + w)*C + c.
// The channel axis doubles as the disparity axis for attention volumes.
struct Shape {
    int h = 0;
    int w = 0;
    int c = 0;

    Shape() = default;
    Shape(int h_, int w_, int c_) : h(h_), w(w_), c(c_) {
        if (h < 0 || w < 0 || c < 0)
            throw std::invalid_argument("Shape: negative extent");
    }

    std::size_t size() const {
        return static_cast<std::size_t>(h) * static_cast<std::size_t>(w) *
               static_cast<std::size_t>(c);
    }

    bool operator==(const Shape& o) const { return h == o.h && w == o.w && c == o.c; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        return "(" + std::to_string(h) + ", " + std::to_string(w) + ", " +
               std::to_string(c) + ")";
    }
};

// Spatial scale of a feature map relative to the input image.
enum class Scale { full, half, quarter };

// Resolution of an attention volume over disparity hypotheses.
enum class AttnRes { coarse, fine };

}  // namespace sgdf
