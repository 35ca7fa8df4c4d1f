#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "deid/core/geometry.hpp"

namespace deid {

/// Interleaved 8-bit image, row-major. Frames are RGB (3 channels); tests also
/// use single-channel images.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, int c = 3, std::uint8_t fill = 0)
        : width(w), height(h), channels(c),
          pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), fill) {}

    bool empty() const { return pixels.empty(); }

    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(c);
    }
    std::uint8_t& at(int x, int y, int c = 0) { return pixels[index(x, y, c)]; }
    std::uint8_t at(int x, int y, int c = 0) const { return pixels[index(x, y, c)]; }

    bool operator==(const Image&) const = default;
};

/// Copy of the `region` sub-rectangle. The region must lie inside the image.
Image crop_image(const Image& image, const BoxGeom& region);

/// Writes `patch` into `image` with its top-left at (x, y).
void paste_image(Image& image, const Image& patch, int x, int y);

Image load_png(const std::filesystem::path& path);
void save_png(const Image& image, const std::filesystem::path& path);

/// Width and height from the PNG header without decoding pixels.
std::pair<int, int> png_dimensions(const std::filesystem::path& path);

/// 64-bit FNV-1a over a byte range.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// FNV-1a over every pixel of `image` not covered by any of `masked`.
std::uint64_t checksum_outside(const Image& image, std::span<const BoxGeom> masked);

}  // namespace deid
