#include "deid/core/image.hpp"

#include <png.h>

#include <cstring>
#include <fstream>

#include "deid/error.hpp"

namespace deid {

Image crop_image(const Image& image, const BoxGeom& region) {
    if (region.x < 0 || region.y < 0 || region.right() > image.width || region.bottom() > image.height)
        throw DomainError("crop region outside image");
    Image out(region.w, region.h, image.channels);
    const std::size_t row_bytes = static_cast<std::size_t>(region.w) * static_cast<std::size_t>(image.channels);
    for (int y = 0; y < region.h; ++y)
        std::memcpy(&out.pixels[out.index(0, y)], &image.pixels[image.index(region.x, region.y + y)], row_bytes);
    return out;
}

void paste_image(Image& image, const Image& patch, int x, int y) {
    if (patch.channels != image.channels) throw DomainError("channel count mismatch");
    if (x < 0 || y < 0 || x + patch.width > image.width || y + patch.height > image.height)
        throw DomainError("paste region outside image");
    const std::size_t row_bytes = static_cast<std::size_t>(patch.width) * static_cast<std::size_t>(patch.channels);
    for (int row = 0; row < patch.height; ++row)
        std::memcpy(&image.pixels[image.index(x, y + row)], &patch.pixels[patch.index(0, row)], row_bytes);
}

Image load_png(const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str()))
        throw IoError("cannot read PNG " + path.string() + ": " + png.message);
    png.format = PNG_FORMAT_RGB;
    Image img(static_cast<int>(png.width), static_cast<int>(png.height), 3);
    if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw IoError("cannot decode PNG " + path.string() + ": " + msg);
    }
    return img;
}

void save_png(const Image& image, const std::filesystem::path& path) {
    if (image.channels != 3 && image.channels != 1) throw DomainError("PNG output needs 1 or 3 channels");
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr))
        throw IoError("cannot write PNG " + path.string() + ": " + png.message);
}

std::pair<int, int> png_dimensions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    unsigned char header[24];
    if (!in.read(reinterpret_cast<char*>(header), sizeof header))
        throw IoError("cannot read PNG header of " + path.string());
    static constexpr unsigned char kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (std::memcmp(header, kSig, 8) != 0 || std::memcmp(header + 12, "IHDR", 4) != 0)
        throw IoError(path.string() + " is not a PNG file");
    auto be32 = [&](int off) {
        return static_cast<int>((std::uint32_t{header[off]} << 24) | (std::uint32_t{header[off + 1]} << 16) |
                                (std::uint32_t{header[off + 2]} << 8) | std::uint32_t{header[off + 3]});
    };
    return {be32(16), be32(20)};
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t checksum_outside(const Image& image, std::span<const BoxGeom> masked) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            bool covered = false;
            for (const auto& b : masked)
                if (b.contains(x, y)) {
                    covered = true;
                    break;
                }
            if (covered) continue;
            h = fnv1a64({&image.pixels[image.index(x, y)], static_cast<std::size_t>(image.channels)}, h);
        }
    }
    return h;
}

}  // namespace deid
