#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mapsat {

enum class ImageFormat { png, jpeg, unknown };

ImageFormat sniff_format(std::span<std::uint8_t const> bytes) noexcept;

/// File extension (without dot) for a sniffed format: "png", "jpg" or "bin".
std::string extension_for(ImageFormat f);

/// 8-bit RGBA raster, row-major.
struct Image
{
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgba;

    std::uint32_t pixel(int x, int y) const noexcept
    {
        auto const *p = &rgba[(static_cast<std::size_t>(y) * width + x) * 4];
        return (std::uint32_t{p[0]} << 24U) | (std::uint32_t{p[1]} << 16U) |
               (std::uint32_t{p[2]} << 8U) | std::uint32_t{p[3]};
    }
};

/// Decode PNG or JPEG. Throws InvalidImageError on anything else.
Image decode_image(std::span<std::uint8_t const> bytes);

/// 8-bit RGB raster, row-major, as produced by the mock tile renderer.
struct RgbImage
{
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    RgbImage() = default;
    RgbImage(int w, int h)
    : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0)
    {}

    std::uint8_t *at(int x, int y) noexcept
    {
        return &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
    }
    std::uint8_t const *at(int x, int y) const noexcept
    {
        return &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
    }
};

/**
 * Encode as 8-bit RGB PNG with fixed settings (zlib level 6, no filtering,
 * no ancillary chunks), so equal rasters give equal bytes.
 */
std::vector<std::uint8_t> encode_png(RgbImage const &img);

} // namespace mapsat
