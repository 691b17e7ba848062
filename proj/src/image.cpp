#include "mapsat/image.hpp"

#include "mapsat/errors.hpp"

#include <png.h>

// jpeglib.h needs FILE and size_t declared first.
#include <cstdio>
#include <jpeglib.h>

#include <csetjmp>
#include <cstring>

namespace mapsat {

ImageFormat sniff_format(std::span<std::uint8_t const> bytes) noexcept
{
    static constexpr std::uint8_t png_sig[8] = {0x89, 'P', 'N', 'G',
                                                0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), png_sig, 8) == 0) {
        return ImageFormat::png;
    }
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 &&
        bytes[2] == 0xFF) {
        return ImageFormat::jpeg;
    }
    return ImageFormat::unknown;
}

std::string extension_for(ImageFormat f)
{
    switch (f) {
    case ImageFormat::png:
        return "png";
    case ImageFormat::jpeg:
        return "jpg";
    case ImageFormat::unknown:
        break;
    }
    return "bin";
}

namespace {

Image decode_png(std::span<std::uint8_t const> bytes)
{
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()) == 0) {
        std::string msg = img.message;
        png_image_free(&img);
        throw InvalidImageError{"PNG header: " + msg};
    }
    img.format = PNG_FORMAT_RGBA;
    Image out;
    out.width = static_cast<int>(img.width);
    out.height = static_cast<int>(img.height);
    out.rgba.resize(PNG_IMAGE_SIZE(img));
    if (png_image_finish_read(&img, nullptr, out.rgba.data(), 0, nullptr) == 0) {
        std::string msg = img.message;
        png_image_free(&img);
        throw InvalidImageError{"PNG data: " + msg};
    }
    png_image_free(&img);
    return out;
}

struct JpegErrorManager
{
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

extern "C" void jpeg_error_exit(j_common_ptr cinfo)
{
    auto *err = reinterpret_cast<JpegErrorManager *>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

// Any warning (e.g. premature end of data) is treated as corruption.
extern "C" void jpeg_emit_message(j_common_ptr cinfo, int level)
{
    if (level < 0) {
        jpeg_error_exit(cinfo);
    }
}

Image decode_jpeg(std::span<std::uint8_t const> bytes)
{
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    err.base.emit_message = jpeg_emit_message;

    // Declared before setjmp so longjmp does not skip their construction.
    Image out;
    std::vector<std::uint8_t> row;

    if (setjmp(err.jump) != 0) {
        jpeg_destroy_decompress(&cinfo);
        throw InvalidImageError{std::string{"JPEG: "} + err.message};
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    out.width = static_cast<int>(cinfo.output_width);
    out.height = static_cast<int>(cinfo.output_height);
    out.rgba.resize(static_cast<std::size_t>(out.width) * out.height * 4);
    row.resize(static_cast<std::size_t>(out.width) * cinfo.output_components);
    while (cinfo.output_scanline < cinfo.output_height) {
        auto const y = cinfo.output_scanline;
        JSAMPROW rows[1] = {row.data()};
        jpeg_read_scanlines(&cinfo, rows, 1);
        for (int x = 0; x < out.width; ++x) {
            auto *dst = &out.rgba[(static_cast<std::size_t>(y) * out.width + x) * 4];
            auto const *src = &row[static_cast<std::size_t>(x) * 3];
            dst[0] = src[0];
            dst[1] = src[1];
            dst[2] = src[2];
            dst[3] = 255;
        }
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return out;
}

struct PngWriteState
{
    std::vector<std::uint8_t> *out;
};

extern "C" void png_write_to_vector(png_structp png, png_bytep data,
                                    png_size_t length)
{
    auto *state = static_cast<PngWriteState *>(png_get_io_ptr(png));
    state->out->insert(state->out->end(), data, data + length);
}

extern "C" void png_flush_noop(png_structp) {}

extern "C" void png_throwing_error(png_structp png, png_const_charp msg)
{
    (void)msg;
    png_longjmp(png, 1);
}

} // namespace

Image decode_image(std::span<std::uint8_t const> bytes)
{
    switch (sniff_format(bytes)) {
    case ImageFormat::png:
        return decode_png(bytes);
    case ImageFormat::jpeg:
        return decode_jpeg(bytes);
    case ImageFormat::unknown:
        break;
    }
    throw InvalidImageError{"bytes are neither PNG nor JPEG"};
}

std::vector<std::uint8_t> encode_png(RgbImage const &img)
{
    std::vector<std::uint8_t> out;
    PngWriteState state{&out};

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              png_throwing_error, nullptr);
    if (png == nullptr) {
        throw Error{"png_create_write_struct failed"};
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw Error{"png_create_info_struct failed"};
    }
    if (setjmp(png_jmpbuf(png)) != 0) {
        png_destroy_write_struct(&png, &info);
        throw Error{"PNG encoding failed"};
    }

    png_set_write_fn(png, &state, png_write_to_vector, png_flush_noop);
    png_set_compression_level(png, 6);
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_BASE,
                 PNG_FILTER_TYPE_BASE);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(img.at(0, y)));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

} // namespace mapsat
