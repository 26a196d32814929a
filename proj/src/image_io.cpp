#include "msbench/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace msbench {

namespace {

bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

uint8_t quantize(float v) {
    float q = clamp01(v) * 255.0f + 0.5f;
    return static_cast<uint8_t>(q > 255.0f ? 255.0f : q);
}

Image load_pnm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("MissingFile", "cannot open " + path);
    std::string magic;
    f >> magic;
    int channels;
    if (magic == "P5")
        channels = 1;
    else if (magic == "P6")
        channels = 3;
    else
        throw Error("ParseError", path + ": unsupported PNM magic '" + magic + "'");

    auto next_token = [&f, &path]() -> long {
        // skip whitespace and '#' comments
        for (;;) {
            int c = f.peek();
            if (c == '#') {
                std::string line;
                std::getline(f, line);
            } else if (std::isspace(c)) {
                f.get();
            } else {
                break;
            }
        }
        long v;
        if (!(f >> v)) throw Error("ParseError", path + ": bad PNM header");
        return v;
    };
    long w = next_token(), h = next_token(), maxval = next_token();
    if (w <= 0 || h <= 0 || maxval != 255)
        throw Error("ParseError", path + ": only 8-bit PNM supported");
    f.get();  // single whitespace before raster

    Image im(static_cast<int>(h), static_cast<int>(w), channels);
    std::vector<uint8_t> raw(im.size());
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(f.gcount()) != raw.size())
        throw Error("ParseError", path + ": truncated PNM raster");
    for (size_t i = 0; i < raw.size(); ++i) im.data[i] = raw[i] / 255.0f;
    return im;
}

void save_pnm(const Image& im, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("IoError", "cannot write " + path);
    f << (im.channels == 1 ? "P5" : "P6") << "\n"
      << im.width << " " << im.height << "\n255\n";
    std::vector<uint8_t> raw(im.size());
    for (size_t i = 0; i < raw.size(); ++i) raw[i] = quantize(im.data[i]);
    f.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};

Image load_png(const std::string& path) {
    std::unique_ptr<FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw Error("MissingFile", "cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("ParseError", path + ": libpng failure");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color = png_get_color_type(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("ParseError", path + ": unsupported channel count");
    }

    Image im(static_cast<int>(h), static_cast<int>(w), channels);
    std::vector<uint8_t> raw(im.size());
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = raw.data() + static_cast<size_t>(y) * w * channels;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    for (size_t i = 0; i < raw.size(); ++i) im.data[i] = raw[i] / 255.0f;
    return im;
}

void save_png(const Image& im, const std::string& path) {
    std::unique_ptr<FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw Error("IoError", "cannot write " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("IoError", path + ": libpng failure");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, im.width, im.height, 8,
                 im.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> raw(im.size());
    for (size_t i = 0; i < raw.size(); ++i) raw[i] = quantize(im.data[i]);
    std::vector<png_bytep> rows(im.height);
    for (int y = 0; y < im.height; ++y)
        rows[y] = raw.data() + static_cast<size_t>(y) * im.width * im.channels;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

Image load_image(const std::string& path) {
    if (has_suffix(path, ".png")) return load_png(path);
    if (has_suffix(path, ".pgm") || has_suffix(path, ".ppm")) return load_pnm(path);
    throw Error("ParseError", path + ": unsupported image extension");
}

void save_image(const Image& im, const std::string& path) {
    if (im.channels != 1 && im.channels != 3)
        throw Error("ChannelMismatch", "can only save 1- or 3-channel images");
    if (has_suffix(path, ".png")) {
        save_png(im, path);
    } else if (has_suffix(path, ".pgm")) {
        if (im.channels != 1) throw Error("ChannelMismatch", "PGM is single-channel");
        save_pnm(im, path);
    } else if (has_suffix(path, ".ppm")) {
        if (im.channels != 3) throw Error("ChannelMismatch", "PPM is three-channel");
        save_pnm(im, path);
    } else {
        throw Error("ParseError", path + ": unsupported image extension");
    }
}

}  // namespace msbench
