#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>

#include "nocs/io.hpp"

namespace nocs::io {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

template <typename T>
Image<T> read_png_impl(const std::string& path, int expected_bit_depth) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw ParseError("png: cannot open " + path);

    Image<T> img;
    std::vector<png_bytep> rows;

    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw ParseError("png: allocation failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw ParseError("png: allocation failed");
    if (setjmp(png_jmpbuf(r.png))) throw ParseError("png: failed to decode " + path);

    png_init_io(r.png, file.get());
    png_read_info(r.png, r.info);

    const int bit_depth = png_get_bit_depth(r.png, r.info);
    const int color_type = png_get_color_type(r.png, r.info);
    if (bit_depth != expected_bit_depth)
        throw ParseError("png: " + path + " has bit depth " + std::to_string(bit_depth) +
                         ", expected " + std::to_string(expected_bit_depth));
    if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB)
        throw ParseError("png: " + path + " must be grayscale or RGB without alpha");

    if (bit_depth == 16) png_set_swap(r.png);  // files are big-endian
    png_read_update_info(r.png, r.info);

    img.width = static_cast<int>(png_get_image_width(r.png, r.info));
    img.height = static_cast<int>(png_get_image_height(r.png, r.info));
    img.channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
    img.data.resize(static_cast<size_t>(img.width) * img.height * img.channels);

    rows.resize(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = reinterpret_cast<png_bytep>(img.data.data() +
                                              static_cast<size_t>(y) * img.width * img.channels);
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return img;
}

template <typename T>
void write_png_impl(const std::string& path, const Image<T>& img, int bit_depth) {
    if (img.width <= 0 || img.height <= 0 ||
        (img.channels != 1 && img.channels != 3))
        throw InvalidInputError("png: image must be 1 or 3 channels and nonempty");

    const std::string tmp = path + ".tmp";
    {
        FilePtr file(std::fopen(tmp.c_str(), "wb"));
        if (!file) throw ParseError("png: cannot create " + tmp);

        std::vector<png_bytep> rows(img.height);
        for (int y = 0; y < img.height; ++y)
            rows[y] = reinterpret_cast<png_bytep>(
                const_cast<T*>(img.data.data()) +
                static_cast<size_t>(y) * img.width * img.channels);

        PngWriter w;
        w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!w.png) throw ParseError("png: allocation failed");
        w.info = png_create_info_struct(w.png);
        if (!w.info) throw ParseError("png: allocation failed");
        if (setjmp(png_jmpbuf(w.png))) throw ParseError("png: failed to encode " + path);

        png_init_io(w.png, file.get());
        png_set_IHDR(w.png, w.info, img.width, img.height, bit_depth,
                     img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(w.png, w.info);
        if (bit_depth == 16) png_set_swap(w.png);

        png_write_image(w.png, rows.data());
        png_write_end(w.png, nullptr);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

Image<uint16_t> read_png16(const std::string& path) {
    return read_png_impl<uint16_t>(path, 16);
}

Image<uint8_t> read_png8(const std::string& path) {
    return read_png_impl<uint8_t>(path, 8);
}

void write_png16(const std::string& path, const Image<uint16_t>& img) {
    write_png_impl(path, img, 16);
}

void write_png8(const std::string& path, const Image<uint8_t>& img) {
    write_png_impl(path, img, 8);
}

DepthMap read_depth_png(const std::string& path) {
    Image<uint16_t> img = read_png16(path);
    if (img.channels != 1) throw ParseError("depth png must be single-channel: " + path);
    return img;
}

void write_depth_png(const std::string& path, const DepthMap& depth) {
    write_png16(path, depth);
}

InstanceMask read_mask_png(const std::string& path) {
    Image<uint8_t> img = read_png8(path);
    if (img.channels != 1) throw ParseError("mask png must be single-channel: " + path);
    return img;
}

void write_mask_png(const std::string& path, const InstanceMask& mask) {
    write_png8(path, mask);
}

Image<uint16_t> encode_nocs16(const NocsMap& map) {
    Image<uint16_t> img(map.width, map.height, 3, 0);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            if (!map.is_valid(x, y)) continue;
            const size_t i = (static_cast<size_t>(y) * map.width + x) * 3;
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) =
                    static_cast<uint16_t>(std::lround(map.xyz[i + c] * 65535.0));
        }
    }
    return img;
}

NocsMap decode_nocs16(const Image<uint16_t>& img, const InstanceMask& validity) {
    if (img.channels != 3) throw ParseError("nocs image must have 3 channels");
    if (!validity.same_size(img.width, img.height))
        throw InvalidInputError("nocs decode: validity mask size mismatch");
    NocsMap map(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (validity.at(x, y) == 0) continue;
            map.set_valid(x, y, true);
            map.set_value(x, y,
                          Eigen::Vector3d(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)) /
                              65535.0);
        }
    }
    return map;
}

NocsMap read_nocs_png(const std::string& path, const InstanceMask& validity) {
    return decode_nocs16(read_png16(path), validity);
}

void write_nocs_png(const std::string& path, const NocsMap& map) {
    write_png16(path, encode_nocs16(map));
}

}  // namespace nocs::io
