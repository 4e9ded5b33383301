#include "trirec/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>
#include <stdexcept>

namespace trirec::io {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f != nullptr) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr fp(std::fopen(path.c_str(), mode));
    if (!fp) throw std::runtime_error("cannot open file: " + path);
    return fp;
}

uint8_t to_byte(double v) {
    double c = std::clamp(v, 0.0, 1.0);
    return static_cast<uint8_t>(std::lround(c * 255.0));
}

void write_png(const std::string& path, const std::vector<uint8_t>& bytes, int height, int width,
               int color_type, int channels) {
    FilePtr fp = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng error while writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    for (int r = 0; r < height; ++r)
        rows[static_cast<size_t>(r)] =
            const_cast<png_bytep>(bytes.data() + static_cast<size_t>(r) * width * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::vector<uint8_t> read_png(const std::string& path, int& height, int& width, int want_channels) {
    FilePtr fp = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng error while reading " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_packing(png);
    png_set_strip_alpha(png);
    int color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (want_channels == 3) {
        if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
    } else {
        if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
            color_type == PNG_COLOR_TYPE_PALETTE)
            png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    png_read_update_info(png, info);

    height = static_cast<int>(png_get_image_height(png, info));
    width = static_cast<int>(png_get_image_width(png, info));
    int channels = static_cast<int>(png_get_channels(png, info));
    if (channels != want_channels) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unexpected channel count in " + path);
    }
    std::vector<uint8_t> bytes(static_cast<size_t>(height) * width * channels);
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    for (int r = 0; r < height; ++r)
        rows[static_cast<size_t>(r)] = bytes.data() + static_cast<size_t>(r) * width * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return bytes;
}

}  // namespace

void save_png_rgb(const std::string& path, const std::vector<Vec3>& rgb, int height, int width) {
    if (static_cast<size_t>(height) * width != rgb.size())
        throw std::invalid_argument("save_png_rgb: size mismatch");
    std::vector<uint8_t> bytes(rgb.size() * 3);
    for (size_t i = 0; i < rgb.size(); ++i) {
        bytes[3 * i + 0] = to_byte(rgb[i].x);
        bytes[3 * i + 1] = to_byte(rgb[i].y);
        bytes[3 * i + 2] = to_byte(rgb[i].z);
    }
    write_png(path, bytes, height, width, PNG_COLOR_TYPE_RGB, 3);
}

std::vector<Vec3> load_png_rgb(const std::string& path, int& height, int& width) {
    std::vector<uint8_t> bytes = read_png(path, height, width, 3);
    std::vector<Vec3> rgb(bytes.size() / 3);
    for (size_t i = 0; i < rgb.size(); ++i)
        rgb[i] = Vec3(bytes[3 * i] / 255.0, bytes[3 * i + 1] / 255.0, bytes[3 * i + 2] / 255.0);
    return rgb;
}

void save_png_gray(const std::string& path, const std::vector<uint8_t>& gray, int height,
                   int width) {
    if (static_cast<size_t>(height) * width != gray.size())
        throw std::invalid_argument("save_png_gray: size mismatch");
    std::vector<uint8_t> bytes(gray.size());
    for (size_t i = 0; i < gray.size(); ++i) bytes[i] = gray[i] != 0 ? 255 : 0;
    write_png(path, bytes, height, width, PNG_COLOR_TYPE_GRAY, 1);
}

std::vector<uint8_t> load_png_gray(const std::string& path, int& height, int& width) {
    std::vector<uint8_t> bytes = read_png(path, height, width, 1);
    for (uint8_t& b : bytes) b = b >= 128 ? 1 : 0;
    return bytes;
}

void save_f32(const std::string& path, const std::vector<double>& data) {
    FilePtr fp = open_file(path, "wb");
    std::vector<float> buf(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        double v = data[i];
        buf[i] = std::isfinite(v) ? static_cast<float>(v)
                                  : std::numeric_limits<float>::infinity();
    }
    if (!buf.empty() && std::fwrite(buf.data(), sizeof(float), buf.size(), fp.get()) != buf.size())
        throw std::runtime_error("short write: " + path);
}

std::vector<double> load_f32(const std::string& path) {
    FilePtr fp = open_file(path, "rb");
    std::fseek(fp.get(), 0, SEEK_END);
    long nbytes = std::ftell(fp.get());
    std::fseek(fp.get(), 0, SEEK_SET);
    if (nbytes < 0 || nbytes % static_cast<long>(sizeof(float)) != 0)
        throw std::runtime_error("bad f32 file size: " + path);
    size_t n = static_cast<size_t>(nbytes) / sizeof(float);
    std::vector<float> buf(n);
    if (n > 0 && std::fread(buf.data(), sizeof(float), n, fp.get()) != n)
        throw std::runtime_error("short read: " + path);
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = buf[i];
    return out;
}

void save_f32_vec3(const std::string& path, const std::vector<Vec3>& data) {
    std::vector<double> flat;
    flat.reserve(data.size() * 3);
    for (const Vec3& v : data) {
        flat.push_back(v.x);
        flat.push_back(v.y);
        flat.push_back(v.z);
    }
    save_f32(path, flat);
}

std::vector<Vec3> load_f32_vec3(const std::string& path) {
    std::vector<double> flat = load_f32(path);
    if (flat.size() % 3 != 0) throw std::runtime_error("f32 file not a multiple of 3: " + path);
    std::vector<Vec3> out(flat.size() / 3);
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = Vec3(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]);
    return out;
}

}  // namespace trirec::io
