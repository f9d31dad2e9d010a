#include "wwf/image.hpp"

#include "wwf/binary_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace wwf {

void write_pfm(const std::string& path, const Image& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "PF\n" << img.width() << " " << img.height() << "\n-1.0\n";
    // PFM stores rows bottom to top.
    for (int y = img.height() - 1; y >= 0; --y) {
        for (int x = 0; x < img.width(); ++x) {
            const Rgb& p = img.at(x, y);
            write_le(os, static_cast<float>(p.r));
            write_le(os, static_cast<float>(p.g));
            write_le(os, static_cast<float>(p.b));
        }
    }
}

Image read_pfm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    is >> magic >> w >> h >> scale;
    is.get();
    if (magic != "PF" || w <= 0 || h <= 0) throw FormatError(path + ": not an RGB PFM file");
    if (scale > 0) throw FormatError(path + ": big-endian PFM not supported");
    Image img(w, h);
    for (int y = h - 1; y >= 0; --y) {
        for (int x = 0; x < w; ++x) {
            Rgb& p = img.at(x, y);
            p.r = read_le<float>(is);
            p.g = read_le<float>(is);
            p.b = read_le<float>(is);
        }
    }
    return img;
}

void write_png_rgb8(const std::string& path, int width, int height, const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw std::invalid_argument("png buffer size");
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng failed writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(&rgb[static_cast<std::size_t>(y) * width * 3]));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_png(const std::string& path, const Image& img, double gamma) {
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(img.width()) * img.height() * 3);
    auto encode = [gamma](double v) {
        v = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
        if (gamma > 0) v = std::pow(v, 1.0 / gamma);
        return static_cast<std::uint8_t>(std::lround(v * 255.0));
    };
    std::size_t k = 0;
    for (const Rgb& p : img.pixels()) {
        rgb[k++] = encode(p.r);
        rgb[k++] = encode(p.g);
        rgb[k++] = encode(p.b);
    }
    write_png_rgb8(path, img.width(), img.height(), rgb);
}

double image_mse(const Image& a, const Image& b) {
    if (a.width() != b.width() || a.height() != b.height()) {
        std::ostringstream msg;
        msg << "image size mismatch: " << a.width() << "x" << a.height() << " vs " << b.width() << "x" << b.height();
        throw std::invalid_argument(msg.str());
    }
    if (a.pixels().empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < a.pixels().size(); ++i) {
        const Rgb& p = a.pixels()[i];
        const Rgb& q = b.pixels()[i];
        sum += (p.r - q.r) * (p.r - q.r) + (p.g - q.g) * (p.g - q.g) + (p.b - q.b) * (p.b - q.b);
    }
    return sum / (3.0 * static_cast<double>(a.pixels().size()));
}

Image abs_error_map(const Image& a, const Image& b) {
    image_mse(a, b);  // size check
    Image out(a.width(), a.height());
    for (std::size_t i = 0; i < a.pixels().size(); ++i) {
        const Rgb& p = a.pixels()[i];
        const Rgb& q = b.pixels()[i];
        const double e = (std::abs(p.r - q.r) + std::abs(p.g - q.g) + std::abs(p.b - q.b)) / 3.0;
        out.pixels()[i] = {e, e, e};
    }
    return out;
}

}  // namespace wwf
