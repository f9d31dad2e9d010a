#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wwf {

struct Rgb {
    double r = 0.0, g = 0.0, b = 0.0;

    Rgb operator+(const Rgb& o) const { return {r + o.r, g + o.g, b + o.b}; }
    Rgb operator*(const Rgb& o) const { return {r * o.r, g * o.g, b * o.b}; }
    Rgb operator*(double s) const { return {r * s, g * s, b * s}; }
    Rgb& operator+=(const Rgb& o) {
        r += o.r;
        g += o.g;
        b += o.b;
        return *this;
    }
    bool operator==(const Rgb&) const = default;
};

// Linear-light float image, row 0 at the top.
class Image {
public:
    Image() = default;
    Image(int width, int height) : w_(width), h_(height), px_(static_cast<std::size_t>(width) * height) {}

    int width() const { return w_; }
    int height() const { return h_; }
    Rgb& at(int x, int y) { return px_[static_cast<std::size_t>(y) * w_ + x]; }
    const Rgb& at(int x, int y) const { return px_[static_cast<std::size_t>(y) * w_ + x]; }
    std::vector<Rgb>& pixels() { return px_; }
    const std::vector<Rgb>& pixels() const { return px_; }

    bool operator==(const Image&) const = default;

private:
    int w_ = 0, h_ = 0;
    std::vector<Rgb> px_;
};

// Portable float map (little-endian, float32 RGB).
void write_pfm(const std::string& path, const Image& img);
Image read_pfm(const std::string& path);

// 8-bit RGB PNG. With gamma > 0 values are clamped to [0,1] and encoded as
// v^(1/gamma); gamma = 0 writes the clamped values unchanged.
void write_png(const std::string& path, const Image& img, double gamma = 2.2);
void write_png_rgb8(const std::string& path, int width, int height, const std::vector<std::uint8_t>& rgb);

// Mean squared error over linear RGB; throws on size mismatch.
double image_mse(const Image& a, const Image& b);

// Per-pixel absolute error, averaged over channels, as a grey image.
Image abs_error_map(const Image& a, const Image& b);

}  // namespace wwf
