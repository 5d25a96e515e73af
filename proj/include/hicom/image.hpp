#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hicom {

// Planar RGB raster, values in [0,1]. Channel plane c starts at data[c*h*w].
struct Image {
    int h = 0;
    int w = 0;
    std::vector<double> data;  // size 3*h*w

    Image() = default;
    Image(int height, int width, double fill = 0.0)
        : h(height), w(width), data(static_cast<size_t>(3) * height * width, fill) {}

    double& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * h + y) * w + x]; }
    double at(int c, int y, int x) const { return data[(static_cast<size_t>(c) * h + y) * w + x]; }

    bool empty() const { return h == 0 || w == 0; }
    size_t pixels() const { return static_cast<size_t>(h) * w; }

    void fill(double r, double g, double b);
    void clamp01();
};

// Compact byte form used for in-memory dataset caches.
struct ImageU8 {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> data;  // planar, 3*h*w
};

ImageU8 to_u8(const Image& img);
Image from_u8(const ImageU8& img);

// Binary PPM (P6, maxval 255). Quantizes on write.
void write_ppm(const Image& img, const std::string& path);
Image read_ppm(const std::string& path);
ImageU8 read_ppm_u8(const std::string& path);

// Bilinear sample of one channel at continuous (x, y); coordinates are
// clamped to the valid range (replicate border).
double sample_bilinear(const Image& img, int c, double y, double x);

// Bilinear resize to out_h x out_w.
Image resize_bilinear(const Image& img, int out_h, int out_w);

// Resample the axis-aligned source rectangle [x0,x0+bw) x [y0,y0+bh)
// (continuous coords) onto an out_h x out_w grid, sampling cell centres.
Image resample_rect(const Image& img, double x0, double y0, double bw, double bh,
                    int out_h, int out_w);

// Separable Gaussian blur of the whole image, kernel truncated at 3 sigma,
// replicate border. sigma <= 0 returns the input unchanged.
Image gaussian_blur(const Image& img, double sigma);

}  // namespace hicom
