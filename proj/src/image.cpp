#include "hicom/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace hicom {

void Image::fill(double r, double g, double b) {
    const double v[3] = {r, g, b};
    for (int c = 0; c < 3; ++c)
        std::fill(data.begin() + static_cast<size_t>(c) * pixels(),
                  data.begin() + static_cast<size_t>(c + 1) * pixels(), v[c]);
}

void Image::clamp01() {
    for (double& v : data) v = std::clamp(v, 0.0, 1.0);
}

ImageU8 to_u8(const Image& img) {
    ImageU8 out;
    out.h = img.h;
    out.w = img.w;
    out.data.resize(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        double v = std::clamp(img.data[i], 0.0, 1.0);
        out.data[i] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

Image from_u8(const ImageU8& img) {
    Image out(img.h, img.w);
    for (size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i] / 255.0;
    return out;
}

void write_ppm(const Image& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
    f << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(img.w) * 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                row[static_cast<size_t>(x) * 3 + c] = static_cast<uint8_t>(std::lround(v * 255.0));
            }
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw std::runtime_error("write_ppm: write failed for " + path);
}

namespace {

void read_ppm_header(std::ifstream& f, const std::string& path, int& w, int& h) {
    std::string magic;
    f >> magic;
    if (magic != "P6") throw std::runtime_error("read_ppm: not a P6 file: " + path);
    int maxval = 0;
    // Header tokens may be separated by whitespace or comment lines.
    auto next_int = [&f, &path]() {
        for (;;) {
            int ch = f.peek();
            if (ch == '#') {
                std::string line;
                std::getline(f, line);
            } else if (std::isspace(ch)) {
                f.get();
            } else {
                break;
            }
        }
        int v = -1;
        f >> v;
        if (v < 0) throw std::runtime_error("read_ppm: bad header in " + path);
        return v;
    };
    w = next_int();
    h = next_int();
    maxval = next_int();
    if (maxval != 255) throw std::runtime_error("read_ppm: unsupported maxval in " + path);
    f.get();  // single whitespace before raster
}

}  // namespace

ImageU8 read_ppm_u8(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_ppm: cannot open " + path);
    int w = 0, h = 0;
    read_ppm_header(f, path, w, h);
    std::vector<uint8_t> raw(static_cast<size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (f.gcount() != static_cast<std::streamsize>(raw.size()))
        throw std::runtime_error("read_ppm: truncated raster in " + path);
    ImageU8 img;
    img.h = h;
    img.w = w;
    img.data.resize(raw.size());
    // interleaved -> planar
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.data[(static_cast<size_t>(c) * h + y) * w + x] =
                    raw[(static_cast<size_t>(y) * w + x) * 3 + c];
    return img;
}

Image read_ppm(const std::string& path) { return from_u8(read_ppm_u8(path)); }

double sample_bilinear(const Image& img, int c, double y, double x) {
    x = std::clamp(x, 0.0, static_cast<double>(img.w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.h - 1));
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    int x1 = std::min(x0 + 1, img.w - 1);
    int y1 = std::min(y0 + 1, img.h - 1);
    double fx = x - x0, fy = y - y0;
    double v00 = img.at(c, y0, x0), v01 = img.at(c, y0, x1);
    double v10 = img.at(c, y1, x0), v11 = img.at(c, y1, x1);
    return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

Image resample_rect(const Image& img, double x0, double y0, double bw, double bh,
                    int out_h, int out_w) {
    Image out(out_h, out_w);
    for (int c = 0; c < 3; ++c)
        for (int oy = 0; oy < out_h; ++oy)
            for (int ox = 0; ox < out_w; ++ox) {
                double sx = x0 + (ox + 0.5) * bw / out_w - 0.5;
                double sy = y0 + (oy + 0.5) * bh / out_h - 0.5;
                out.at(c, oy, ox) = sample_bilinear(img, c, sy, sx);
            }
    return out;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    return resample_rect(img, 0.0, 0.0, img.w, img.h, out_h, out_w);
}

Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0.0) return img;
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    Image tmp(img.h, img.w), out(img.h, img.w);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    int xi = std::clamp(x + i, 0, img.w - 1);
                    acc += kernel[i + radius] * img.at(c, y, xi);
                }
                tmp.at(c, y, x) = acc;
            }
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    int yi = std::clamp(y + i, 0, img.h - 1);
                    acc += kernel[i + radius] * tmp.at(c, yi, x);
                }
                out.at(c, y, x) = acc;
            }
    }
    return out;
}

}  // namespace hicom
