#pragma once

#include <algorithm>

namespace hicom {

// Axis-aligned face box in pixel coordinates, (x, y) = top-left corner.
struct FaceBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double x2() const { return x + w; }
    double y2() const { return y + h; }
    double area() const { return w * h; }
    double cx() const { return x + 0.5 * w; }
    double cy() const { return y + 0.5 * h; }

    bool valid() const { return w > 0.0 && h > 0.0; }

    // Intersect with the frame rectangle [0,frame_w) x [0,frame_h).
    FaceBox clamped(int frame_h, int frame_w) const {
        double nx = std::clamp(x, 0.0, static_cast<double>(frame_w));
        double ny = std::clamp(y, 0.0, static_cast<double>(frame_h));
        double nx2 = std::clamp(x2(), 0.0, static_cast<double>(frame_w));
        double ny2 = std::clamp(y2(), 0.0, static_cast<double>(frame_h));
        return {nx, ny, nx2 - nx, ny2 - ny};
    }

    // Same centre, width and height scaled by f.
    FaceBox dilated(double f) const {
        return {cx() - 0.5 * w * f, cy() - 0.5 * h * f, w * f, h * f};
    }
};

inline double intersection_area(const FaceBox& a, const FaceBox& b) {
    double ix = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x, b.x));
    double iy = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y, b.y));
    return ix * iy;
}

inline double iou(const FaceBox& a, const FaceBox& b) {
    double inter = intersection_area(a, b);
    double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace hicom
