#include "hicom/crops.hpp"

#include <stdexcept>
#include <string>

namespace hicom {

namespace {

void check_box(const Image& frame, const FaceBox& box, double min_px, const char* what) {
    FaceBox c = box.clamped(frame.h, frame.w);
    if (c.w < min_px || c.h < min_px)
        throw std::invalid_argument(std::string(what) + ": degenerate face box (" +
                                    std::to_string(c.w) + "x" + std::to_string(c.h) + " px)");
}

Image crop_region(const Image& frame, const FaceBox& region, int out_size) {
    FaceBox c = region.clamped(frame.h, frame.w);
    return resample_rect(frame, c.x, c.y, c.w, c.h, out_size, out_size);
}

}  // namespace

FaceBox eye_region(const FaceBox& face) {
    CropPolicy defaults;
    double dx = face.w * defaults.eye_lateral_expand;
    return {face.x - dx, face.y, face.w + 2.0 * dx, face.h * defaults.eye_top_fraction};
}

FaceBox body_region(const FaceBox& face) {
    CropPolicy defaults;
    double bw = face.w * defaults.body_width_factor;
    return {face.cx() - 0.5 * bw, face.y, bw, face.h * defaults.body_height_factor};
}

Image crop_face(const Image& frame, const FaceBox& box, const CropPolicy& policy) {
    check_box(frame, box, policy.min_box_px, "crop_face");
    return crop_region(frame, box, policy.face_size);
}

Image crop_eyes(const Image& frame, const FaceBox& box, const CropPolicy& policy) {
    check_box(frame, box, policy.min_box_px, "crop_eyes");
    double dx = box.w * policy.eye_lateral_expand;
    FaceBox eyes{box.x - dx, box.y, box.w + 2.0 * dx, box.h * policy.eye_top_fraction};
    return crop_region(frame, eyes, policy.eye_size);
}

Image crop_body(const Image& frame, const FaceBox& box, const CropPolicy& policy) {
    check_box(frame, box, policy.min_box_px, "crop_body");
    double bw = box.w * policy.body_width_factor;
    FaceBox body{box.cx() - 0.5 * bw, box.y, bw, box.h * policy.body_height_factor};
    return crop_region(frame, body, policy.body_size);
}

FaceBox face_box_in_body_crop(const Image& frame, const FaceBox& box, const CropPolicy& policy) {
    double bw = box.w * policy.body_width_factor;
    FaceBox body = FaceBox{box.cx() - 0.5 * bw, box.y, bw, box.h * policy.body_height_factor}
                       .clamped(frame.h, frame.w);
    FaceBox face = box.clamped(frame.h, frame.w);
    double sx = policy.body_size / body.w;
    double sy = policy.body_size / body.h;
    return {(face.x - body.x) * sx, (face.y - body.y) * sy, face.w * sx, face.h * sy};
}

}  // namespace hicom
