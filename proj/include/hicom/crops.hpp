#pragma once

#include "hicom/geometry.hpp"
#include "hicom/image.hpp"

namespace hicom {

// Geometry ratios and output sizes for the derived per-face crops.
// Ratios are fixed defaults, overridable through module configs.
struct CropPolicy {
    int face_size = 224;
    int eye_size = 224;
    int body_size = 224;
    double eye_top_fraction = 0.4;    // eye region = upper fraction of face box
    double eye_lateral_expand = 0.1;  // widened by this fraction on each side
    double body_width_factor = 3.0;   // body box = face box widened 3x ...
    double body_height_factor = 5.0;  // ... extended 5x downward from face top
    double min_box_px = 4.0;          // boxes smaller than this are unusable
};

// Derived regions, before frame clamping.
FaceBox eye_region(const FaceBox& face);
FaceBox body_region(const FaceBox& face);

// Deterministic crops resampled to the policy's output size. The source
// box is clamped to the frame; a sub-minimum box throws.
Image crop_face(const Image& frame, const FaceBox& box, const CropPolicy& policy);
Image crop_eyes(const Image& frame, const FaceBox& box, const CropPolicy& policy);
Image crop_body(const Image& frame, const FaceBox& box, const CropPolicy& policy);

// Location of the (clamped) face box inside the body crop's pixel grid.
FaceBox face_box_in_body_crop(const Image& frame, const FaceBox& box, const CropPolicy& policy);

}  // namespace hicom
