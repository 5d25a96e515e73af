#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hicom/geometry.hpp"
#include "hicom/image.hpp"

namespace hicom {

enum class AgeClass { child = 0, middle = 1, senior = 2 };
enum class GenderClass { male = 0, female = 1 };

std::string to_string(AgeClass a);
std::string to_string(GenderClass g);
std::optional<AgeClass> age_from_string(const std::string& s);
std::optional<GenderClass> gender_from_string(const std::string& s);

enum class ModuleId { M1 = 0, M2 = 1, M3 = 2, M4 = 3 };

inline const char* module_name(ModuleId m) {
    switch (m) {
        case ModuleId::M1: return "M1";
        case ModuleId::M2: return "M2";
        case ModuleId::M3: return "M3";
        case ModuleId::M4: return "M4";
    }
    return "?";
}

// One face instance in one frame. Crops are derived on demand from the
// frame image, the box and the crop policy; they are not stored here.
struct FaceSample {
    int face_id = 0;
    FaceBox box;
    int label = 0;  // y_fa: 0 = real, 1 = fake
    std::optional<bool> gaze_locked;
    std::optional<AgeClass> age_class;
    std::optional<GenderClass> gender_class;
};

struct FrameSample {
    int frame_id = 0;
    Image image;
    std::vector<FaceSample> faces;

    // y_fr = 1 iff the frame contains any fake face.
    int frame_label() const {
        for (const auto& f : faces)
            if (f.label == 1) return 1;
        return 0;
    }
};

struct ClipSample {
    std::string clip_id;
    double fps = 25.0;
    std::vector<FrameSample> frames;
};

// Per-face output of one detector module.
struct ModuleVerdict {
    enum class Flag { real = 0, fake = 1, na = 2 };

    ModuleId module = ModuleId::M1;
    std::optional<double> score;  // fake probability, when the module scores
    Flag flag = Flag::real;

    static ModuleVerdict scored(ModuleId m, double s, double threshold) {
        return {m, s, s >= threshold ? Flag::fake : Flag::real};
    }
    static ModuleVerdict flagged(ModuleId m, bool fake) {
        return {m, std::nullopt, fake ? Flag::fake : Flag::real};
    }
    static ModuleVerdict not_applicable(ModuleId m) { return {m, std::nullopt, Flag::na}; }
};

struct AblationRow {
    std::string modules;  // "M1", "M1+M2", ...
    std::optional<double> fac, fau, fcac, fcau;
};

struct MetricsReport {
    std::optional<double> fac, fau, fcac, fcau;
    long n_faces = 0;
    long n_frames = 0;
    std::vector<AblationRow> ablation;
};

}  // namespace hicom
