#include "hicom/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "hicom/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hicom {

const char* anomaly_name(AnomalyKind k) {
    switch (k) {
        case AnomalyKind::motion_jitter: return "motion_jitter";
        case AnomalyKind::appearance_mismatch: return "appearance_mismatch";
        case AnomalyKind::gaze_outlier: return "gaze_outlier";
        case AnomalyKind::body_face_mismatch: return "body_face_mismatch";
    }
    return "?";
}

const char* perturbation_name(PerturbationKind k) {
    switch (k) {
        case PerturbationKind::color_manipulation: return "color_manipulation";
        case PerturbationKind::edge_manipulation: return "edge_manipulation";
        case PerturbationKind::blockwise_distortion: return "blockwise_distortion";
        case PerturbationKind::image_corruption: return "image_corruption";
        case PerturbationKind::convolution_mask: return "convolution_mask";
        case PerturbationKind::external_effects: return "external_effects";
    }
    return "?";
}

namespace {

struct Rgb {
    double r, g, b;
};

// Rotation of the color vector about the gray axis.
struct HueRotation {
    double m[3][3];

    explicit HueRotation(double theta) {
        const double c = std::cos(theta), s = std::sin(theta);
        const double a = (1.0 - c) / 3.0;
        const double t = s / std::sqrt(3.0);
        m[0][0] = c + a;     m[0][1] = a - t;     m[0][2] = a + t;
        m[1][0] = a + t;     m[1][1] = c + a;     m[1][2] = a - t;
        m[2][0] = a - t;     m[2][1] = a + t;     m[2][2] = c + a;
    }

    Rgb apply(const Rgb& in) const {
        return {m[0][0] * in.r + m[0][1] * in.g + m[0][2] * in.b,
                m[1][0] * in.r + m[1][1] * in.g + m[1][2] * in.b,
                m[2][0] * in.r + m[2][1] * in.g + m[2][2] * in.b};
    }
};

Rgb scale(const Rgb& c, double k) { return {c.r * k, c.g * k, c.b * k}; }

void put_pixel(Image& img, int x, int y, const Rgb& c) {
    if (x < 0 || x >= img.w || y < 0 || y >= img.h) return;
    img.at(0, y, x) = c.r;
    img.at(1, y, x) = c.g;
    img.at(2, y, x) = c.b;
}

void fill_ellipse(Image& img, double cx, double cy, double rx, double ry, const Rgb& c) {
    int x0 = std::max(0, static_cast<int>(std::floor(cx - rx)));
    int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(cx + rx)));
    int y0 = std::max(0, static_cast<int>(std::floor(cy - ry)));
    int y1 = std::min(img.h - 1, static_cast<int>(std::ceil(cy + ry)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            double dx = (x - cx) / rx, dy = (y - cy) / ry;
            if (dx * dx + dy * dy <= 1.0) put_pixel(img, x, y, c);
        }
}

void fill_rect(Image& img, double x0, double y0, double x1, double y1, const Rgb& c) {
    int ix0 = std::max(0, static_cast<int>(std::floor(x0)));
    int ix1 = std::min(img.w - 1, static_cast<int>(std::ceil(x1) - 1));
    int iy0 = std::max(0, static_cast<int>(std::floor(y0)));
    int iy1 = std::min(img.h - 1, static_cast<int>(std::ceil(y1) - 1));
    for (int y = iy0; y <= iy1; ++y)
        for (int x = ix0; x <= ix1; ++x) put_pixel(img, x, y, c);
}

// Vertical trapezoid: half-width interpolates linearly from top to bottom.
void fill_trapezoid(Image& img, double cx, double y_top, double y_bot, double half_top,
                    double half_bot, const Rgb& c) {
    int iy0 = std::max(0, static_cast<int>(std::floor(y_top)));
    int iy1 = std::min(img.h - 1, static_cast<int>(std::ceil(y_bot) - 1));
    for (int y = iy0; y <= iy1; ++y) {
        double f = std::clamp((y - y_top) / std::max(1e-9, y_bot - y_top), 0.0, 1.0);
        double half = half_top + f * (half_bot - half_top);
        int x0 = std::max(0, static_cast<int>(std::floor(cx - half)));
        int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(cx + half) - 1));
        for (int x = x0; x <= x1; ++x) put_pixel(img, x, y, c);
    }
}

struct FacePlacement {
    double cx, cy, rx, ry;
};

FaceBox face_box_of(const FacePlacement& p) {
    return {p.cx - 1.15 * p.rx, p.cy - 1.3 * p.ry, 2.3 * p.rx, 2.4 * p.ry};
}

FacePlacement placement_at(const FaceSpec& f, int t) {
    FacePlacement p;
    p.cx = f.cx0 + f.vx * t + f.osc_amp * std::sin(f.osc_freq * t + f.osc_phase);
    p.cy = f.cy0 + f.vy * t + 0.6 * f.osc_amp * std::cos(f.osc_freq * t + f.osc_phase);
    p.rx = f.head_rx;
    p.ry = f.head_ry;
    if (f.jitter_amp > 0.0) {
        Rng jr(mix_seed(f.jitter_seed, static_cast<uint64_t>(t)));
        p.cx += jr.uniform(-f.jitter_amp, f.jitter_amp);
        p.cy += jr.uniform(-f.jitter_amp, f.jitter_amp);
        double flicker = 1.0 + jr.uniform(-0.12, 0.12);
        p.rx *= flicker;
        p.ry *= flicker;
    }
    return p;
}

struct BackgroundField {
    double base[3];
    double a1, kx1, ky1, ph1;
    double a2, kx2, ky2, ph2;

    static BackgroundField sample(Rng& rng) {
        BackgroundField f;
        for (double& b : f.base) b = 0.42 + rng.uniform() * 0.16;
        f.a1 = 0.05 + rng.uniform() * 0.05;
        f.kx1 = rng.uniform(0.02, 0.08);
        f.ky1 = rng.uniform(0.02, 0.08);
        f.ph1 = rng.uniform(0.0, 6.28);
        f.a2 = 0.04 + rng.uniform() * 0.04;
        f.kx2 = rng.uniform(0.08, 0.2);
        f.ky2 = rng.uniform(0.08, 0.2);
        f.ph2 = rng.uniform(0.0, 6.28);
        return f;
    }

    double value(int c, double x, double y) const {
        return base[c] + a1 * std::sin(kx1 * x + ky1 * y + ph1 + 0.8 * c) +
               a2 * std::sin(kx2 * x - ky2 * y + ph2 + 1.3 * c);
    }
};

void render_face(Image& img, const SceneSpec& spec, const FaceSpec& f, int t,
                 const HueRotation& scene_rot) {
    FacePlacement p = placement_at(f, t);
    const double gain = spec.scene_gain * f.illum;
    HueRotation face_rot(spec.scene_hue + f.hue);

    auto face_color = [&](Rgb c) { return scale(face_rot.apply(c), gain); };
    auto scene_color = [&](Rgb c) { return scale(scene_rot.apply(c), spec.scene_gain); };

    // torso (body cues) behind the head
    const double shoulder_y = p.cy + 1.15 * p.ry;
    const double torso_h = 2.2 * p.ry;
    double half_top, half_bot;
    if (f.gender_body == GenderClass::male) {
        half_top = 1.55 * p.rx;
        half_bot = 1.2 * p.rx;
    } else {
        half_top = 0.8 * p.rx;
        half_bot = 1.75 * p.rx;
    }
    Rgb clothing = scene_color({0.24, 0.34, 0.58});
    fill_trapezoid(img, p.cx, shoulder_y, shoulder_y + torso_h, half_top, half_bot, clothing);

    // age stripes on the torso: child 0, middle 1, senior 2
    int stripes = static_cast<int>(f.age_body);
    Rgb stripe_color = scene_color({0.92, 0.85, 0.25});
    for (int s = 0; s < stripes; ++s) {
        double fy = 0.3 + 0.3 * s;
        double y0 = shoulder_y + fy * torso_h;
        double half = half_top + fy * (half_bot - half_top);
        fill_rect(img, p.cx - half, y0, p.cx + half, y0 + std::max(2.0, 0.18 * torso_h),
                  stripe_color);
    }

    // head
    fill_ellipse(img, p.cx, p.cy, p.rx, p.ry, face_color({0.85, 0.62, 0.48}));

    // hair (face gender cue): cap for male, cap plus side bars for female
    Rgb hair = face_color({0.16, 0.11, 0.08});
    fill_rect(img, p.cx - 0.9 * p.rx, p.cy - 1.25 * p.ry, p.cx + 0.9 * p.rx,
              p.cy - 0.8 * p.ry, hair);
    if (f.gender_face == GenderClass::female) {
        fill_rect(img, p.cx - 1.12 * p.rx, p.cy - 1.0 * p.ry, p.cx - 0.72 * p.rx,
                  p.cy + 0.6 * p.ry, hair);
        fill_rect(img, p.cx + 0.72 * p.rx, p.cy - 1.0 * p.ry, p.cx + 1.12 * p.rx,
                  p.cy + 0.6 * p.ry, hair);
    }

    // forehead lines (face age cue): child 0, middle 1, senior 2
    int lines = static_cast<int>(f.age_face);
    Rgb line_color = face_color({0.2, 0.12, 0.1});
    for (int l = 0; l < lines; ++l) {
        double y0 = p.cy - (0.76 - 0.16 * l) * p.ry;
        fill_rect(img, p.cx - 0.55 * p.rx, y0, p.cx + 0.55 * p.rx,
                  y0 + std::max(1.5, 0.12 * p.ry), line_color);
    }

    // eyes and pupils (gaze cue)
    const double eye_dx = 0.42 * p.rx, eye_y = p.cy - 0.5 * p.ry;
    const double eye_rx = 0.32 * p.rx, eye_ry = 0.2 * p.ry;
    Rgb sclera = face_color({0.97, 0.97, 0.95});
    Rgb pupil = face_color({0.05, 0.05, 0.1});
    double off_x = 0.0, off_y = 0.0;
    if (!f.gaze_locked) {
        off_x = 0.75 * eye_rx * std::cos(f.gaze_dir);
        off_y = 0.55 * eye_ry * std::sin(f.gaze_dir);
    }
    for (int side = -1; side <= 1; side += 2) {
        double ex = p.cx + side * eye_dx;
        fill_ellipse(img, ex, eye_y, eye_rx, eye_ry, sclera);
        fill_ellipse(img, ex + off_x, eye_y + off_y, 0.55 * eye_rx, 0.6 * eye_ry, pupil);
    }

    // mouth
    fill_rect(img, p.cx - 0.35 * p.rx, p.cy + 0.5 * p.ry, p.cx + 0.35 * p.rx,
              p.cy + 0.5 * p.ry + std::max(1.2, 0.12 * p.ry), face_color({0.45, 0.2, 0.2}));

    // low-resolution anomaly: pixelate the face box region
    if (f.resolution_factor > 1.0) {
        FaceBox box = face_box_of(p).clamped(img.h, img.w);
        int k = static_cast<int>(std::lround(f.resolution_factor));
        int bx0 = static_cast<int>(box.x), by0 = static_cast<int>(box.y);
        int bx1 = static_cast<int>(box.x2()), by1 = static_cast<int>(box.y2());
        for (int y = by0; y < by1; y += k)
            for (int x = bx0; x < bx1; x += k) {
                double acc[3] = {0, 0, 0};
                int cnt = 0;
                for (int yy = y; yy < std::min(y + k, by1); ++yy)
                    for (int xx = x; xx < std::min(x + k, bx1); ++xx) {
                        ++cnt;
                        for (int c = 0; c < 3; ++c) acc[c] += img.at(c, yy, xx);
                    }
                if (!cnt) continue;
                for (int yy = y; yy < std::min(y + k, by1); ++yy)
                    for (int xx = x; xx < std::min(x + k, bx1); ++xx)
                        for (int c = 0; c < 3; ++c) img.at(c, yy, xx) = acc[c] / cnt;
            }
    }
}

}  // namespace

ClipSample generate_clip(const SceneSpec& spec) {
    ClipSample clip;
    clip.clip_id = "clip_" + std::to_string(spec.seed);
    clip.fps = spec.fps;
    HueRotation scene_rot(spec.scene_hue);
    Rng bg_rng(mix_seed(spec.seed, 0xBACC));
    BackgroundField field = BackgroundField::sample(bg_rng);

    for (int t = 0; t < spec.t_frames; ++t) {
        FrameSample frame;
        frame.frame_id = t;
        frame.image = Image(spec.canvas_h, spec.canvas_w);
        const double ox = spec.pan_vx * t, oy = spec.pan_vy * t;
        for (int y = 0; y < spec.canvas_h; ++y)
            for (int x = 0; x < spec.canvas_w; ++x) {
                Rgb raw{field.value(0, x + ox, y + oy), field.value(1, x + ox, y + oy),
                        field.value(2, x + ox, y + oy)};
                Rgb tinted = scale(scene_rot.apply(raw), spec.scene_gain);
                frame.image.at(0, y, x) = tinted.r;
                frame.image.at(1, y, x) = tinted.g;
                frame.image.at(2, y, x) = tinted.b;
            }

        for (const auto& f : spec.faces) render_face(frame.image, spec, f, t, scene_rot);
        frame.image.clamp01();

        for (const auto& f : spec.faces) {
            FaceSample fs;
            fs.face_id = f.face_id;
            fs.box = face_box_of(placement_at(f, t)).clamped(spec.canvas_h, spec.canvas_w);
            fs.label = f.fake ? 1 : 0;
            fs.gaze_locked = f.gaze_locked;
            fs.age_class = f.age_face;
            fs.gender_class = f.gender_face;
            frame.faces.push_back(fs);
        }
        clip.frames.push_back(std::move(frame));
    }
    return clip;
}

SceneSpec make_scene_spec(uint64_t seed, const GeneratorOptions& opts,
                          const ScenarioSchedule& schedule) {
    for (uint64_t attempt = 0; attempt < 100; ++attempt) {
        Rng rng(mix_seed(seed, attempt));
        SceneSpec spec;
        spec.seed = seed;
        spec.canvas_h = opts.canvas_h;
        spec.canvas_w = opts.canvas_w;
        spec.t_frames = opts.t_frames;
        spec.fps = opts.fps;
        spec.scene_hue = rng.uniform(-0.5, 0.5);
        spec.scene_gain = rng.uniform(0.9, 1.1);
        spec.pan_vx = rng.uniform(-0.7, 0.7);
        spec.pan_vy = rng.uniform(-0.3, 0.3);

        int n = std::clamp(schedule.n_faces, opts.min_faces, opts.max_faces);
        // one outlier among exactly 3 faces can never satisfy the gaze rule
        if (!schedule.all_real && schedule.primary == AnomalyKind::gaze_outlier && n == 3)
            n = std::min(4, opts.max_faces);

        const double slot_w = static_cast<double>(opts.canvas_w) / n;
        for (int i = 0; i < n; ++i) {
            FaceSpec f;
            f.face_id = i;
            f.head_ry = opts.canvas_h * rng.uniform(0.075, 0.105);
            f.head_rx = 0.75 * f.head_ry;
            double margin = 1.3 * f.head_rx + 8.0;
            double lo = slot_w * i + margin, hi = slot_w * (i + 1) - margin;
            f.cx0 = lo < hi ? rng.uniform(lo, hi) : slot_w * (i + 0.5);
            f.cy0 = opts.canvas_h * rng.uniform(0.28, 0.42);
            f.vx = rng.uniform(-0.8, 0.8);
            f.vy = rng.uniform(-0.35, 0.35);
            f.osc_amp = rng.uniform(0.5, 2.0);
            f.osc_freq = rng.uniform(0.4, 1.2);
            f.osc_phase = rng.uniform(0.0, 6.28);
            f.age_face = static_cast<AgeClass>(rng.uniform_int(0, 2));
            f.gender_face = static_cast<GenderClass>(rng.uniform_int(0, 1));
            f.age_body = f.age_face;
            f.gender_body = f.gender_face;
            f.hue = rng.uniform(-0.12, 0.12);
            f.illum = rng.uniform(0.92, 1.08);
            spec.faces.push_back(f);
        }

        if (!schedule.all_real) {
            int n_fakes = (n >= 3 && rng.bernoulli(opts.p_two_fakes)) ? 2 : 1;
            std::vector<int> face_order(n);
            for (int i = 0; i < n; ++i) face_order[i] = i;
            for (int i = n - 1; i > 0; --i)
                std::swap(face_order[i], face_order[rng.next_below(static_cast<uint64_t>(i + 1))]);

            int gaze_outliers = 0;
            auto gaze_feasible = [&](int extra) {
                int n_out = gaze_outliers + extra;
                return (n == 2 && n_out == 1) || (n - 2 * n_out > 1);
            };

            for (int k = 0; k < n_fakes; ++k) {
                FaceSpec& f = spec.faces[face_order[k]];
                f.fake = true;

                AnomalyKind primary = schedule.primary;
                if (primary == AnomalyKind::gaze_outlier && !gaze_feasible(1))
                    primary = AnomalyKind::appearance_mismatch;
                f.anomalies.insert(primary);

                if (rng.bernoulli(opts.p_second_anomaly)) {
                    double total = 0.0;
                    for (int a = 0; a < 4; ++a)
                        if (a != static_cast<int>(primary)) total += opts.prevalence[a];
                    double u = rng.uniform() * total;
                    int pick = -1;
                    for (int a = 0; a < 4; ++a) {
                        if (a == static_cast<int>(primary)) continue;
                        u -= opts.prevalence[a];
                        if (u <= 0.0) { pick = a; break; }
                    }
                    if (pick >= 0) {
                        auto kind = static_cast<AnomalyKind>(pick);
                        if (kind != AnomalyKind::gaze_outlier || gaze_feasible(1))
                            f.anomalies.insert(kind);
                    }
                }

                for (AnomalyKind kind : f.anomalies) {
                    switch (kind) {
                        case AnomalyKind::motion_jitter:
                            f.jitter_amp = rng.uniform(opts.jitter_min, opts.jitter_max);
                            f.jitter_seed = rng.next_u64();
                            break;
                        case AnomalyKind::appearance_mismatch: {
                            double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
                            f.hue = sign * rng.uniform(opts.hue_shift_min, opts.hue_shift_max);
                            if (rng.bernoulli(0.5))
                                f.illum = 1.0 + (rng.bernoulli(0.5) ? 1.0 : -1.0) * opts.illum_shift;
                            if (rng.bernoulli(0.5)) f.resolution_factor = opts.resolution_blocky;
                            break;
                        }
                        case AnomalyKind::gaze_outlier: {
                            f.gaze_locked = false;
                            double base = rng.bernoulli(0.5) ? 0.0 : 3.14159265;
                            f.gaze_dir = base + rng.uniform(-0.5, 0.5);
                            ++gaze_outliers;
                            break;
                        }
                        case AnomalyKind::body_face_mismatch: {
                            int mode = rng.uniform_int(0, 2);  // age / gender / both
                            if (mode == 0 || mode == 2)
                                f.age_body = static_cast<AgeClass>(
                                    (static_cast<int>(f.age_face) + rng.uniform_int(1, 2)) % 3);
                            if (mode == 1 || mode == 2)
                                f.gender_body = f.gender_face == GenderClass::male
                                                    ? GenderClass::female
                                                    : GenderClass::male;
                            break;
                        }
                    }
                }
            }
        }

        // reject scenes whose boxes ever overlap beyond the IoU cap
        bool ok = true;
        for (int t = 0; t < spec.t_frames && ok; ++t) {
            std::vector<FaceBox> boxes;
            for (const auto& f : spec.faces) {
                FaceBox b = face_box_of(placement_at(f, t)).clamped(spec.canvas_h, spec.canvas_w);
                if (b.w < 8.0 || b.h < 8.0) { ok = false; break; }
                boxes.push_back(b);
            }
            for (size_t i = 0; i < boxes.size() && ok; ++i)
                for (size_t j = i + 1; j < boxes.size(); ++j)
                    if (iou(boxes[i], boxes[j]) > opts.max_overlap_iou) { ok = false; break; }
        }
        if (ok) return spec;
    }
    throw std::runtime_error("make_scene_spec: could not place faces within overlap cap");
}

// ---------------------------------------------------------------------------
// SceneSpec JSON sidecar

std::string SceneSpec::to_json() const {
    json j;
    j["seed"] = seed;
    j["canvas_h"] = canvas_h;
    j["canvas_w"] = canvas_w;
    j["t_frames"] = t_frames;
    j["fps"] = fps;
    j["scene_hue"] = scene_hue;
    j["scene_gain"] = scene_gain;
    j["pan_vx"] = pan_vx;
    j["pan_vy"] = pan_vy;
    j["faces"] = json::array();
    for (const auto& f : faces) {
        json jf;
        jf["face_id"] = f.face_id;
        jf["fake"] = f.fake;
        jf["anomalies"] = json::array();
        for (auto a : f.anomalies) jf["anomalies"].push_back(anomaly_name(a));
        jf["age_face"] = to_string(f.age_face);
        jf["gender_face"] = to_string(f.gender_face);
        jf["age_body"] = to_string(f.age_body);
        jf["gender_body"] = to_string(f.gender_body);
        jf["gaze_locked"] = f.gaze_locked;
        jf["gaze_dir"] = f.gaze_dir;
        jf["hue"] = f.hue;
        jf["illum"] = f.illum;
        jf["resolution_factor"] = f.resolution_factor;
        jf["cx0"] = f.cx0;
        jf["cy0"] = f.cy0;
        jf["head_rx"] = f.head_rx;
        jf["head_ry"] = f.head_ry;
        jf["vx"] = f.vx;
        jf["vy"] = f.vy;
        jf["osc_amp"] = f.osc_amp;
        jf["osc_freq"] = f.osc_freq;
        jf["osc_phase"] = f.osc_phase;
        jf["jitter_amp"] = f.jitter_amp;
        jf["jitter_seed"] = f.jitter_seed;
        j["faces"].push_back(std::move(jf));
    }
    return j.dump();
}

SceneSpec SceneSpec::from_json(const std::string& text) {
    json j = json::parse(text);
    SceneSpec s;
    s.seed = j.at("seed").get<uint64_t>();
    s.canvas_h = j.at("canvas_h").get<int>();
    s.canvas_w = j.at("canvas_w").get<int>();
    s.t_frames = j.at("t_frames").get<int>();
    s.fps = j.at("fps").get<double>();
    s.scene_hue = j.at("scene_hue").get<double>();
    s.scene_gain = j.at("scene_gain").get<double>();
    s.pan_vx = j.at("pan_vx").get<double>();
    s.pan_vy = j.at("pan_vy").get<double>();
    for (const auto& jf : j.at("faces")) {
        FaceSpec f;
        f.face_id = jf.at("face_id").get<int>();
        f.fake = jf.at("fake").get<bool>();
        for (const auto& a : jf.at("anomalies")) {
            std::string name = a.get<std::string>();
            for (int k = 0; k < 4; ++k)
                if (name == anomaly_name(static_cast<AnomalyKind>(k)))
                    f.anomalies.insert(static_cast<AnomalyKind>(k));
        }
        f.age_face = *age_from_string(jf.at("age_face").get<std::string>());
        f.gender_face = *gender_from_string(jf.at("gender_face").get<std::string>());
        f.age_body = *age_from_string(jf.at("age_body").get<std::string>());
        f.gender_body = *gender_from_string(jf.at("gender_body").get<std::string>());
        f.gaze_locked = jf.at("gaze_locked").get<bool>();
        f.gaze_dir = jf.at("gaze_dir").get<double>();
        f.hue = jf.at("hue").get<double>();
        f.illum = jf.at("illum").get<double>();
        f.resolution_factor = jf.at("resolution_factor").get<double>();
        f.cx0 = jf.at("cx0").get<double>();
        f.cy0 = jf.at("cy0").get<double>();
        f.head_rx = jf.at("head_rx").get<double>();
        f.head_ry = jf.at("head_ry").get<double>();
        f.vx = jf.at("vx").get<double>();
        f.vy = jf.at("vy").get<double>();
        f.osc_amp = jf.at("osc_amp").get<double>();
        f.osc_freq = jf.at("osc_freq").get<double>();
        f.osc_phase = jf.at("osc_phase").get<double>();
        f.jitter_amp = jf.at("jitter_amp").get<double>();
        f.jitter_seed = jf.at("jitter_seed").get<uint64_t>();
        s.faces.push_back(std::move(f));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Perturbations

namespace {

Image perturb_color(const Image& img, int severity) {
    HueRotation rot(0.12 * severity);
    const double sat = 1.0 - 0.08 * severity;
    const long n = static_cast<long>(img.pixels());
    Image out(img.h, img.w);
    for (long i = 0; i < n; ++i) {
        Rgb c{img.data[i], img.data[i + n], img.data[i + 2 * n]};
        Rgb r = rot.apply(c);
        double gray = (r.r + r.g + r.b) / 3.0;
        out.data[i] = gray + sat * (r.r - gray);
        out.data[i + n] = gray + sat * (r.g - gray);
        out.data[i + 2 * n] = gray + sat * (r.b - gray);
    }
    out.clamp01();
    return out;
}

Image perturb_edges(const Image& img, int severity) {
    Image blurred = gaussian_blur(img, 1.5);
    Image out(img.h, img.w);
    const double k = 0.35 * severity;
    for (size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = img.data[i] + k * (img.data[i] - blurred.data[i]);
    out.clamp01();
    return out;
}

Image perturb_blocks(const Image& img, int severity, uint64_t seed) {
    Rng rng(seed);
    const int block = 8;
    int bw = std::max(2, static_cast<int>(img.w * (0.12 + 0.07 * severity)) / block);
    int bh = std::max(2, static_cast<int>(img.h * (0.12 + 0.07 * severity)) / block);
    bw = std::min(bw, img.w / block);
    bh = std::min(bh, img.h / block);
    int x0 = block * static_cast<int>(rng.next_below(static_cast<uint64_t>(img.w / block - bw + 1)));
    int y0 = block * static_cast<int>(rng.next_below(static_cast<uint64_t>(img.h / block - bh + 1)));

    std::vector<int> perm(static_cast<size_t>(bw) * bh);
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    for (size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.next_below(i)]);

    Image out = img;
    for (int bi = 0; bi < bh * bw; ++bi) {
        int sy = y0 + (perm[bi] / bw) * block, sx = x0 + (perm[bi] % bw) * block;
        int dy = y0 + (bi / bw) * block, dx = x0 + (bi % bw) * block;
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < block; ++y)
                for (int x = 0; x < block; ++x)
                    out.at(c, dy + y, dx + x) = img.at(c, sy + y, sx + x);
    }
    return out;
}

Image perturb_corruption(const Image& img, int severity, uint64_t seed) {
    Rng rng(seed);
    const double sigma = 0.018 * severity;
    const double levels = std::max(8.0, 56.0 - 9.0 * severity);
    Image out(img.h, img.w);
    for (size_t i = 0; i < img.data.size(); ++i) {
        double v = img.data[i] + sigma * rng.normal();
        out.data[i] = std::round(std::clamp(v, 0.0, 1.0) * levels) / levels;
    }
    return out;
}

Image convolve3(const Image& img, const double k[3][3], double bias) {
    Image out(img.h, img.w);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double acc = bias;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int yy = std::clamp(y + dy, 0, img.h - 1);
                        int xx = std::clamp(x + dx, 0, img.w - 1);
                        acc += k[dy + 1][dx + 1] * img.at(c, yy, xx);
                    }
                out.at(c, y, x) = acc;
            }
    out.clamp01();
    return out;
}

Image perturb_convolution(const Image& img, int severity) {
    const double ninth = 1.0 / 9.0;
    const double box3[3][3] = {{ninth, ninth, ninth}, {ninth, ninth, ninth}, {ninth, ninth, ninth}};
    const double sharpen_soft[3][3] = {{0, -0.15, 0}, {-0.15, 1.6, -0.15}, {0, -0.15, 0}};
    const double motion[3][3] = {{0, 0, 0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0, 0, 0}};
    const double emboss[3][3] = {{-0.7, 0, 0}, {0, 1.0, 0}, {0, 0, 0.7}};
    switch (severity) {
        case 1: return convolve3(img, sharpen_soft, -0.03);
        case 2: return convolve3(img, box3, 0.0);
        case 3: return gaussian_blur(img, 1.4);
        case 4: return convolve3(img, motion, 0.0);
        default: return convolve3(img, emboss, 0.25);
    }
}

Image perturb_external(const Image& img, int severity, uint64_t seed) {
    Rng rng(seed);
    Image out = img;
    for (int i = 0; i < severity; ++i) {
        double size = std::min(img.h, img.w) * (0.06 + 0.025 * severity);
        double cx = rng.uniform(0.0, img.w), cy = rng.uniform(0.0, img.h);
        Rgb color{rng.uniform(), rng.uniform(), rng.uniform()};
        if (rng.bernoulli(0.5))
            fill_ellipse(out, cx, cy, size * 0.6, size * 0.6, color);
        else
            fill_rect(out, cx - size * 0.5, cy - size * 0.3, cx + size * 0.5, cy + size * 0.3,
                      color);
    }
    return out;
}

}  // namespace

Image apply_perturbation(const Image& frame, PerturbationKind kind, int severity, uint64_t seed) {
    if (severity < 0 || severity > 5)
        throw std::invalid_argument("apply_perturbation: severity out of range");
    if (severity == 0) return frame;
    switch (kind) {
        case PerturbationKind::color_manipulation: return perturb_color(frame, severity);
        case PerturbationKind::edge_manipulation: return perturb_edges(frame, severity);
        case PerturbationKind::blockwise_distortion: return perturb_blocks(frame, severity, seed);
        case PerturbationKind::image_corruption: return perturb_corruption(frame, severity, seed);
        case PerturbationKind::convolution_mask: return perturb_convolution(frame, severity);
        case PerturbationKind::external_effects: return perturb_external(frame, severity, seed);
    }
    throw std::invalid_argument("apply_perturbation: unknown kind");
}

// ---------------------------------------------------------------------------
// Dataset builder

std::string DatasetAudit::to_json() const {
    json j;
    for (int s = 0; s < 3; ++s) {
        json js;
        js["clips"] = split_sizes[s];
        for (int k = 0; k < 4; ++k)
            js[anomaly_name(static_cast<AnomalyKind>(k))] = scenario_counts[s][k];
        js["all_real"] = scenario_counts[s][4];
        j[kSplitNames[s]] = std::move(js);
    }
    return j.dump(2);
}

DatasetAudit build_dataset(const DatasetSpec& spec) {
    double ratio_sum = spec.split_ratios[0] + spec.split_ratios[1] + spec.split_ratios[2];
    if (std::abs(ratio_sum - 1.0) > 1e-9)
        throw std::invalid_argument("build_dataset: split ratios must sum to 1");
    if (spec.n_clips < 3) throw std::invalid_argument("build_dataset: need at least 3 clips");

    fs::create_directories(spec.out_dir);
    for (const auto& name : kSplitNames) {
        fs::path manifest_path = fs::path(spec.out_dir) / (name + ".jsonl");
        if (fs::exists(manifest_path))
            throw std::runtime_error("build_dataset: output collision at " +
                                     manifest_path.string());
    }

    int n_val = static_cast<int>(spec.n_clips * spec.split_ratios[1]);
    int n_test = static_cast<int>(spec.n_clips * spec.split_ratios[2]);
    int n_train = spec.n_clips - n_val - n_test;
    const std::array<int, 3> sizes = {n_train, n_val, n_test};

    // Fixed repeating scenario pattern approximating the cue prevalences
    // (4/4/3/1 over 12). All four kinds appear within the first four fake
    // clips so even a small split carries every kind.
    const AnomalyKind pattern[12] = {
        AnomalyKind::motion_jitter,       AnomalyKind::appearance_mismatch,
        AnomalyKind::gaze_outlier,        AnomalyKind::body_face_mismatch,
        AnomalyKind::motion_jitter,       AnomalyKind::appearance_mismatch,
        AnomalyKind::gaze_outlier,        AnomalyKind::motion_jitter,
        AnomalyKind::appearance_mismatch, AnomalyKind::gaze_outlier,
        AnomalyKind::motion_jitter,       AnomalyKind::appearance_mismatch,
    };

    DatasetAudit audit;
    char namebuf[64];
    for (int s = 0; s < 3; ++s) {
        Manifest manifest;
        manifest.dir = spec.out_dir;
        audit.split_sizes[s] = sizes[s];
        int fake_ordinal = 0;
        for (int idx = 0; idx < sizes[s]; ++idx) {
            ScenarioSchedule schedule;
            schedule.all_real = (idx % 4 == 3);
            if (!schedule.all_real) {
                schedule.primary = pattern[fake_ordinal % 12];
                ++fake_ordinal;
            }
            const int span = spec.gen.max_faces - spec.gen.min_faces + 1;
            schedule.n_faces = spec.gen.min_faces + idx % span;

            uint64_t clip_seed = mix_seed(spec.master_seed, static_cast<uint64_t>(s) + 1,
                                          static_cast<uint64_t>(idx));
            SceneSpec scene = make_scene_spec(clip_seed, spec.gen, schedule);
            ClipSample clip = generate_clip(scene);

            std::snprintf(namebuf, sizeof(namebuf), "%s_%04d", kSplitNames[s].c_str(), idx);
            std::string clip_id = namebuf;
            fs::path clip_dir = fs::path(spec.out_dir) / kSplitNames[s] / clip_id;
            fs::create_directories(clip_dir);

            ClipRecord record;
            record.clip_id = clip_id;
            record.fps = clip.fps;
            for (size_t t = 0; t < clip.frames.size(); ++t) {
                std::snprintf(namebuf, sizeof(namebuf), "frame_%03zu.ppm", t);
                FrameRecord fr;
                fr.frame_id = clip.frames[t].frame_id;
                fr.image_path = (fs::path(kSplitNames[s]) / clip_id / namebuf).string();
                write_ppm(clip.frames[t].image, (fs::path(spec.out_dir) / fr.image_path).string());
                for (const auto& face : clip.frames[t].faces) {
                    FaceRecord rec;
                    rec.face_id = face.face_id;
                    rec.box = face.box;
                    rec.label = face.label;
                    rec.gaze_locked = face.gaze_locked;
                    rec.age = face.age_class;
                    rec.gender = face.gender_class;
                    fr.faces.push_back(rec);
                }
                record.frames.push_back(std::move(fr));
            }
            manifest.clips.push_back(std::move(record));

            std::ofstream truth(clip_dir / "scene_spec.json");
            truth << scene.to_json() << "\n";

            if (schedule.all_real) {
                ++audit.scenario_counts[s][4];
            } else {
                std::set<AnomalyKind> kinds;
                for (const auto& f : scene.faces)
                    for (auto a : f.anomalies) kinds.insert(a);
                for (auto a : kinds) ++audit.scenario_counts[s][static_cast<int>(a)];
            }
        }
        write_manifest(manifest, (fs::path(spec.out_dir) / (kSplitNames[s] + ".jsonl")).string());
    }

    std::ofstream af(fs::path(spec.out_dir) / "audit.json");
    af << audit.to_json() << "\n";
    return audit;
}

}  // namespace hicom
