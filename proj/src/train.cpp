#include "hicom/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "hicom/body_face.hpp"
#include "hicom/checkpoint.hpp"
#include "hicom/crops.hpp"
#include "hicom/gaze.hpp"
#include "hicom/inter_face.hpp"
#include "hicom/rng.hpp"
#include "hicom/scene_motion.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hicom {

double lr_at_epoch(const TrainConfig& tc, int epoch) {
    int steps = (epoch - 1) / tc.decay_every;
    return tc.lr * std::pow(tc.decay_factor, steps);
}

void write_train_log(const TrainResult& result, const std::string& path) {
    json j;
    j["module"] = result.module;
    j["best_epoch"] = result.best_epoch;
    j["best_val"] = result.best_val;
    j["epochs"] = json::array();
    for (const auto& e : result.log)
        j["epochs"].push_back({{"epoch", e.epoch},
                               {"train_loss", e.train_loss},
                               {"val_loss", e.val_loss},
                               {"lr", e.lr}});
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_train_log: cannot open " + path);
    f << j.dump(2) << "\n";
}

namespace {

void check_finite(double loss, const std::string& module, int epoch) {
    if (!std::isfinite(loss))
        throw std::runtime_error("training diverged: non-finite loss in " + module +
                                 " at epoch " + std::to_string(epoch));
}

template <typename T>
void shuffle_indices(std::vector<T>& idx, Rng& rng) {
    for (size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.next_below(i)]);
}

// ---- M1 clip cache -------------------------------------------------------

struct ClipCache {
    std::vector<ImageU8> frames;
    std::vector<std::vector<FaceBox>> boxes;  // [t][f], face order fixed
    std::vector<int> labels;                  // per face track
    int frame_label = 0;
};

std::vector<ClipCache> load_clips(const Manifest& m, const SceneMotionConfig& m1, int max_clips) {
    std::vector<ClipCache> out;
    for (const auto& rec : m.clips) {
        if (max_clips > 0 && static_cast<int>(out.size()) >= max_clips) break;
        if (rec.frames.empty() || rec.frames[0].faces.empty()) continue;

        ClipCache c;
        std::vector<int> ids;
        for (const auto& f : rec.frames[0].faces) ids.push_back(f.face_id);
        bool consistent = true;
        for (const auto& fr : rec.frames) {
            if (fr.faces.size() != ids.size()) { consistent = false; break; }
            std::vector<FaceBox> boxes(ids.size());
            for (const auto& f : fr.faces) {
                auto it = std::find(ids.begin(), ids.end(), f.face_id);
                if (it == ids.end()) { consistent = false; break; }
                boxes[it - ids.begin()] = f.box;
            }
            if (!consistent) break;
            c.boxes.push_back(std::move(boxes));
            c.frames.push_back(read_ppm_u8((fs::path(m.dir) / fr.image_path).string()));
        }
        if (!consistent) continue;

        for (int id : ids) {
            for (const auto& f : rec.frames[0].faces)
                if (f.face_id == id) c.labels.push_back(f.label);
        }
        c.frame_label = 0;
        for (int l : c.labels) c.frame_label |= l;

        // pad/truncate to the temporal window
        while (static_cast<int>(c.frames.size()) < m1.temporal_window) {
            c.frames.push_back(c.frames.back());
            c.boxes.push_back(c.boxes.back());
        }
        if (static_cast<int>(c.frames.size()) > m1.temporal_window) {
            c.frames.resize(m1.temporal_window);
            c.boxes.resize(m1.temporal_window);
        }
        out.push_back(std::move(c));
    }
    if (out.empty()) throw std::runtime_error("load_clips: no usable clips in manifest");
    return out;
}

double m1_clip_loss(SceneMotionNet& net, const ClipCache& c, double grad_scale, bool with_grad,
                    SceneMotionNet::ClipActs& acts) {
    std::vector<Image> frames;
    frames.reserve(c.frames.size());
    for (const auto& u8 : c.frames) frames.push_back(from_u8(u8));

    nn::Mat face_logits;
    nn::Vec frame_logits;
    net.forward(frames, c.boxes, acts, face_logits, frame_logits);
    const auto& cfg = net.config();
    if (!with_grad)
        return loss_sp(face_logits, frame_logits, c.labels, c.frame_label, cfg.lambda_fa,
                       cfg.lambda_fr);
    nn::Mat dface;
    nn::Vec dframe;
    double l = loss_sp(face_logits, frame_logits, c.labels, c.frame_label, cfg.lambda_fa,
                       cfg.lambda_fr, &dface, &dframe);
    dface *= grad_scale;
    dframe *= grad_scale;
    net.backward(dface, dframe, acts);
    return l;
}

// ---- crop caches for M2 / gaze / attributes ------------------------------

struct FrameCrops {
    std::vector<ImageU8> crops;
    std::vector<int> labels;
    uint64_t pair_seed = 0;
};

struct LabeledCrop {
    ImageU8 crop;
    int label = 0;
};

struct AttrCrop {
    ImageU8 crop;
    int age = 0;
    int gender = 0;
};

// Walks every manifest frame at the configured stride.
template <typename Fn>
void for_strided_frames(const Manifest& m, int stride, Fn&& fn) {
    for (size_t ci = 0; ci < m.clips.size(); ++ci) {
        const auto& rec = m.clips[ci];
        for (size_t ti = 0; ti < rec.frames.size(); ti += static_cast<size_t>(stride)) {
            Image frame = read_ppm((fs::path(m.dir) / rec.frames[ti].image_path).string());
            fn(ci, ti, frame, rec.frames[ti]);
        }
    }
}

std::vector<FrameCrops> load_m2_frames(const Manifest& m, const RunConfig& cfg) {
    CropPolicy policy = cfg.crops;
    policy.face_size = cfg.m2.input_size;
    std::vector<FrameCrops> out;
    for_strided_frames(m, cfg.train.frame_stride,
                       [&](size_t ci, size_t ti, const Image& frame, const FrameRecord& fr) {
                           FrameCrops fc;
                           for (const auto& face : fr.faces) {
                               fc.crops.push_back(to_u8(crop_face(frame, face.box, policy)));
                               fc.labels.push_back(face.label);
                           }
                           fc.pair_seed = mix_seed(cfg.seed, ci + 1, ti + 1);
                           if (!fc.crops.empty()) out.push_back(std::move(fc));
                       });
    if (out.empty()) throw std::runtime_error("load_m2_frames: empty training set");
    return out;
}

std::vector<LabeledCrop> load_gaze_crops(const Manifest& m, const RunConfig& cfg) {
    CropPolicy policy = cfg.crops;
    policy.eye_size = cfg.gaze.eye_size;
    std::vector<LabeledCrop> out;
    for_strided_frames(m, cfg.train.frame_stride,
                       [&](size_t, size_t, const Image& frame, const FrameRecord& fr) {
                           for (const auto& face : fr.faces) {
                               if (!face.gaze_locked) continue;  // unlabeled in adapters
                               out.push_back({to_u8(crop_eyes(frame, face.box, policy)),
                                              *face.gaze_locked ? 1 : 0});
                           }
                       });
    if (out.empty()) throw std::runtime_error("load_gaze_crops: empty training set");
    return out;
}

std::vector<AttrCrop> load_attr_crops(const Manifest& m, const RunConfig& cfg) {
    CropPolicy policy = cfg.crops;
    policy.face_size = cfg.body_face.input_size;
    policy.body_size = cfg.body_face.input_size;
    std::vector<AttrCrop> out;
    for_strided_frames(
        m, cfg.train.frame_stride,
        [&](size_t, size_t, const Image& frame, const FrameRecord& fr) {
            for (const auto& face : fr.faces) {
                // real faces only: their body cues are guaranteed to agree
                // with the manifest labels
                if (face.label != 0 || !face.age || !face.gender) continue;
                int age = static_cast<int>(*face.age);
                int gender = static_cast<int>(*face.gender);
                out.push_back({to_u8(crop_face(frame, face.box, policy)), age, gender});
                Image body = crop_body(frame, face.box, policy);
                FaceBox fib = face_box_in_body_crop(frame, face.box, policy);
                out.push_back({to_u8(block_face_in_body(body, fib)), age, gender});
            }
        });
    if (out.empty()) throw std::runtime_error("load_attr_crops: empty training set");
    return out;
}

// Balanced index list: all minority-class examples plus an equal-sized
// seeded sample of the majority class.
std::vector<size_t> balanced_indices(const std::vector<LabeledCrop>& crops, Rng& rng) {
    std::vector<size_t> pos, neg;
    for (size_t i = 0; i < crops.size(); ++i) (crops[i].label ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) {
        std::vector<size_t> all(crops.size());
        for (size_t i = 0; i < all.size(); ++i) all[i] = i;
        return all;
    }
    auto& minority = pos.size() < neg.size() ? pos : neg;
    auto& majority = pos.size() < neg.size() ? neg : pos;
    std::vector<size_t> out = minority;
    shuffle_indices(majority, rng);
    for (size_t i = 0; i < minority.size() && i < majority.size(); ++i)
        out.push_back(majority[i]);
    shuffle_indices(out, rng);
    return out;
}

// Shared epoch driver: runs train/val epochs, tracks the best epoch by
// validation loss and restores it before saving.
template <typename TrainEpochFn, typename ValFn>
TrainResult run_epochs(const std::string& module, const RunConfig& cfg, nn::ParamSet params,
                       TrainEpochFn&& train_epoch, ValFn&& val_loss,
                       const std::string& out_dir) {
    TrainResult result;
    result.module = module;
    nn::Adam adam;
    nn::Vec best_theta;
    result.best_val = std::numeric_limits<double>::infinity();

    for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
        double lr = lr_at_epoch(cfg.train, epoch);
        double train_loss = train_epoch(epoch, lr, adam, params);
        check_finite(train_loss, module, epoch);
        double val = val_loss();
        check_finite(val, module, epoch);
        result.log.push_back({epoch, train_loss, val, lr});
        if (val < result.best_val) {
            result.best_val = val;
            result.best_epoch = epoch;
            best_theta = params.gather_values();
        }
    }
    params.scatter_values(best_theta);

    fs::create_directories(out_dir);
    result.checkpoint_path = (fs::path(out_dir) / (module + ".ckpt")).string();
    CheckpointMeta meta;
    meta.module = module;
    meta.config = json::parse(run_config_to_json(cfg));
    meta.seed = cfg.seed;
    meta.epoch = result.best_epoch;
    save_checkpoint(result.checkpoint_path, meta, params);
    write_train_log(result, (fs::path(out_dir) / ("train_log_" + module + ".json")).string());
    return result;
}

}  // namespace

TrainResult train_m1(const RunConfig& cfg, const std::string& data_dir,
                     const std::string& out_dir) {
    Manifest train_m = read_manifest((fs::path(data_dir) / "train.jsonl").string());
    Manifest val_m = read_manifest((fs::path(data_dir) / "val.jsonl").string());
    auto train_clips = load_clips(train_m, cfg.m1, cfg.train.m1_max_clips);
    auto val_clips = load_clips(val_m, cfg.m1, 0);

    SceneMotionNet net(cfg.m1, mix_seed(cfg.seed, 0x31));
    // reused across clips so the large im2col buffers are not reallocated
    SceneMotionNet::ClipActs scratch;

    auto train_epoch = [&](int epoch, double lr, nn::Adam& adam, nn::ParamSet& params) {
        Rng order_rng(mix_seed(cfg.seed, 0x31AA, static_cast<uint64_t>(epoch)));
        std::vector<size_t> order(train_clips.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle_indices(order, order_rng);

        double total = 0.0;
        size_t done = 0;
        const int batch = std::max(1, cfg.train.batch_clips);
        params.zero_grad();
        int in_batch = 0;
        for (size_t k = 0; k < order.size(); ++k) {
            total += m1_clip_loss(net, train_clips[order[k]], 1.0 / batch, true, scratch);
            ++done;
            if (++in_batch == batch || k + 1 == order.size()) {
                adam.step(params, lr);
                params.zero_grad();
                in_batch = 0;
            }
        }
        return total / static_cast<double>(done);
    };
    auto val_loss = [&]() {
        double total = 0.0;
        for (const auto& c : val_clips) total += m1_clip_loss(net, c, 1.0, false, scratch);
        return total / static_cast<double>(val_clips.size());
    };
    return run_epochs("m1", cfg, net.params(), train_epoch, val_loss, out_dir);
}

TrainResult train_m2(const RunConfig& cfg, const std::string& data_dir,
                     const std::string& out_dir) {
    Manifest train_m = read_manifest((fs::path(data_dir) / "train.jsonl").string());
    Manifest val_m = read_manifest((fs::path(data_dir) / "val.jsonl").string());
    auto train_frames = load_m2_frames(train_m, cfg);
    auto val_frames = load_m2_frames(val_m, cfg);

    InterFaceNet net(cfg.m2, mix_seed(cfg.seed, 0x32));

    auto frame_loss = [&](const FrameCrops& fc, double grad_scale, bool with_grad) {
        const size_t n = fc.crops.size();
        std::vector<InterFaceNet::Acts> acts(with_grad ? n : 1);
        std::vector<nn::Vec> embeddings(n);
        nn::Mat logits(2, static_cast<long>(n));
        for (size_t i = 0; i < n; ++i) {
            nn::Vec emb, lg;
            net.forward(from_u8(fc.crops[i]), acts[with_grad ? i : 0], emb, lg);
            embeddings[i] = emb;
            logits.col(static_cast<long>(i)) = lg;
        }
        auto pairs = sample_pairs(fc.labels, cfg.m2.pair_cap, fc.pair_seed);
        if (!with_grad)
            return loss_app_frame(embeddings, logits, fc.labels, pairs, cfg.m2);
        std::vector<nn::Vec> demb;
        nn::Mat dlogits;
        double l = loss_app_frame(embeddings, logits, fc.labels, pairs, cfg.m2, &demb, &dlogits);
        for (size_t i = 0; i < n; ++i)
            net.backward(demb[i] * grad_scale, dlogits.col(static_cast<long>(i)) * grad_scale,
                         acts[i]);
        return l;
    };

    auto train_epoch = [&](int epoch, double lr, nn::Adam& adam, nn::ParamSet& params) {
        Rng order_rng(mix_seed(cfg.seed, 0x32AA, static_cast<uint64_t>(epoch)));
        std::vector<size_t> order(train_frames.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle_indices(order, order_rng);

        double total = 0.0;
        const int batch = std::max(1, cfg.train.batch_frames);
        params.zero_grad();
        int in_batch = 0;
        for (size_t k = 0; k < order.size(); ++k) {
            total += frame_loss(train_frames[order[k]], 1.0 / batch, true);
            if (++in_batch == batch || k + 1 == order.size()) {
                adam.step(params, lr);
                params.zero_grad();
                in_batch = 0;
            }
        }
        return total / static_cast<double>(order.size());
    };
    auto val_loss = [&]() {
        double total = 0.0;
        for (const auto& fc : val_frames) total += frame_loss(fc, 1.0, false);
        return total / static_cast<double>(val_frames.size());
    };
    return run_epochs("m2", cfg, net.params(), train_epoch, val_loss, out_dir);
}

TrainResult train_gaze(const RunConfig& cfg, const std::string& data_dir,
                       const std::string& out_dir) {
    Manifest train_m = read_manifest((fs::path(data_dir) / "train.jsonl").string());
    Manifest val_m = read_manifest((fs::path(data_dir) / "val.jsonl").string());
    auto train_crops = load_gaze_crops(train_m, cfg);
    auto val_crops = load_gaze_crops(val_m, cfg);

    GazeNet net(cfg.gaze, mix_seed(cfg.seed, 0x33));

    Rng val_rng(mix_seed(cfg.seed, 0x33BB));
    auto val_indices = balanced_indices(val_crops, val_rng);

    auto batch_loss = [&](const std::vector<LabeledCrop>& crops,
                          const std::vector<size_t>& idx, size_t lo, size_t hi,
                          double grad_scale, bool with_grad) {
        const size_t n = hi - lo;
        std::vector<GazeNet::Acts> acts(with_grad ? n : 1);
        nn::Mat logits(2, static_cast<long>(n));
        std::vector<int> labels(n);
        for (size_t i = 0; i < n; ++i) {
            logits.col(static_cast<long>(i)) =
                net.forward(from_u8(crops[idx[lo + i]].crop), acts[with_grad ? i : 0]);
            labels[i] = crops[idx[lo + i]].label;
        }
        nn::Mat dlogits;
        double l = nn::softmax_ce(logits, labels, with_grad ? &dlogits : nullptr);
        if (with_grad)
            for (size_t i = 0; i < n; ++i)
                net.backward(dlogits.col(static_cast<long>(i)) * grad_scale, acts[i]);
        return l;
    };

    auto train_epoch = [&](int epoch, double lr, nn::Adam& adam, nn::ParamSet& params) {
        Rng rng(mix_seed(cfg.seed, 0x33AA, static_cast<uint64_t>(epoch)));
        // several balanced passes per epoch: the off-camera class is rare,
        // so one pass gives too few optimizer steps
        std::vector<size_t> idx;
        for (int rep = 0; rep < std::max(1, cfg.train.balance_repeat); ++rep) {
            auto part = balanced_indices(train_crops, rng);
            idx.insert(idx.end(), part.begin(), part.end());
        }
        double total = 0.0;
        size_t steps = 0;
        const size_t batch = static_cast<size_t>(std::max(1, cfg.train.batch_crops));
        for (size_t lo = 0; lo < idx.size(); lo += batch) {
            size_t hi = std::min(idx.size(), lo + batch);
            params.zero_grad();
            total += batch_loss(train_crops, idx, lo, hi, 1.0, true);
            adam.step(params, lr);
            ++steps;
        }
        return total / static_cast<double>(steps);
    };
    auto val_loss = [&]() {
        double total = 0.0;
        size_t steps = 0;
        const size_t batch = 64;
        for (size_t lo = 0; lo < val_indices.size(); lo += batch) {
            size_t hi = std::min(val_indices.size(), lo + batch);
            total += batch_loss(val_crops, val_indices, lo, hi, 1.0, false) *
                     static_cast<double>(hi - lo);
            steps += hi - lo;
        }
        return total / static_cast<double>(steps);
    };
    return run_epochs("gaze", cfg, net.params(), train_epoch, val_loss, out_dir);
}

TrainResult train_attributes(const RunConfig& cfg, const std::string& data_dir,
                             const std::string& out_dir) {
    Manifest train_m = read_manifest((fs::path(data_dir) / "train.jsonl").string());
    Manifest val_m = read_manifest((fs::path(data_dir) / "val.jsonl").string());
    auto train_crops = load_attr_crops(train_m, cfg);
    auto val_crops = load_attr_crops(val_m, cfg);

    AttributeNet net(cfg.body_face, mix_seed(cfg.seed, 0x34));

    auto batch_loss = [&](const std::vector<AttrCrop>& crops, const std::vector<size_t>& idx,
                          size_t lo, size_t hi, double grad_scale, bool with_grad) {
        const size_t n = hi - lo;
        std::vector<AttributeNet::Acts> acts(with_grad ? n : 1);
        nn::Mat age_logits(3, static_cast<long>(n)), gender_logits(2, static_cast<long>(n));
        std::vector<int> age_labels(n), gender_labels(n);
        for (size_t i = 0; i < n; ++i) {
            nn::Vec al, gl;
            net.forward(from_u8(crops[idx[lo + i]].crop), acts[with_grad ? i : 0], al, gl);
            age_logits.col(static_cast<long>(i)) = al;
            gender_logits.col(static_cast<long>(i)) = gl;
            age_labels[i] = crops[idx[lo + i]].age;
            gender_labels[i] = crops[idx[lo + i]].gender;
        }
        nn::Mat dage, dgender;
        double l = nn::softmax_ce(age_logits, age_labels, with_grad ? &dage : nullptr) +
                   nn::softmax_ce(gender_logits, gender_labels, with_grad ? &dgender : nullptr);
        if (with_grad)
            for (size_t i = 0; i < n; ++i)
                net.backward(dage.col(static_cast<long>(i)) * grad_scale,
                             dgender.col(static_cast<long>(i)) * grad_scale, acts[i]);
        return l;
    };

    auto train_epoch = [&](int epoch, double lr, nn::Adam& adam, nn::ParamSet& params) {
        Rng rng(mix_seed(cfg.seed, 0x34AA, static_cast<uint64_t>(epoch)));
        std::vector<size_t> idx(train_crops.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        shuffle_indices(idx, rng);
        double total = 0.0;
        size_t steps = 0;
        const size_t batch = static_cast<size_t>(std::max(1, cfg.train.batch_crops));
        for (size_t lo = 0; lo < idx.size(); lo += batch) {
            size_t hi = std::min(idx.size(), lo + batch);
            params.zero_grad();
            total += batch_loss(train_crops, idx, lo, hi, 1.0, true);
            adam.step(params, lr);
            ++steps;
        }
        return total / static_cast<double>(steps);
    };
    auto val_loss = [&]() {
        std::vector<size_t> idx(val_crops.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        double total = 0.0;
        size_t count = 0;
        const size_t batch = 64;
        for (size_t lo = 0; lo < idx.size(); lo += batch) {
            size_t hi = std::min(idx.size(), lo + batch);
            total += batch_loss(val_crops, idx, lo, hi, 1.0, false) * static_cast<double>(hi - lo);
            count += hi - lo;
        }
        return total / static_cast<double>(count);
    };
    return run_epochs("attr", cfg, net.params(), train_epoch, val_loss, out_dir);
}

std::vector<TrainResult> cmd_train(const RunConfig& cfg, const std::string& data_dir,
                                   const std::string& module, const std::string& out_dir) {
    std::vector<TrainResult> out;
    auto want = [&](const std::string& name) { return module == "all" || module == name; };
    if (want("M1") || module == "m1") out.push_back(train_m1(cfg, data_dir, out_dir));
    if (want("M2") || module == "m2") out.push_back(train_m2(cfg, data_dir, out_dir));
    if (want("gaze")) out.push_back(train_gaze(cfg, data_dir, out_dir));
    if (want("agegender") || module == "attr") out.push_back(train_attributes(cfg, data_dir, out_dir));
    if (out.empty())
        throw std::invalid_argument("cmd_train: unknown module '" + module +
                                    "' (expected M1, M2, gaze, agegender or all)");
    return out;
}

}  // namespace hicom
