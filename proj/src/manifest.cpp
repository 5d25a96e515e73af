#include "hicom/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace hicom {

namespace {

json face_to_json(const FaceRecord& f) {
    json j;
    j["face_id"] = f.face_id;
    j["box"] = {f.box.x, f.box.y, f.box.w, f.box.h};
    j["label"] = f.label;
    j["gaze_locked"] = f.gaze_locked ? json(*f.gaze_locked) : json(nullptr);
    j["age"] = f.age ? json(to_string(*f.age)) : json(nullptr);
    j["gender"] = f.gender ? json(to_string(*f.gender)) : json(nullptr);
    return j;
}

FaceRecord face_from_json(const json& j) {
    FaceRecord f;
    f.face_id = j.at("face_id").get<int>();
    const auto& b = j.at("box");
    if (!b.is_array() || b.size() != 4)
        throw std::runtime_error("face box must be [x,y,w,h]");
    f.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    f.label = j.at("label").get<int>();
    if (f.label != 0 && f.label != 1) throw std::runtime_error("face label must be 0 or 1");
    if (j.contains("gaze_locked") && !j["gaze_locked"].is_null())
        f.gaze_locked = j["gaze_locked"].get<bool>();
    if (j.contains("age") && !j["age"].is_null()) {
        auto a = age_from_string(j["age"].get<std::string>());
        if (!a) throw std::runtime_error("unknown age class: " + j["age"].get<std::string>());
        f.age = a;
    }
    if (j.contains("gender") && !j["gender"].is_null()) {
        auto g = gender_from_string(j["gender"].get<std::string>());
        if (!g) throw std::runtime_error("unknown gender class: " + j["gender"].get<std::string>());
        f.gender = g;
    }
    return f;
}

}  // namespace

std::string clip_to_jsonl(const ClipRecord& clip) {
    json j;
    j["clip_id"] = clip.clip_id;
    j["fps"] = clip.fps;
    j["frames"] = json::array();
    for (const auto& fr : clip.frames) {
        json jf;
        jf["frame_id"] = fr.frame_id;
        jf["image_path"] = fr.image_path;
        jf["faces"] = json::array();
        for (const auto& face : fr.faces) jf["faces"].push_back(face_to_json(face));
        j["frames"].push_back(std::move(jf));
    }
    return j.dump();
}

ClipRecord clip_from_jsonl(const std::string& line) {
    json j = json::parse(line);
    ClipRecord clip;
    clip.clip_id = j.at("clip_id").get<std::string>();
    clip.fps = j.at("fps").get<double>();
    for (const auto& jf : j.at("frames")) {
        FrameRecord fr;
        fr.frame_id = jf.at("frame_id").get<int>();
        fr.image_path = jf.at("image_path").get<std::string>();
        for (const auto& jface : jf.at("faces")) fr.faces.push_back(face_from_json(jface));
        clip.frames.push_back(std::move(fr));
    }
    return clip;
}

Manifest read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_manifest: cannot open " + path);
    Manifest m;
    m.dir = fs::path(path).parent_path().string();
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            m.clips.push_back(clip_from_jsonl(line));
        } catch (const std::exception& e) {
            throw std::runtime_error("read_manifest: " + path + ":" + std::to_string(lineno) +
                                     ": " + e.what());
        }
    }
    return m;
}

void write_manifest(const Manifest& manifest, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_manifest: cannot open " + path);
    for (const auto& clip : manifest.clips) f << clip_to_jsonl(clip) << "\n";
    if (!f) throw std::runtime_error("write_manifest: write failed for " + path);
}

ClipSample load_clip_meta(const ClipRecord& record) {
    ClipSample clip;
    clip.clip_id = record.clip_id;
    clip.fps = record.fps;
    for (const auto& fr : record.frames) {
        FrameSample frame;
        frame.frame_id = fr.frame_id;
        for (const auto& face : fr.faces) {
            FaceSample fs;
            fs.face_id = face.face_id;
            fs.box = face.box;
            fs.label = face.label;
            fs.gaze_locked = face.gaze_locked;
            fs.age_class = face.age;
            fs.gender_class = face.gender;
            frame.faces.push_back(fs);
        }
        clip.frames.push_back(std::move(frame));
    }
    return clip;
}

ClipSample load_clip(const Manifest& manifest, const ClipRecord& record) {
    ClipSample clip = load_clip_meta(record);
    for (size_t i = 0; i < record.frames.size(); ++i) {
        fs::path p = fs::path(manifest.dir) / record.frames[i].image_path;
        clip.frames[i].image = read_ppm(p.string());
    }
    return clip;
}

namespace {

// jsonl layout: validate records one line at a time, normalizing optional
// fields to explicit nulls on re-emission.
IngestResult ingest_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("ingest_external_manifest: cannot open " + path);
    IngestResult out;
    out.manifest.dir = fs::path(path).parent_path().string();
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.manifest.clips.push_back(clip_from_jsonl(line));
        } catch (const std::exception& e) {
            out.rejected.push_back({lineno, e.what()});
        }
    }
    return out;
}

// ffiw_like layout: <root>/<clip_dir>/annotations.json with
// {"fps": .., "frames": [{"file": .., "faces": [{"id": .., "bbox": [x1,y1,x2,y2], "fake": bool}]}]}.
IngestResult ingest_ffiw_like(const std::string& root) {
    if (!fs::is_directory(root))
        throw std::runtime_error("ingest_external_manifest: not a directory: " + root);
    IngestResult out;
    out.manifest.dir = root;

    std::vector<fs::path> clip_dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) clip_dirs.push_back(e.path());
    std::sort(clip_dirs.begin(), clip_dirs.end());

    size_t record_idx = 0;
    for (const auto& dir : clip_dirs) {
        fs::path ann = dir / "annotations.json";
        ++record_idx;
        if (!fs::exists(ann)) {
            out.rejected.push_back({record_idx, dir.filename().string() + ": no annotations.json"});
            continue;
        }
        json j;
        try {
            std::ifstream f(ann);
            f >> j;
        } catch (const std::exception& e) {
            out.rejected.push_back({record_idx, dir.filename().string() + ": " + e.what()});
            continue;
        }
        ClipRecord clip;
        clip.clip_id = dir.filename().string();
        clip.fps = j.value("fps", 25.0);
        bool ok = true;
        int frame_id = 0;
        for (const auto& jf : j.value("frames", json::array())) {
            FrameRecord fr;
            fr.frame_id = frame_id++;
            if (!jf.contains("file")) { ok = false; break; }
            fr.image_path = (dir.filename() / jf["file"].get<std::string>()).string();
            for (const auto& jface : jf.value("faces", json::array())) {
                FaceRecord face;
                if (!jface.contains("bbox") || !jface.contains("fake")) { ok = false; break; }
                const auto& b = jface["bbox"];
                if (!b.is_array() || b.size() != 4) { ok = false; break; }
                // bbox is corner form [x1,y1,x2,y2]
                double x1 = b[0].get<double>(), y1 = b[1].get<double>();
                double x2 = b[2].get<double>(), y2 = b[3].get<double>();
                face.box = {x1, y1, x2 - x1, y2 - y1};
                face.label = jface["fake"].get<bool>() ? 1 : 0;
                face.face_id = jface.value("id", static_cast<int>(fr.faces.size()));
                fr.faces.push_back(face);
            }
            if (!ok) break;
            clip.frames.push_back(std::move(fr));
        }
        if (!ok) {
            out.rejected.push_back({record_idx, dir.filename().string() + ": missing boxes or labels"});
            continue;
        }
        out.manifest.clips.push_back(std::move(clip));
    }
    return out;
}

}  // namespace

IngestResult ingest_external_manifest(const std::string& path, const std::string& layout) {
    if (layout == "jsonl") return ingest_jsonl(path);
    if (layout == "ffiw_like") return ingest_ffiw_like(path);
    throw std::invalid_argument("ingest_external_manifest: unknown layout '" + layout + "'");
}

}  // namespace hicom
