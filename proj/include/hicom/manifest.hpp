#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hicom/geometry.hpp"
#include "hicom/types.hpp"

namespace hicom {

// Manifest-side records: one clip per JSONL line,
// {clip_id, fps, frames: [{frame_id, image_path, faces: [...]}]}.
struct FaceRecord {
    int face_id = 0;
    FaceBox box;
    int label = 0;
    std::optional<bool> gaze_locked;
    std::optional<AgeClass> age;
    std::optional<GenderClass> gender;
};

struct FrameRecord {
    int frame_id = 0;
    std::string image_path;  // relative to the manifest's directory
    std::vector<FaceRecord> faces;
};

struct ClipRecord {
    std::string clip_id;
    double fps = 25.0;
    std::vector<FrameRecord> frames;
};

struct ManifestRejection {
    size_t line = 0;  // 1-based line in the source file
    std::string reason;
};

struct Manifest {
    std::string dir;  // directory the manifest was loaded from / written to
    std::vector<ClipRecord> clips;
};

std::string clip_to_jsonl(const ClipRecord& clip);
ClipRecord clip_from_jsonl(const std::string& line);

Manifest read_manifest(const std::string& path);
void write_manifest(const Manifest& manifest, const std::string& path);

// Loads a clip's frames and faces, reading images relative to manifest dir.
ClipSample load_clip(const Manifest& manifest, const ClipRecord& record);
// Same without pixel data (metrics-only paths).
ClipSample load_clip_meta(const ClipRecord& record);

// Normalizes an external manifest into the schema above. layout "jsonl"
// validates and rewrites records; layout "ffiw_like" walks a directory
// tree of <clip>/annotations.json + frame images. Records missing boxes
// or labels land in the rejection list and the run continues.
struct IngestResult {
    Manifest manifest;
    std::vector<ManifestRejection> rejected;
};

IngestResult ingest_external_manifest(const std::string& path, const std::string& layout);

}  // namespace hicom
