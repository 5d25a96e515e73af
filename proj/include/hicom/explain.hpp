#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hicom/evaluate.hpp"

namespace hicom {

struct ExplanationRecord {
    std::string clip_id;
    int frame_id = 0;
    int face_id = 0;
    int final_label = 0;
    double fused_score = 0.0;
    std::set<ModuleId> attribution;
    std::string text;
    bool llm_used = false;
    bool degraded = false;  // LLM requested but the call fell back to offline
};

// Deterministic offline template. The text names each attributed module
// exactly once and no unattributed module.
std::string offline_explanation(const FaceDetection& d);

// Structured prompt sent to the LLM endpoint (module scores + verdicts).
std::string explanation_prompt(const FaceDetection& d);

struct LlmEndpoint {
    std::string host;
    int port = 80;
    std::string path = "/";

    // Parses "http://host:port/path"; anything else throws before any
    // network activity happens.
    static LlmEndpoint parse(const std::string& url);
};

struct ExplainOptions {
    bool offline = true;
    std::string llm_url;      // used when offline == false
    double timeout_sec = 5.0;
};

std::vector<ExplanationRecord> cmd_explain(const std::vector<FaceDetection>& detections,
                                           const ExplainOptions& opts);

void write_explanations(const std::vector<ExplanationRecord>& records, const std::string& path);

}  // namespace hicom
