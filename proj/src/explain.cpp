#include "hicom/explain.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

using nlohmann::json;

namespace hicom {

namespace {

std::string format_score(double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

std::string offline_explanation(const FaceDetection& d) {
    std::ostringstream out;
    out << "Face " << d.face_id << " in frame " << d.frame_id << " of " << d.clip_id
        << " is classified " << (d.final_label ? "FAKE" : "REAL") << " (fused score "
        << format_score(d.fused_score) << ").";
    if (d.attribution.empty()) {
        out << " No detector raised an anomaly for this face.";
        return out.str();
    }
    for (ModuleId m : d.attribution) {
        switch (m) {
            case ModuleId::M1:
                out << " M1 found scene-motion incoherence across the temporal window";
                if (d.verdicts.m1.score) out << " (score " << format_score(*d.verdicts.m1.score) << ")";
                out << ".";
                break;
            case ModuleId::M2:
                out << " M2 found this face's appearance incompatible with the other faces";
                if (d.verdicts.m2.score) out << " (score " << format_score(*d.verdicts.m2.score) << ")";
                out << ".";
                break;
            case ModuleId::M3:
                out << " M3 found this face looking away from the camera while the group"
                       " majority is camera-locked.";
                break;
            case ModuleId::M4:
                out << " M4 found the age/gender read from the face inconsistent with the body.";
                break;
        }
    }
    return out.str();
}

std::string explanation_prompt(const FaceDetection& d) {
    json j;
    j["task"] = "Explain the deepfake detection verdict for one face in a multi-face frame.";
    j["clip_id"] = d.clip_id;
    j["frame_id"] = d.frame_id;
    j["face_id"] = d.face_id;
    j["final_label"] = d.final_label ? "fake" : "real";
    j["fused_score"] = d.fused_score;
    json verdicts;
    verdicts["M1"] = {{"cue", "scene-motion coherence"},
                      {"score", d.verdicts.m1.score ? json(*d.verdicts.m1.score) : json(nullptr)}};
    verdicts["M2"] = {{"cue", "inter-face appearance compatibility"},
                      {"score", d.verdicts.m2.score ? json(*d.verdicts.m2.score) : json(nullptr)}};
    verdicts["M3"] = {{"cue", "interpersonal gaze alignment"},
                      {"flag", d.verdicts.m3.flag == ModuleVerdict::Flag::na
                                   ? json("NA")
                                   : json(d.verdicts.m3.flag == ModuleVerdict::Flag::fake)}};
    verdicts["M4"] = {{"cue", "face-body age/gender consistency"},
                      {"flag", d.verdicts.m4.flag == ModuleVerdict::Flag::fake}};
    j["verdicts"] = std::move(verdicts);
    json attributed = json::array();
    for (ModuleId m : d.attribution) attributed.push_back(module_name(m));
    j["attributed_modules"] = std::move(attributed);
    return j.dump();
}

LlmEndpoint LlmEndpoint::parse(const std::string& url) {
    const std::string prefix = "http://";
    if (url.rfind(prefix, 0) != 0)
        throw std::invalid_argument("LlmEndpoint: only http:// endpoints are supported: " + url);
    std::string rest = url.substr(prefix.size());
    LlmEndpoint ep;
    size_t slash = rest.find('/');
    std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
    ep.path = slash == std::string::npos ? "/" : rest.substr(slash);
    size_t colon = hostport.find(':');
    if (colon == std::string::npos) {
        ep.host = hostport;
        ep.port = 80;
    } else {
        ep.host = hostport.substr(0, colon);
        try {
            ep.port = std::stoi(hostport.substr(colon + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("LlmEndpoint: bad port in " + url);
        }
    }
    if (ep.host.empty()) throw std::invalid_argument("LlmEndpoint: empty host in " + url);
    if (ep.port <= 0 || ep.port > 65535)
        throw std::invalid_argument("LlmEndpoint: bad port in " + url);
    return ep;
}

std::vector<ExplanationRecord> cmd_explain(const std::vector<FaceDetection>& detections,
                                           const ExplainOptions& opts) {
    std::optional<LlmEndpoint> endpoint;
    if (!opts.offline) endpoint = LlmEndpoint::parse(opts.llm_url);  // validate before any call

    std::vector<ExplanationRecord> out;
    out.reserve(detections.size());
    for (const auto& d : detections) {
        ExplanationRecord rec;
        rec.clip_id = d.clip_id;
        rec.frame_id = d.frame_id;
        rec.face_id = d.face_id;
        rec.final_label = d.final_label;
        rec.fused_score = d.fused_score;
        rec.attribution = d.attribution;

        if (endpoint) {
            httplib::Client client(endpoint->host, endpoint->port);
            client.set_connection_timeout(static_cast<int>(opts.timeout_sec),
                                          static_cast<int>(opts.timeout_sec * 1e6) % 1000000);
            client.set_read_timeout(static_cast<int>(opts.timeout_sec), 0);
            json body;
            body["prompt"] = explanation_prompt(d);
            auto res = client.Post(endpoint->path, body.dump(), "application/json");
            if (res && res->status == 200 && !res->body.empty()) {
                rec.text = res->body;  // stored verbatim
                rec.llm_used = true;
            } else {
                rec.text = offline_explanation(d);
                rec.degraded = true;
            }
        } else {
            rec.text = offline_explanation(d);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

void write_explanations(const std::vector<ExplanationRecord>& records, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_explanations: cannot open " + path);
    for (const auto& r : records) {
        json j;
        j["clip_id"] = r.clip_id;
        j["frame_id"] = r.frame_id;
        j["face_id"] = r.face_id;
        j["final_label"] = r.final_label;
        j["fused_score"] = r.fused_score;
        j["attribution"] = json::array();
        for (ModuleId m : r.attribution) j["attribution"].push_back(module_name(m));
        j["text"] = r.text;
        j["llm_used"] = r.llm_used;
        j["degraded"] = r.degraded;
        f << j.dump() << "\n";
    }
}

}  // namespace hicom
