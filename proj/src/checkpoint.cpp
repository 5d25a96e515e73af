#include "hicom/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

using nlohmann::json;

namespace hicom {

namespace {

constexpr char kMagic[8] = {'H', 'I', 'C', 'O', 'M', 'C', 'K', '1'};

json read_header(std::ifstream& f, const std::string& path) {
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htxt(hlen, '\0');
    f.read(htxt.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw std::runtime_error("checkpoint: truncated header in " + path);
    return json::parse(htxt);
}

CheckpointMeta meta_from_header(const json& h) {
    CheckpointMeta meta;
    meta.module = h.at("module").get<std::string>();
    meta.config = h.value("config", json::object());
    meta.seed = h.value("seed", 0ull);
    meta.epoch = h.value("epoch", 0);
    return meta;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const nn::ParamSet& params) {
    json h;
    h["format"] = "hicom-checkpoint-v1";
    h["module"] = meta.module;
    h["config"] = meta.config;
    h["seed"] = meta.seed;
    h["epoch"] = meta.epoch;
    h["tensors"] = json::array();
    for (const auto& v : params.views)
        h["tensors"].push_back({{"name", v.name}, {"size", v.size}});
    std::string htxt = h.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    f.write(kMagic, 8);
    uint64_t hlen = htxt.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(htxt.data(), static_cast<std::streamsize>(htxt.size()));
    for (const auto& v : params.views)
        f.write(reinterpret_cast<const char*>(v.value),
                static_cast<std::streamsize>(v.size * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

CheckpointMeta load_checkpoint(const std::string& path, nn::ParamSet& params) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    json h = read_header(f, path);

    const auto& tensors = h.at("tensors");
    if (tensors.size() != params.views.size())
        throw std::runtime_error("checkpoint: tensor count mismatch in " + path);
    for (size_t i = 0; i < params.views.size(); ++i) {
        const auto& t = tensors[i];
        if (t.at("name").get<std::string>() != params.views[i].name ||
            t.at("size").get<long>() != params.views[i].size)
            throw std::runtime_error("checkpoint: tensor layout mismatch at '" +
                                     params.views[i].name + "' in " + path);
    }
    for (auto& v : params.views) {
        f.read(reinterpret_cast<char*>(v.value),
               static_cast<std::streamsize>(v.size * sizeof(double)));
        if (!f) throw std::runtime_error("checkpoint: truncated tensor data in " + path);
    }
    return meta_from_header(h);
}

CheckpointMeta peek_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    return meta_from_header(read_header(f, path));
}

}  // namespace hicom
