#pragma once

// Checkpoint container:
//
//   DRPC-CHECKPOINT 1\n
//   <manifest byte length>\n
//   <manifest JSON>
//   <raw little-endian parameter values, in manifest order>
//
// The manifest holds precision, epoch, dev score, the model config, the
// vocabularies and one {name, shape, offset, count} record per parameter.

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "drpc/model.hpp"

namespace drpc {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kCheckpointMagic = "DRPC-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

template <class T>
constexpr const char* precision_name() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? "float32" : "float64";
}

struct CheckpointInfo {
    std::size_t epoch = 0;
    double dev_f1 = 0.0;
    nlohmann::json extra = nlohmann::json::object();  // e.g. the training config
};

namespace detail {

template <class T>
void write_le(std::ostream& out, const std::vector<T>& values) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(T)));
    } else {
        for (T v : values) {
            char b[sizeof(T)];
            std::memcpy(b, &v, sizeof(T));
            std::reverse(b, b + sizeof(T));
            out.write(b, sizeof(T));
        }
    }
}

template <class T>
void read_le(std::istream& in, std::vector<T>& values) {
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(T)));
    if constexpr (std::endian::native != std::endian::little) {
        for (T& v : values) {
            char* b = reinterpret_cast<char*>(&v);
            std::reverse(b, b + sizeof(T));
        }
    }
}

}  // namespace detail

template <class T>
void write_checkpoint(std::ostream& out, const Model<T>& model, const CheckpointInfo& info) {
    nlohmann::json params = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& e : model.params) {
        params.push_back({{"name", e.name}, {"shape", e.value.shape()}, {"offset", offset}, {"count", e.value.size()}});
        offset += e.value.size();
    }
    nlohmann::json manifest = {{"version", kCheckpointVersion},
                               {"precision", precision_name<T>()},
                               {"epoch", info.epoch},
                               {"dev_f1", info.dev_f1},
                               {"config", to_json(model.config)},
                               {"vocab", to_json(model.vocab)},
                               {"extra", info.extra},
                               {"params", params}};
    const std::string text = manifest.dump();
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n' << text.size() << '\n' << text;
    for (const auto& e : model.params) detail::write_le(out, e.value.values());
    if (!out) throw CheckpointError("failed writing checkpoint");
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model, const CheckpointInfo& info) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
    write_checkpoint(out, model, info);
}

// Reads the header and manifest, leaving the stream at the first value block.
inline nlohmann::json read_checkpoint_manifest(std::istream& in) {
    std::string magic;
    int version = 0;
    std::size_t len = 0;
    in >> magic >> version >> len;
    if (!in || magic != kCheckpointMagic) throw CheckpointError("not a checkpoint file");
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    in.get();
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw CheckpointError("truncated checkpoint manifest");
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("bad checkpoint manifest: ") + e.what());
    }
}

inline nlohmann::json load_checkpoint_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    return read_checkpoint_manifest(in);
}

template <class T>
Model<T> read_checkpoint(std::istream& in, CheckpointInfo* info = nullptr) {
    const nlohmann::json manifest = read_checkpoint_manifest(in);
    if (manifest.at("precision") != precision_name<T>())
        throw CheckpointError("checkpoint precision is " + manifest.at("precision").get<std::string>() + ", expected " +
                              precision_name<T>());
    Model<T> model;
    update_from_json(model.config, manifest.at("config"));
    model.vocab = vocabularies_from_json(manifest.at("vocab"));
    for (const auto& p : manifest.at("params")) {
        Tensor<T> t(p.at("shape").get<Shape>());
        if (t.size() != p.at("count").get<std::size_t>())
            throw CheckpointError("parameter " + p.at("name").get<std::string>() + " count does not match its shape");
        detail::read_le(in, t.values());
        if (!in) throw CheckpointError("truncated values for parameter " + p.at("name").get<std::string>());
        model.params.add(p.at("name").get<std::string>(), std::move(t));
    }
    if (info) {
        info->epoch = manifest.at("epoch").get<std::size_t>();
        info->dev_f1 = manifest.at("dev_f1").get<double>();
        info->extra = manifest.value("extra", nlohmann::json::object());
    }
    return model;
}

template <class T>
Model<T> load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    return read_checkpoint<T>(in, info);
}

// Top-level keys (dotted for nested objects) whose values differ.
inline std::vector<std::string> json_differences(const nlohmann::json& a, const nlohmann::json& b,
                                                 const std::string& prefix = "") {
    std::vector<std::string> out;
    if (a.is_object() && b.is_object()) {
        std::set<std::string> keys;
        for (auto it = a.begin(); it != a.end(); ++it) keys.insert(it.key());
        for (auto it = b.begin(); it != b.end(); ++it) keys.insert(it.key());
        for (const auto& k : keys) {
            const std::string name = prefix.empty() ? k : prefix + "." + k;
            if (!a.contains(k) || !b.contains(k)) out.push_back(name);
            else {
                auto sub = json_differences(a.at(k), b.at(k), name);
                out.insert(out.end(), sub.begin(), sub.end());
            }
        }
    } else if (a != b) {
        out.push_back(prefix);
    }
    return out;
}

}  // namespace drpc
