#pragma once

// Self-describing model checkpoints. Layout:
//   bytes 0..7   magic "VELOATTN"
//   u32          format version (little-endian)
//   u64          manifest byte length (little-endian)
//   manifest     UTF-8 JSON: dtype, model config, name-sorted parameter
//                names and shapes
//   blobs        raw IEEE-754 values, little-endian, in manifest order
//
// Round trips are bit-exact: values are memcpy'd, never reformatted.

#include <bit>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "veloattn/network.hpp"

namespace veloattn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; big-endian hosts need byte swaps");

inline constexpr char kCheckpointMagic[8] = {'V', 'E', 'L', 'O', 'A', 'T', 'T', 'N'};
inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
const char* dtype_name() {
    if constexpr (std::is_same_v<T, float>) return "f32";
    else {
        static_assert(std::is_same_v<T, double>, "checkpoints support float and double only");
        return "f64";
    }
}

} // namespace detail

template <class T>
void save_model(const Model<T>& model, const std::filesystem::path& path) {
    nlohmann::json manifest;
    manifest["dtype"] = detail::dtype_name<T>();
    manifest["model_config"] = model.config.to_json();
    nlohmann::json plist = nlohmann::json::array();
    for (const auto& [name, p] : model.params)
        plist.push_back({{"name", name}, {"shape", p.shape}});
    manifest["params"] = std::move(plist);
    const std::string mtext = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("checkpoint: cannot open " + path.string() + " for writing");
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const uint32_t version = kCheckpointVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const uint64_t mlen = mtext.size();
    out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
    out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    for (const auto& [name, p] : model.params)
        out.write(reinterpret_cast<const char*>(p.values.data()),
                  static_cast<std::streamsize>(p.values.size() * sizeof(T)));
    if (!out) throw DataError("checkpoint: write failed for " + path.string());
}

template <class T>
Model<T> load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open " + path.string());

    char magic[sizeof(kCheckpointMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw DataError("checkpoint: bad magic in " + path.string());
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kCheckpointVersion)
        throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
    uint64_t mlen = 0;
    in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
    if (!in) throw DataError("checkpoint: truncated manifest header");
    std::string mtext(mlen, '\0');
    in.read(mtext.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw DataError("checkpoint: truncated manifest");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(mtext);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: manifest parse error: ") + e.what());
    }
    const std::string dtype = manifest.at("dtype").get<std::string>();
    if (dtype != detail::dtype_name<T>())
        throw ConfigError("checkpoint: dtype " + dtype + " does not match requested precision " +
                          detail::dtype_name<T>());

    Model<T> model = build_model<T>(ModelConfig::from_json(manifest.at("model_config")), 0);

    const auto& plist = manifest.at("params");
    if (plist.size() != model.params.count())
        throw ConfigError("checkpoint: parameter count mismatch");
    for (const auto& entry : plist) {
        const std::string name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<size_t>>();
        if (!model.params.contains(name))
            throw ConfigError("checkpoint: unknown parameter " + name);
        Param<T>& p = model.params.at(name);
        if (p.shape != shape) throw ConfigError("checkpoint: shape mismatch for " + name);
        in.read(reinterpret_cast<char*>(p.values.data()),
                static_cast<std::streamsize>(p.values.size() * sizeof(T)));
        if (!in) throw DataError("checkpoint: truncated blob for " + name);
    }
    return model;
}

} // namespace veloattn
