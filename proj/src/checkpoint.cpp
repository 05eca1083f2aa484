#include "cranial/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cranial/error.hpp"

namespace cranial {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "checkpoint payloads assume a little-endian host");

namespace {

fs::path with_suffix(fs::path stem, const char* ext) {
    if (stem.extension() == ".json" || stem.extension() == ".bin") stem.replace_extension();
    stem += ext;
    return stem;
}

void append(std::vector<char>& out, std::span<const double> values) {
    const auto* bytes = reinterpret_cast<const char*>(values.data());
    out.insert(out.end(), bytes, bytes + values.size_bytes());
}

}  // namespace

void save_checkpoint(const fs::path& stem, const MicroUNet& model, const AdamW& optim, const CheckpointMeta& meta) {
    nlohmann::json table = nlohmann::json::array();
    std::int64_t offset = 0;
    std::vector<char> payload;
    for (const auto& p : model.parameters()) {
        const Shape& s = p.var.value().shape();
        table.push_back({{"name", p.name},
                         {"shape", {s.n, s.c, s.d, s.h, s.w}},
                         {"offset", offset},
                         {"count", s.numel()}});
        offset += s.numel();
        append(payload, p.var.value().data());
    }
    for (const auto& m : optim.first_moments()) append(payload, m);
    for (const auto& v : optim.second_moments()) append(payload, v);

    nlohmann::json manifest = {{"format", kCheckpointFormat},
                               {"dtype", "float64-le"},
                               {"sections", {"params", "first_moment", "second_moment"}},
                               {"values_per_section", offset},
                               {"model", to_json(model.config())},
                               {"optim", to_json(optim.config())},
                               {"optimizer_step", optim.steps()},
                               {"epoch", meta.epoch},
                               {"seed", meta.seed},
                               {"config_hash", meta.config_hash},
                               {"parameters", table}};

    const auto json_path = with_suffix(stem, ".json");
    const auto bin_path = with_suffix(stem, ".bin");
    {
        std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw Error(ErrorKind::IoError, "cannot write " + bin_path.string());
    }
    std::ofstream out(json_path, std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + json_path.string());
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
    const auto json_path = with_suffix(path, ".json");
    const auto bin_path = with_suffix(path, ".bin");
    std::ifstream jin(json_path);
    if (!jin) throw Error(ErrorKind::IoError, "cannot open " + json_path.string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(jin);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, "bad checkpoint manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != kCheckpointFormat) {
        throw Error(ErrorKind::FormatError, "unknown checkpoint format in " + json_path.string());
    }
    const ModelConfig mcfg = model_config_from_json(manifest.at("model"));
    const AdamWConfig ocfg = adamw_config_from_json(manifest.at("optim"));
    CheckpointMeta meta;
    meta.epoch = manifest.at("epoch").get<int>();
    meta.seed = manifest.at("seed").get<std::uint64_t>();
    meta.config_hash = manifest.at("config_hash").get<std::string>();

    MicroUNet model(mcfg, meta.seed);
    AdamW optim(ocfg, model.parameters());
    optim.set_steps(manifest.at("optimizer_step").get<std::int64_t>());

    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw Error(ErrorKind::IoError, "cannot open " + bin_path.string());
    const std::vector<char> payload((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    const auto& table = manifest.at("parameters");
    auto& params = model.parameters();
    if (table.size() != params.size()) {
        throw Error(ErrorKind::FormatError, "checkpoint lists " + std::to_string(table.size()) +
                                                " parameters, model has " + std::to_string(params.size()));
    }
    const std::int64_t per_section = model.parameter_count();
    if (static_cast<std::int64_t>(payload.size()) != 3 * per_section * 8) {
        throw Error(ErrorKind::DimensionError, "checkpoint payload has " + std::to_string(payload.size()) +
                                                   " bytes, expected " + std::to_string(3 * per_section * 8));
    }
    auto read_into = [&](std::span<double> dst, std::int64_t value_offset) {
        std::memcpy(dst.data(), payload.data() + value_offset * 8, dst.size_bytes());
    };
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& entry = table[i];
        if (entry.at("name").get<std::string>() != params[i].name ||
            entry.at("count").get<std::int64_t>() != params[i].var.value().numel()) {
            throw Error(ErrorKind::FormatError, "checkpoint parameter " + std::to_string(i) + " does not match " +
                                                    params[i].name);
        }
        const auto off = entry.at("offset").get<std::int64_t>();
        read_into(params[i].var.value().data(), off);
        read_into(optim.first_moments()[i], per_section + off);
        read_into(optim.second_moments()[i], 2 * per_section + off);
    }
    return {std::move(model), std::move(optim), meta};
}

}  // namespace cranial
