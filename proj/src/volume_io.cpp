#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cranial/error.hpp"
#include "cranial/volume.hpp"

namespace cranial {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream is(s);
    return {std::istream_iterator<std::string>(is), std::istream_iterator<std::string>()};
}

template <typename T>
T parse_number(const std::string& tok, const std::string& key) {
    T value{};
    const auto* first = tok.data();
    const auto* last = tok.data() + tok.size();
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last) {
        throw Error(ErrorKind::FormatError, "bad numeric value '" + tok + "' for " + key);
    }
    return value;
}

template <typename T>
std::array<T, 3> parse_triple(const std::string& value, const std::string& key) {
    const auto toks = split_ws(value);
    if (toks.size() != 3) throw Error(ErrorKind::FormatError, key + " needs 3 values, got '" + value + "'");
    return {parse_number<T>(toks[0], key), parse_number<T>(toks[1], key), parse_number<T>(toks[2], key)};
}

std::vector<char> slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(ErrorKind::IoError, "read failed for " + path.string());
    return data;
}

void spit(const fs::path& path, std::string_view header, std::span<const std::uint8_t> payload) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

constexpr std::size_t kMaxHeaderBytes = 1 << 16;

// Largest voxel count accepted from a file header (2^40); guards the
// dims product against overflow before any allocation.
void check_dims(const Index3& dims) {
    std::int64_t total = 1;
    for (auto d : dims) {
        if (d <= 0) throw Error(ErrorKind::DimensionError, "dims must be positive");
        if (d > (std::int64_t{1} << 40) / total) throw Error(ErrorKind::DimensionError, "dims too large");
        total *= d;
    }
}

}  // namespace

void write_mha(const VoxelGrid& g, const fs::path& path) {
    const auto& geom = g.geometry();
    std::string header;
    header += "ObjectType = Image\n";
    header += "NDims = 3\n";
    header += "BinaryData = True\n";
    header += "BinaryDataByteOrderMSB = False\n";
    header += "CompressedData = False\n";
    header += "TransformMatrix = 1 0 0 0 1 0 0 0 1\n";
    header += "Offset = " + format_double(geom.origin[0]) + " " + format_double(geom.origin[1]) + " " +
              format_double(geom.origin[2]) + "\n";
    header += "ElementSpacing = " + format_double(geom.spacing[0]) + " " + format_double(geom.spacing[1]) + " " +
              format_double(geom.spacing[2]) + "\n";
    header += "DimSize = " + std::to_string(geom.dims[0]) + " " + std::to_string(geom.dims[1]) + " " +
              std::to_string(geom.dims[2]) + "\n";
    header += "ElementType = MET_UCHAR\n";
    header += "ElementDataFile = LOCAL\n";
    const auto bytes = g.to_bytes();
    spit(path, header, bytes);
}

VoxelGrid parse_mha(std::span<const char> contents) {
    std::map<std::string, std::string> keys;
    std::size_t pos = 0;
    bool found_data = false;
    while (pos < contents.size() && pos < kMaxHeaderBytes) {
        const auto begin = contents.begin() + static_cast<std::ptrdiff_t>(pos);
        const auto nl = std::find(begin, contents.end(), '\n');
        if (nl == contents.end()) break;
        const std::string_view line(&*begin, static_cast<std::size_t>(nl - begin));
        pos += line.size() + 1;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::FormatError, "header line without '=': '" + trim(line.substr(0, 64)) + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw Error(ErrorKind::FormatError, "empty header key");
        keys[key] = value;
        if (key == "ElementDataFile") {
            found_data = true;
            break;
        }
    }
    if (!found_data) throw Error(ErrorKind::FormatError, "no ElementDataFile entry in MetaImage header");

    auto require = [&keys](const std::string& key) -> const std::string& {
        auto it = keys.find(key);
        if (it == keys.end()) throw Error(ErrorKind::FormatError, "missing header key " + key);
        return it->second;
    };
    if (require("ObjectType") != "Image") throw Error(ErrorKind::FormatError, "ObjectType must be Image");
    if (require("NDims") != "3") throw Error(ErrorKind::FormatError, "NDims must be 3, got " + keys["NDims"]);
    if (require("ElementType") != "MET_UCHAR") {
        throw Error(ErrorKind::FormatError, "ElementType must be MET_UCHAR, got " + keys["ElementType"]);
    }
    if (require("ElementDataFile") != "LOCAL") throw Error(ErrorKind::FormatError, "ElementDataFile must be LOCAL");
    if (auto it = keys.find("CompressedData"); it != keys.end() && it->second != "False") {
        throw Error(ErrorKind::FormatError, "compressed payloads are not supported");
    }
    if (auto it = keys.find("BinaryData"); it != keys.end() && it->second != "True") {
        throw Error(ErrorKind::FormatError, "BinaryData must be True");
    }
    if (auto it = keys.find("TransformMatrix"); it != keys.end()) {
        const auto toks = split_ws(it->second);
        const std::array<double, 9> identity{1, 0, 0, 0, 1, 0, 0, 0, 1};
        if (toks.size() != 9) throw Error(ErrorKind::FormatError, "TransformMatrix needs 9 values");
        for (std::size_t i = 0; i < 9; ++i) {
            if (parse_number<double>(toks[i], "TransformMatrix") != identity[i]) {
                throw Error(ErrorKind::FormatError, "only the identity TransformMatrix is supported");
            }
        }
    }

    Geometry geom;
    const auto dims = parse_triple<std::int64_t>(require("DimSize"), "DimSize");
    check_dims(dims);
    geom.dims = dims;
    if (auto it = keys.find("ElementSpacing"); it != keys.end()) {
        geom.spacing = parse_triple<double>(it->second, "ElementSpacing");
    }
    for (const char* alias : {"Offset", "Origin", "Position"}) {
        if (auto it = keys.find(alias); it != keys.end()) {
            geom.origin = parse_triple<double>(it->second, alias);
            break;
        }
    }
    for (int i = 0; i < 3; ++i) {
        if (!(geom.spacing[i] > 0.0)) throw Error(ErrorKind::FormatError, "ElementSpacing must be > 0");
    }

    const auto payload = contents.subspan(pos);
    if (static_cast<std::int64_t>(payload.size()) != geom.voxel_count()) {
        throw Error(ErrorKind::DimensionError, "DimSize implies " + std::to_string(geom.voxel_count()) +
                                                   " bytes but payload has " + std::to_string(payload.size()));
    }
    return VoxelGrid::from_bytes(
        geom, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()));
}

VoxelGrid read_mha(const fs::path& path) {
    const auto data = slurp(path);
    return parse_mha(data);
}

namespace {

std::pair<fs::path, fs::path> raw_paths(const fs::path& path) {
    fs::path stem = path;
    if (stem.extension() == ".bin" || stem.extension() == ".json") stem.replace_extension();
    fs::path bin = stem;
    bin += ".bin";
    fs::path json = stem;
    json += ".json";
    return {bin, json};
}

}  // namespace

void write_raw(const VoxelGrid& g, const fs::path& path) {
    const auto [bin, json_path] = raw_paths(path);
    const auto& geom = g.geometry();
    nlohmann::json j;
    j["dims"] = {geom.dims[0], geom.dims[1], geom.dims[2]};
    j["spacing_mm"] = {geom.spacing[0], geom.spacing[1], geom.spacing[2]};
    j["origin_mm"] = {geom.origin[0], geom.origin[1], geom.origin[2]};
    spit(json_path, j.dump(2) + "\n", {});
    spit(bin, {}, g.to_bytes());
}

VoxelGrid read_raw(const fs::path& path) {
    const auto [bin, json_path] = raw_paths(path);
    const auto sidecar = slurp(json_path);
    Geometry geom;
    try {
        const auto j = nlohmann::json::parse(sidecar.begin(), sidecar.end());
        for (int i = 0; i < 3; ++i) {
            geom.dims[i] = j.at("dims").at(i).get<std::int64_t>();
            geom.spacing[i] = j.at("spacing_mm").at(i).get<double>();
            geom.origin[i] = j.at("origin_mm").at(i).get<double>();
        }
        if (j.at("dims").size() != 3 || j.at("spacing_mm").size() != 3 || j.at("origin_mm").size() != 3) {
            throw Error(ErrorKind::FormatError, "sidecar arrays must have 3 entries");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, "bad sidecar " + json_path.string() + ": " + e.what());
    }
    check_dims(geom.dims);
    for (int i = 0; i < 3; ++i) {
        if (!(geom.spacing[i] > 0.0)) throw Error(ErrorKind::FormatError, "spacing_mm must be > 0");
    }
    const auto payload = slurp(bin);
    if (static_cast<std::int64_t>(payload.size()) != geom.voxel_count()) {
        throw Error(ErrorKind::DimensionError, "dims imply " + std::to_string(geom.voxel_count()) +
                                                   " bytes but " + bin.string() + " has " +
                                                   std::to_string(payload.size()));
    }
    return VoxelGrid::from_bytes(
        geom, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()));
}

void write_volume(const VoxelGrid& g, const fs::path& path) {
    if (path.extension() == ".mha") {
        write_mha(g, path);
    } else {
        write_raw(g, path);
    }
}

VoxelGrid read_volume(const fs::path& path) {
    if (path.extension() == ".mha") return read_mha(path);
    return read_raw(path);
}

}  // namespace cranial
