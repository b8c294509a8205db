#pragma once

// File formats and serialization.
//
// Slice: raw little-endian int16 HU payload, row-major, paired with a JSON
// sidecar at <path>.json holding {width, height, spacing_x, spacing_y,
// subject_id, scan_date}. Label map: binary PGM (P5, maxval 255) with the
// class codes 0..13 stored directly. Cohort manifest: JSON with one entry
// per scan. All writes go through a temp-file-then-rename so interrupted
// runs never leave partial output.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bodycomp/core.hpp"
#include "bodycomp/phantom.hpp"

namespace bodycomp::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Atomic file writes

inline void atomic_write(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// ---------------------------------------------------------------------------
// Fixed decimal formatting: 6 significant digits, byte-stable across runs
// and platforms.

inline std::string format_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

// ---------------------------------------------------------------------------
// CT slice

inline fs::path sidecar_path(const fs::path& slice_path) {
    return fs::path(slice_path.string() + ".json");
}

inline void write_slice(const CtSlice& slice, const fs::path& path) {
    slice.validate();
    std::string payload;
    payload.reserve(slice.hu.size() * 2);
    for (std::int16_t v : slice.hu) {
        const auto u = static_cast<std::uint16_t>(v);
        payload.push_back(static_cast<char>(u & 0xFF));
        payload.push_back(static_cast<char>((u >> 8) & 0xFF));
    }
    nlohmann::json sidecar = {
        {"width", slice.width},
        {"height", slice.height},
        {"spacing_x", slice.spacing_x},
        {"spacing_y", slice.spacing_y},
        {"subject_id", slice.subject_id},
        {"scan_date", slice.scan_date.to_string()},
    };
    atomic_write(path, payload);
    atomic_write(sidecar_path(path), sidecar.dump(2) + "\n");
}

inline CtSlice read_slice(const fs::path& path) {
    nlohmann::json sidecar;
    try {
        sidecar = nlohmann::json::parse(read_file_bytes(sidecar_path(path)));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed slice sidecar " + sidecar_path(path).string() + ": " +
                                 e.what());
    }

    CtSlice slice;
    try {
        slice.width = sidecar.at("width").get<int>();
        slice.height = sidecar.at("height").get<int>();
        slice.spacing_x = sidecar.at("spacing_x").get<double>();
        slice.spacing_y = sidecar.at("spacing_y").get<double>();
        slice.subject_id = sidecar.at("subject_id").get<std::string>();
        slice.scan_date = Date::parse(sidecar.at("scan_date").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed slice sidecar " + sidecar_path(path).string() + ": " +
                                 e.what());
    }
    if (slice.width <= 0 || slice.height <= 0)
        throw std::runtime_error("malformed slice sidecar " + sidecar_path(path).string() +
                                 ": non-positive dimensions");

    const std::string payload = read_file_bytes(path);
    const std::size_t expected = static_cast<std::size_t>(slice.width) * slice.height * 2;
    if (payload.size() != expected)
        throw std::runtime_error("slice payload " + path.string() + ": expected " +
                                 std::to_string(expected) + " bytes, got " +
                                 std::to_string(payload.size()));

    slice.hu.resize(static_cast<std::size_t>(slice.width) * slice.height);
    for (std::size_t i = 0; i < slice.hu.size(); ++i) {
        const auto lo = static_cast<std::uint8_t>(payload[2 * i]);
        const auto hi = static_cast<std::uint8_t>(payload[2 * i + 1]);
        slice.hu[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
    }
    try {
        slice.validate();
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error("invalid slice " + path.string() + ": " + e.what());
    }
    return slice;
}

// ---------------------------------------------------------------------------
// Label maps (binary PGM)

inline void write_label_map(const LabelMap& map, const fs::path& path) {
    map.validate();
    std::string bytes = "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) +
                        "\n255\n";
    bytes.append(reinterpret_cast<const char*>(map.labels.data()), map.labels.size());
    atomic_write(path, bytes);
}

namespace detail {

inline int pgm_next_int(const std::string& bytes, std::size_t& pos, const std::string& path) {
    // Skip whitespace and '#' comment lines between header tokens.
    while (pos < bytes.size()) {
        const char c = bytes[pos];
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    std::size_t start = pos;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') ++pos;
    if (pos == start) throw std::runtime_error("malformed PGM header in " + path);
    return std::stoi(bytes.substr(start, pos - start));
}

}  // namespace detail

inline LabelMap read_label_map(const fs::path& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        throw std::runtime_error("not a binary PGM (P5): " + path.string());
    std::size_t pos = 2;
    const int width = detail::pgm_next_int(bytes, pos, path.string());
    const int height = detail::pgm_next_int(bytes, pos, path.string());
    const int maxval = detail::pgm_next_int(bytes, pos, path.string());
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255)
        throw std::runtime_error("malformed PGM header in " + path.string());
    // Exactly one whitespace byte separates the header from the payload.
    if (pos >= bytes.size() || (bytes[pos] != '\n' && bytes[pos] != ' ' && bytes[pos] != '\t' &&
                                bytes[pos] != '\r'))
        throw std::runtime_error("malformed PGM header in " + path.string());
    ++pos;

    const std::size_t expected = static_cast<std::size_t>(width) * height;
    if (bytes.size() - pos != expected)
        throw std::runtime_error("label map " + path.string() + ": expected " +
                                 std::to_string(expected) + " pixel bytes, got " +
                                 std::to_string(bytes.size() - pos));

    LabelMap map(width, height);
    for (std::size_t i = 0; i < expected; ++i) {
        const auto code = static_cast<std::uint8_t>(bytes[pos + i]);
        if (!is_valid_class_code(code))
            throw std::runtime_error("label map " + path.string() + ": invalid class code " +
                                     std::to_string(code));
        map.labels[i] = code;
    }
    return map;
}

// ---------------------------------------------------------------------------
// Cohort manifest

struct ManifestEntry {
    std::string subject_id;
    Date scan_date;
    std::string slice_path;
    std::optional<std::string> organ_mask_path;
    std::optional<std::string> muscle_mask_path;
    std::optional<std::string> wall_mask_path;
};

struct CohortManifest {
    std::vector<ManifestEntry> entries;
};

inline CohortManifest read_manifest(const fs::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file_bytes(path));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed manifest " + path.string() + ": " + e.what());
    }
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

    auto resolve = [&](const std::string& p) {
        const fs::path candidate(p);
        return candidate.is_absolute() ? candidate.string() : (base / candidate).string();
    };

    CohortManifest manifest;
    try {
        for (const auto& item : doc.at("entries")) {
            ManifestEntry entry;
            entry.subject_id = item.at("subject_id").get<std::string>();
            entry.scan_date = Date::parse(item.at("scan_date").get<std::string>());
            entry.slice_path = resolve(item.at("slice_path").get<std::string>());
            if (item.contains("organ_mask_path"))
                entry.organ_mask_path = resolve(item.at("organ_mask_path").get<std::string>());
            if (item.contains("muscle_mask_path"))
                entry.muscle_mask_path = resolve(item.at("muscle_mask_path").get<std::string>());
            if (item.contains("wall_mask_path"))
                entry.wall_mask_path = resolve(item.at("wall_mask_path").get<std::string>());
            manifest.entries.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed manifest " + path.string() + ": " + e.what());
    }

    for (std::size_t a = 0; a < manifest.entries.size(); ++a)
        for (std::size_t b = a + 1; b < manifest.entries.size(); ++b)
            if (manifest.entries[a].subject_id == manifest.entries[b].subject_id &&
                manifest.entries[a].scan_date == manifest.entries[b].scan_date)
                throw std::runtime_error("manifest " + path.string() + ": duplicate entry for " +
                                         manifest.entries[a].subject_id + " on " +
                                         manifest.entries[a].scan_date.to_string());
    return manifest;
}

inline void write_manifest(const CohortManifest& manifest, const fs::path& path) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : manifest.entries) {
        nlohmann::json item = {
            {"subject_id", e.subject_id},
            {"scan_date", e.scan_date.to_string()},
            {"slice_path", e.slice_path},
        };
        if (e.organ_mask_path) item["organ_mask_path"] = *e.organ_mask_path;
        if (e.muscle_mask_path) item["muscle_mask_path"] = *e.muscle_mask_path;
        if (e.wall_mask_path) item["wall_mask_path"] = *e.wall_mask_path;
        entries.push_back(std::move(item));
    }
    atomic_write(path, nlohmann::json{{"entries", entries}}.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Declarative phantom specs

namespace detail {

inline TissueClass parse_tissue_class(const nlohmann::json& value, const std::string& path) {
    if (value.is_number_integer()) {
        const int code = value.get<int>();
        if (!is_valid_class_code(code))
            throw std::runtime_error("phantom spec " + path + ": invalid class code " +
                                     std::to_string(code));
        return static_cast<TissueClass>(code);
    }
    const auto cls = tissue_class_from_name(value.get<std::string>());
    if (!cls)
        throw std::runtime_error("phantom spec " + path + ": unknown class '" +
                                 value.get<std::string>() + "'");
    return *cls;
}

}  // namespace detail

// JSON phantom spec:
// {
//   "width": 96, "height": 96, "spacing": 1.0,
//   "body": {"cx": 48, "cy": 48, "rx": 40, "ry": 34, "mean_hu": 40},
//   "compartments": [
//     {"shape": "ellipse", "cx": 30, "cy": 48, "rx": 10, "ry": 8,
//      "class": "muscle", "mean_hu": 50},
//     {"shape": "annulus", "cx": 48, "cy": 48, "outer_rx": 40, "outer_ry": 34,
//      "inner_rx": 32, "inner_ry": 27, "class": "sft", "mean_hu": -100}
//   ],
//   "noise_sigma": 0.0, "seed": 7,
//   "subject_id": "phantom", "scan_date": "2000-01-01"
// }
inline phantom::PhantomSpec read_phantom_spec(const fs::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file_bytes(path));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed phantom spec " + path.string() + ": " + e.what());
    }

    phantom::PhantomSpec spec;
    try {
        spec.width = doc.value("width", spec.width);
        spec.height = doc.value("height", spec.height);
        spec.spacing = doc.value("spacing", spec.spacing);
        spec.noise_sigma = doc.value("noise_sigma", spec.noise_sigma);
        spec.seed = doc.value("seed", spec.seed);
        spec.subject_id = doc.value("subject_id", spec.subject_id);
        if (doc.contains("scan_date")) spec.scan_date = Date::parse(doc.at("scan_date").get<std::string>());
        if (doc.contains("body")) {
            const auto& b = doc.at("body");
            spec.body = {b.at("cx").get<double>(), b.at("cy").get<double>(),
                         b.at("rx").get<double>(), b.at("ry").get<double>()};
            spec.body_hu = b.value("mean_hu", spec.body_hu);
        }
        for (const auto& c : doc.value("compartments", nlohmann::json::array())) {
            phantom::Compartment comp;
            const std::string shape = c.at("shape").get<std::string>();
            if (shape == "ellipse") {
                comp.shape = phantom::Ellipse{c.at("cx").get<double>(), c.at("cy").get<double>(),
                                              c.at("rx").get<double>(), c.at("ry").get<double>()};
            } else if (shape == "annulus") {
                comp.shape = phantom::Annulus{c.at("cx").get<double>(),       c.at("cy").get<double>(),
                                              c.at("outer_rx").get<double>(), c.at("outer_ry").get<double>(),
                                              c.at("inner_rx").get<double>(), c.at("inner_ry").get<double>()};
            } else if (shape == "rect") {
                comp.shape = phantom::Rect{c.at("x0").get<int>(), c.at("y0").get<int>(),
                                           c.at("x1").get<int>(), c.at("y1").get<int>()};
            } else {
                throw std::runtime_error("phantom spec " + path.string() + ": unknown shape '" + shape + "'");
            }
            comp.tissue = detail::parse_tissue_class(c.at("class"), path.string());
            comp.mean_hu = c.at("mean_hu").get<double>();
            spec.compartments.push_back(std::move(comp));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed phantom spec " + path.string() + ": " + e.what());
    }
    return spec;
}

}  // namespace bodycomp::io
