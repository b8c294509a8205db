#include <catch2/catch.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>

#include "bodycomp/io.hpp"

using namespace bodycomp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("bodycomp_io_" + std::to_string(
                                     std::chrono::steady_clock::now().time_since_epoch().count()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

CtSlice sample_slice() {
    CtSlice slice;
    slice.width = 3;
    slice.height = 2;
    slice.hu = {-1024, -100, 0, 50, 275, 3071};
    slice.spacing_x = 0.9766;
    slice.spacing_y = 0.9766;
    slice.subject_id = "s42";
    slice.scan_date = {2003, 7, 19};
    return slice;
}

}  // namespace

TEST_CASE("slice write/read round-trips bit for bit", "[io]") {
    TempDir dir;
    const fs::path path = dir.path / "scan.hu16";
    const CtSlice original = sample_slice();
    io::write_slice(original, path);

    const CtSlice loaded = io::read_slice(path);
    CHECK(loaded.width == original.width);
    CHECK(loaded.height == original.height);
    CHECK(loaded.hu == original.hu);
    CHECK(loaded.spacing_x == 0.9766);
    CHECK(loaded.spacing_y == 0.9766);
    CHECK(loaded.subject_id == "s42");
    CHECK(loaded.scan_date == Date{2003, 7, 19});

    // No stray temp files from the atomic write.
    for (const auto& entry : fs::directory_iterator(dir.path))
        CHECK(entry.path().extension() != ".tmp");
}

TEST_CASE("truncated slice payloads name the expected and actual sizes", "[io]") {
    TempDir dir;
    const fs::path path = dir.path / "scan.hu16";
    io::write_slice(sample_slice(), path);
    io::atomic_write(path, std::string(7, '\0'));  // truncate to 7 bytes
    CHECK_THROWS_WITH(io::read_slice(path),
                      Catch::Contains("expected 12 bytes") && Catch::Contains("got 7"));
}

TEST_CASE("slice validation failures are reported with context", "[io]") {
    TempDir dir;
    const fs::path path = dir.path / "scan.hu16";
    SECTION("broken sidecar JSON") {
        io::write_slice(sample_slice(), path);
        io::atomic_write(io::sidecar_path(path), "{not json");
        CHECK_THROWS_WITH(io::read_slice(path), Catch::Contains("sidecar"));
    }
    SECTION("missing sidecar field") {
        io::write_slice(sample_slice(), path);
        io::atomic_write(io::sidecar_path(path), R"({"width": 3, "height": 2})");
        CHECK_THROWS_WITH(io::read_slice(path), Catch::Contains("sidecar"));
    }
    SECTION("HU outside the calibrated range") {
        CtSlice slice = sample_slice();
        slice.hu[0] = 3071;
        io::write_slice(slice, path);
        // Rewrite the payload with an out-of-range value (3072).
        std::string payload = io::read_file_bytes(path);
        payload[0] = static_cast<char>(3072 & 0xFF);
        payload[1] = static_cast<char>(3072 >> 8);
        io::atomic_write(path, payload);
        CHECK_THROWS_WITH(io::read_slice(path), Catch::Contains("outside"));
    }
}

TEST_CASE("label map PGM round-trips and validates codes", "[io]") {
    TempDir dir;
    const fs::path path = dir.path / "labels.pgm";

    SECTION("round-trip") {
        LabelMap map(4, 3);
        for (std::size_t i = 0; i < map.labels.size(); ++i)
            map.labels[i] = static_cast<std::uint8_t>(i % kTissueClassCount);
        io::write_label_map(map, path);
        CHECK(io::read_label_map(path) == map);
    }
    SECTION("an empty map is valid") {
        const LabelMap map(2, 2);
        io::write_label_map(map, path);
        CHECK(io::read_label_map(path) == map);
    }
    SECTION("unknown codes are rejected") {
        std::string bytes = "P5\n2 1\n255\n";
        bytes.push_back(static_cast<char>(99));
        bytes.push_back(static_cast<char>(1));
        io::atomic_write(path, bytes);
        CHECK_THROWS_WITH(io::read_label_map(path), Catch::Contains("99"));
    }
    SECTION("comments in the header are tolerated") {
        std::string bytes = "P5\n# produced elsewhere\n2 1\n255\n";
        bytes.push_back(static_cast<char>(7));
        bytes.push_back(static_cast<char>(0));
        io::atomic_write(path, bytes);
        const LabelMap map = io::read_label_map(path);
        CHECK(map.at(0, 0) == 7);
    }
    SECTION("wrong magic is rejected") {
        io::atomic_write(path, "P6\n2 1\n255\nxxxxxx");
        CHECK_THROWS_WITH(io::read_label_map(path), Catch::Contains("P5"));
    }
    SECTION("payload size must match the header") {
        io::atomic_write(path, std::string("P5\n4 4\n255\n") + "abc");
        CHECK_THROWS_WITH(io::read_label_map(path), Catch::Contains("expected 16"));
    }
}

TEST_CASE("manifests parse, resolve paths and reject duplicates", "[io]") {
    TempDir dir;
    const fs::path path = dir.path / "manifest.json";

    SECTION("round-trip with relative path resolution") {
        io::CohortManifest manifest;
        manifest.entries.push_back(
            {"a", Date{2000, 1, 1}, "slices/a1.hu16", std::nullopt, std::string("masks/m.pgm"),
             std::nullopt});
        io::write_manifest(manifest, path);
        const io::CohortManifest loaded = io::read_manifest(path);
        REQUIRE(loaded.entries.size() == 1);
        CHECK(loaded.entries[0].slice_path == (dir.path / "slices/a1.hu16").string());
        REQUIRE(loaded.entries[0].muscle_mask_path.has_value());
        CHECK(*loaded.entries[0].muscle_mask_path == (dir.path / "masks/m.pgm").string());
        CHECK_FALSE(loaded.entries[0].organ_mask_path.has_value());
    }
    SECTION("duplicate (subject, date) entries are rejected") {
        io::atomic_write(path, R"({"entries": [
            {"subject_id": "a", "scan_date": "2000-01-01", "slice_path": "x.hu16"},
            {"subject_id": "a", "scan_date": "2000-01-01", "slice_path": "y.hu16"}]})");
        CHECK_THROWS_WITH(io::read_manifest(path), Catch::Contains("duplicate"));
    }
    SECTION("missing fields are reported") {
        io::atomic_write(path, R"({"entries": [{"subject_id": "a"}]})");
        CHECK_THROWS_WITH(io::read_manifest(path), Catch::Contains("manifest"));
    }
}

TEST_CASE("phantom specs load from JSON", "[io]") {
    TempDir dir;
    const fs::path path = dir.path / "spec.json";
    io::atomic_write(path, R"({
        "width": 48, "height": 40, "spacing": 0.5,
        "body": {"cx": 24, "cy": 20, "rx": 20, "ry": 16, "mean_hu": 42},
        "compartments": [
            {"shape": "ellipse", "cx": 24, "cy": 20, "rx": 6, "ry": 5, "class": "liver", "mean_hu": 55},
            {"shape": "annulus", "cx": 24, "cy": 20, "outer_rx": 12, "outer_ry": 10,
             "inner_rx": 9, "inner_ry": 8, "class": 10, "mean_hu": -100},
            {"shape": "rect", "x0": 20, "y0": 6, "x1": 28, "y1": 10, "class": "muscle", "mean_hu": 50}
        ],
        "noise_sigma": 2.5, "seed": 77, "subject_id": "ph1", "scan_date": "2010-05-04"
    })");
    const phantom::PhantomSpec spec = io::read_phantom_spec(path);
    CHECK(spec.width == 48);
    CHECK(spec.spacing == 0.5);
    CHECK(spec.body_hu == 42.0);
    REQUIRE(spec.compartments.size() == 3);
    CHECK(spec.compartments[0].tissue == TissueClass::Liver);
    CHECK(spec.compartments[1].tissue == TissueClass::Sft);
    CHECK(spec.compartments[2].tissue == TissueClass::Muscle);
    CHECK(spec.noise_sigma == 2.5);
    CHECK(spec.seed == 77);
    CHECK(spec.subject_id == "ph1");

    SECTION("unknown shapes and classes are rejected") {
        io::atomic_write(path, R"({"compartments": [
            {"shape": "blob", "class": "muscle", "mean_hu": 0}]})");
        CHECK_THROWS_WITH(io::read_phantom_spec(path), Catch::Contains("shape"));
        io::atomic_write(path, R"({"compartments": [
            {"shape": "rect", "x0": 0, "y0": 0, "x1": 1, "y1": 1, "class": "bone", "mean_hu": 0}]})");
        CHECK_THROWS_WITH(io::read_phantom_spec(path), Catch::Contains("bone"));
    }
}

TEST_CASE("numbers format to six significant digits", "[io]") {
    CHECK(io::format_number(0.9) == "0.9");
    CHECK(io::format_number(1.0) == "1");
    CHECK(io::format_number(0.0) == "0");
    CHECK(io::format_number(95.374756) == "95.3748");
    CHECK(io::format_number(1.4002115) == "1.40021");
    CHECK(io::format_number(-25.0) == "-25");
}
