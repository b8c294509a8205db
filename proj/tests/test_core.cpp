#include <catch2/catch.hpp>

#include <random>

#include "bodycomp/core.hpp"

using namespace bodycomp;

namespace {

CtSlice make_slice(int width, int height, std::int16_t fill = 0) {
    CtSlice slice;
    slice.width = width;
    slice.height = height;
    slice.hu.assign(static_cast<std::size_t>(width) * height, fill);
    slice.subject_id = "test";
    slice.scan_date = {2000, 1, 1};
    return slice;
}

}  // namespace

TEST_CASE("soft-tissue window maps the bounds and midpoint", "[core]") {
    CtSlice slice = make_slice(3, 1);
    slice.hu = {-125, 275, 75};
    const auto display = apply_soft_tissue_window(slice);
    CHECK(display.data[0] == 0);
    CHECK(display.data[1] == 255);
    CHECK(display.data[2] == 128);  // 127.5 rounds half-up
}

TEST_CASE("soft-tissue window clamps out-of-window HU", "[core]") {
    CtSlice slice = make_slice(4, 1);
    slice.hu = {-1024, -126, 276, 3071};
    const auto display = apply_soft_tissue_window(slice);
    CHECK(display.data[0] == 0);
    CHECK(display.data[1] == 0);
    CHECK(display.data[2] == 255);
    CHECK(display.data[3] == 255);
}

TEST_CASE("soft-tissue window is monotone in HU", "[core]") {
    CtSlice slice = make_slice(kMaxHu - kMinHu + 1, 1);
    for (int v = kMinHu; v <= kMaxHu; ++v)
        slice.hu[static_cast<std::size_t>(v - kMinHu)] = static_cast<std::int16_t>(v);
    const auto display = apply_soft_tissue_window(slice);
    for (std::size_t i = 1; i < display.data.size(); ++i) CHECK(display.data[i] >= display.data[i - 1]);
}

TEST_CASE("soft-tissue window is stable through its inverse map", "[core]") {
    // For each display value, the rounded inverse HU must map back exactly.
    for (int d = 0; d <= 255; ++d) {
        const double inverse_hu = d * 400.0 / 255.0 - 125.0;
        CtSlice slice = make_slice(1, 1, static_cast<std::int16_t>(std::lround(inverse_hu)));
        const auto display = apply_soft_tissue_window(slice);
        CHECK(static_cast<int>(display.data[0]) == d);
    }
}

TEST_CASE("dice handles full, zero and partial overlap", "[core]") {
    BinaryMask a(4, 1), b(4, 1);
    SECTION("identical nonempty masks") {
        a.set(0, 0);
        a.set(1, 0);
        CHECK(dice(a, a) == 1.0);
    }
    SECTION("disjoint nonempty masks") {
        a.set(0, 0);
        b.set(1, 0);
        CHECK(dice(a, b) == 0.0);
    }
    SECTION("half overlap by hand") {
        BinaryMask x(8, 1), y(8, 1);
        for (int i = 0; i < 4; ++i) x.set(i, 0);
        for (int i = 2; i < 6; ++i) y.set(i, 0);
        CHECK(dice(x, y) == 0.5);  // 2*2 / (4+4)
    }
    SECTION("both empty scores 1 by convention") { CHECK(dice(a, b) == 1.0); }
    SECTION("dimension mismatch is an error") {
        BinaryMask c(3, 1);
        CHECK_THROWS_AS(dice(a, c), std::invalid_argument);
    }
}

TEST_CASE("dice is symmetric", "[core]") {
    std::mt19937 rng(123);
    for (int trial = 0; trial < 20; ++trial) {
        BinaryMask a(16, 16), b(16, 16);
        for (std::size_t i = 0; i < a.bits.size(); ++i) {
            a.bits[i] = rng() & 1;
            b.bits[i] = rng() & 1;
        }
        CHECK(dice(a, b) == dice(b, a));
        if (!a.empty()) CHECK(dice(a, a) == 1.0);
    }
}

TEST_CASE("class_mask selects exactly the requested class", "[core]") {
    SECTION("all-background map gives an empty mask") {
        LabelMap map(4, 4);
        CHECK(class_mask(map, TissueClass::Liver).empty());
    }
    SECTION("single labeled pixel") {
        LabelMap map(1, 1);
        map.set(0, 0, TissueClass::Muscle);
        CHECK(class_mask(map, TissueClass::Muscle).count() == 1);
    }
    SECTION("checkerboard of two classes splits evenly") {
        LabelMap map(8, 8);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
                map.set(x, y, (x + y) % 2 == 0 ? TissueClass::Spleen : TissueClass::RightKidney);
        CHECK(class_mask(map, TissueClass::Spleen).count() == 32);
    }
}

TEST_CASE("class_mask partitions the map across all codes", "[core]") {
    std::mt19937 rng(7);
    LabelMap map(13, 9);
    for (auto& code : map.labels) code = static_cast<std::uint8_t>(rng() % kTissueClassCount);
    std::size_t total = 0;
    for (int code = 0; code < kTissueClassCount; ++code)
        total += class_mask(map, static_cast<TissueClass>(code)).count();
    CHECK(total == map.labels.size());
}

TEST_CASE("slice validation rejects bad dimensions, spacing and HU range", "[core]") {
    CtSlice slice = make_slice(2, 2);
    CHECK_NOTHROW(slice.validate());
    SECTION("hu range") {
        slice.hu[0] = static_cast<std::int16_t>(kMinHu - 1);
        CHECK_THROWS_AS(slice.validate(), std::invalid_argument);
    }
    SECTION("spacing") {
        slice.spacing_x = 0.0;
        CHECK_THROWS_AS(slice.validate(), std::invalid_argument);
    }
    SECTION("pixel count") {
        slice.hu.pop_back();
        CHECK_THROWS_AS(slice.validate(), std::invalid_argument);
    }
}

TEST_CASE("dates parse, compare and difference in days", "[core]") {
    const Date a = Date::parse("2000-01-01");
    const Date b = Date::parse("2001-12-31");
    CHECK(days_between(a, b) == 730);
    CHECK(a < b);
    CHECK(a.to_string() == "2000-01-01");
    CHECK(days_between(Date::parse("2020-02-28"), Date::parse("2020-03-01")) == 2);  // leap year
    CHECK_THROWS_AS(Date::parse("2001-02-29"), std::invalid_argument);
    CHECK_THROWS_AS(Date::parse("2001-13-01"), std::invalid_argument);
    CHECK_THROWS_AS(Date::parse("20010101"), std::invalid_argument);
}

TEST_CASE("tissue class names round-trip", "[core]") {
    for (int code = 0; code < kTissueClassCount; ++code) {
        const auto cls = static_cast<TissueClass>(code);
        const auto parsed = tissue_class_from_name(tissue_class_name(cls));
        REQUIRE(parsed.has_value());
        CHECK(*parsed == cls);
    }
    CHECK_FALSE(tissue_class_from_name("bone").has_value());
}
