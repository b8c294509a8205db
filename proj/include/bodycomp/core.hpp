#pragma once

// Core value types for single-slice CT body-composition analysis:
// calibrated HU slices, tissue label maps, binary masks, intensity
// windowing and mask overlap scoring. Everything here is an immutable
// value after construction; all functions are pure.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bodycomp {

// Calibrated HU range of the source scans.
inline constexpr int kMinHu = -1024;
inline constexpr int kMaxHu = 3071;

// Soft-tissue display window.
inline constexpr int kWindowLowHu = -125;
inline constexpr int kWindowHighHu = 275;

// ---------------------------------------------------------------------------
// Tissue classes

// Closed enumeration of the 13 target structures plus background.
enum class TissueClass : std::uint8_t {
    Background = 0,
    Spleen = 1,
    RightKidney = 2,
    LeftKidney = 3,
    Liver = 4,
    Stomach = 5,
    Aorta = 6,
    Muscle = 7,
    InnerWall = 8,
    OuterWall = 9,
    Sft = 10,
    Vft = 11,
    Rft = 12,
    BodyMask = 13,
};

inline constexpr int kTissueClassCount = 14;

constexpr bool is_valid_class_code(int code) {
    return code >= 0 && code < kTissueClassCount;
}

inline const char* tissue_class_name(TissueClass cls) {
    static constexpr std::array<const char*, kTissueClassCount> names = {
        "background",  "spleen",     "right_kidney", "left_kidney",
        "liver",       "stomach",    "aorta",        "muscle",
        "inner_wall",  "outer_wall", "sft",          "vft",
        "rft",         "body_mask",
    };
    return names[static_cast<std::size_t>(cls)];
}

inline std::optional<TissueClass> tissue_class_from_name(const std::string& name) {
    for (int code = 0; code < kTissueClassCount; ++code) {
        auto cls = static_cast<TissueClass>(code);
        if (name == tissue_class_name(cls)) return cls;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Calendar dates (scan timestamps; day resolution is all the cohort needs)

struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    // Days since 1970-01-01 (proleptic Gregorian).
    [[nodiscard]] long to_days() const {
        long y = year;
        const int m = month;
        y -= m <= 2;
        const long era = (y >= 0 ? y : y - 399) / 400;
        const long yoe = y - era * 400;
        const long doy = (153L * (m + (m > 2 ? -3 : 9)) + 2) / 5 + day - 1;
        const long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return era * 146097 + doe - 719468;
    }

    [[nodiscard]] std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    static bool is_leap(int y) {
        return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    }

    static int days_in_month(int y, int m) {
        static constexpr int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        if (m == 2 && is_leap(y)) return 29;
        return lengths[m - 1];
    }

    // Parses strict ISO-8601 "YYYY-MM-DD".
    static Date parse(const std::string& iso) {
        if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
            throw std::invalid_argument("invalid date '" + iso + "': expected YYYY-MM-DD");
        for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
            if (iso[i] < '0' || iso[i] > '9')
                throw std::invalid_argument("invalid date '" + iso + "': expected YYYY-MM-DD");
        Date d;
        d.year = std::stoi(iso.substr(0, 4));
        d.month = std::stoi(iso.substr(5, 2));
        d.day = std::stoi(iso.substr(8, 2));
        if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
            throw std::invalid_argument("invalid date '" + iso + "': no such calendar day");
        return d;
    }
};

inline long days_between(const Date& first, const Date& second) {
    return second.to_days() - first.to_days();
}

// ---------------------------------------------------------------------------
// Raster value types

template <typename T>
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    [[nodiscard]] std::size_t size() const { return data.size(); }
    [[nodiscard]] T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    [[nodiscard]] const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

// 2-D grid of calibrated HU integers plus physical pixel spacing and scan
// identity. Row-major, y-major storage.
struct CtSlice {
    int width = 0;
    int height = 0;
    std::vector<std::int16_t> hu;   // row-major, kMinHu..kMaxHu
    double spacing_x = 1.0;         // mm/pixel
    double spacing_y = 1.0;         // mm/pixel
    std::string subject_id;
    Date scan_date;

    [[nodiscard]] std::int16_t at(int x, int y) const {
        return hu[static_cast<std::size_t>(y) * width + x];
    }

    void validate() const {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("CtSlice: dimensions must be positive");
        if (hu.size() != static_cast<std::size_t>(width) * height)
            throw std::invalid_argument("CtSlice: pixel count does not match dimensions");
        if (spacing_x <= 0.0 || spacing_y <= 0.0)
            throw std::invalid_argument("CtSlice: pixel spacing must be positive");
        for (std::int16_t v : hu)
            if (v < kMinHu || v > kMaxHu)
                throw std::invalid_argument("CtSlice: HU value " + std::to_string(v) +
                                            " outside [" + std::to_string(kMinHu) + ", " +
                                            std::to_string(kMaxHu) + "]");
    }
};

// Row-major boolean grid aligned to a slice.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // 0 or 1

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    [[nodiscard]] bool at(int x, int y) const {
        return bits[static_cast<std::size_t>(y) * width + x] != 0;
    }
    void set(int x, int y, bool v = true) {
        bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
    }
    [[nodiscard]] std::size_t count() const {
        return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
    }
    [[nodiscard]] bool empty() const { return count() == 0; }

    bool operator==(const BinaryMask&) const = default;
};

// Row-major grid of TissueClass codes aligned to a slice.
struct LabelMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> labels;  // TissueClass codes 0..13

    LabelMap() = default;
    LabelMap(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}

    [[nodiscard]] std::uint8_t at(int x, int y) const {
        return labels[static_cast<std::size_t>(y) * width + x];
    }
    void set(int x, int y, TissueClass cls) {
        labels[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint8_t>(cls);
    }

    void validate() const {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("LabelMap: dimensions must be positive");
        if (labels.size() != static_cast<std::size_t>(width) * height)
            throw std::invalid_argument("LabelMap: cell count does not match dimensions");
        for (std::uint8_t code : labels)
            if (!is_valid_class_code(code))
                throw std::invalid_argument("LabelMap: invalid class code " + std::to_string(code));
    }

    bool operator==(const LabelMap&) const = default;
};

inline bool same_dims(int wa, int ha, int wb, int hb) { return wa == wb && ha == hb; }

// ---------------------------------------------------------------------------
// Mask algebra helpers

inline void require_same_dims(const BinaryMask& a, const BinaryMask& b, const char* op) {
    if (!same_dims(a.width, a.height, b.width, b.height))
        throw std::invalid_argument(std::string(op) + ": mask dimensions differ");
}

inline BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
    require_same_dims(a, b, "mask_and");
    BinaryMask out(a.width, a.height);
    for (std::size_t i = 0; i < a.bits.size(); ++i) out.bits[i] = a.bits[i] & b.bits[i];
    return out;
}

inline BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
    require_same_dims(a, b, "mask_or");
    BinaryMask out(a.width, a.height);
    for (std::size_t i = 0; i < a.bits.size(); ++i) out.bits[i] = a.bits[i] | b.bits[i];
    return out;
}

inline BinaryMask mask_subtract(const BinaryMask& a, const BinaryMask& b) {
    require_same_dims(a, b, "mask_subtract");
    BinaryMask out(a.width, a.height);
    for (std::size_t i = 0; i < a.bits.size(); ++i)
        out.bits[i] = static_cast<std::uint8_t>(a.bits[i] & ~b.bits[i] & 1);
    return out;
}

inline bool masks_intersect(const BinaryMask& a, const BinaryMask& b) {
    require_same_dims(a, b, "masks_intersect");
    for (std::size_t i = 0; i < a.bits.size(); ++i)
        if (a.bits[i] & b.bits[i]) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Operations

// Clamps HU to the soft-tissue window and remaps affinely to display values
// in [0, 255], rounding half-up.
inline Grid<std::uint8_t> apply_soft_tissue_window(const CtSlice& slice) {
    Grid<std::uint8_t> out(slice.width, slice.height);
    constexpr double span = kWindowHighHu - kWindowLowHu;  // 400
    for (std::size_t i = 0; i < slice.hu.size(); ++i) {
        int v = std::clamp<int>(slice.hu[i], kWindowLowHu, kWindowHighHu);
        double scaled = (v - kWindowLowHu) * 255.0 / span;
        out.data[i] = static_cast<std::uint8_t>(std::floor(scaled + 0.5));
    }
    return out;
}

// Dice overlap 2|a & b| / (|a| + |b|). Two empty masks score 1.
inline double dice(const BinaryMask& a, const BinaryMask& b) {
    if (!same_dims(a.width, a.height, b.width, b.height))
        throw std::invalid_argument("dice: mask dimensions differ");
    std::size_t inter = 0, total = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        inter += static_cast<std::size_t>(a.bits[i] & b.bits[i]);
        total += static_cast<std::size_t>(a.bits[i]) + b.bits[i];
    }
    if (total == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

inline BinaryMask class_mask(const LabelMap& map, TissueClass cls) {
    BinaryMask out(map.width, map.height);
    const auto code = static_cast<std::uint8_t>(cls);
    for (std::size_t i = 0; i < map.labels.size(); ++i) out.bits[i] = map.labels[i] == code;
    return out;
}

}  // namespace bodycomp
