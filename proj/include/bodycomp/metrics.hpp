#pragma once

// Per-tissue measurements from a fused label map: area in mm^2 and mean
// raw HU intensity.

#include <optional>
#include <stdexcept>
#include <vector>

#include "bodycomp/core.hpp"

namespace bodycomp::metrics {

struct TissueMeasurement {
    std::string subject_id;
    Date scan_date;
    TissueClass tissue = TissueClass::Background;
    double area_mm2 = 0.0;
    std::optional<double> mean_hu;  // absent when pixel_count is 0
    long pixel_count = 0;
};

// Pixel count times the physical pixel area. An absent class measures 0.
inline double tissue_area(const LabelMap& map, TissueClass cls, double spacing_x, double spacing_y) {
    if (spacing_x <= 0.0 || spacing_y <= 0.0)
        throw std::invalid_argument("tissue_area: spacing must be positive");
    const auto code = static_cast<std::uint8_t>(cls);
    long count = 0;
    for (std::uint8_t label : map.labels) count += label == code;
    return static_cast<double>(count) * spacing_x * spacing_y;
}

// Arithmetic mean of the raw (unwindowed, unshifted) HU values under the
// class mask.
inline double mean_intensity(const CtSlice& slice, const LabelMap& map, TissueClass cls) {
    if (!same_dims(slice.width, slice.height, map.width, map.height))
        throw std::invalid_argument("mean_intensity: map dimensions differ from slice");
    const auto code = static_cast<std::uint8_t>(cls);
    double sum = 0.0;
    long count = 0;
    for (std::size_t i = 0; i < map.labels.size(); ++i) {
        if (map.labels[i] == code) {
            sum += slice.hu[i];
            ++count;
        }
    }
    if (count == 0)
        throw std::runtime_error(std::string("mean_intensity: empty tissue ") + tissue_class_name(cls));
    return sum / static_cast<double>(count);
}

// One record per non-background class present in the map, ordered by class
// code. Empty classes are omitted rather than emitted as zeros.
inline std::vector<TissueMeasurement> measure_all(const CtSlice& slice, const LabelMap& map) {
    if (!same_dims(slice.width, slice.height, map.width, map.height))
        throw std::invalid_argument("measure_all: map dimensions differ from slice");

    std::array<long, kTissueClassCount> counts{};
    std::array<double, kTissueClassCount> sums{};
    for (std::size_t i = 0; i < map.labels.size(); ++i) {
        const std::uint8_t code = map.labels[i];
        ++counts[code];
        sums[code] += slice.hu[i];
    }

    std::vector<TissueMeasurement> out;
    for (int code = 1; code < kTissueClassCount; ++code) {
        if (counts[static_cast<std::size_t>(code)] == 0) continue;
        TissueMeasurement m;
        m.subject_id = slice.subject_id;
        m.scan_date = slice.scan_date;
        m.tissue = static_cast<TissueClass>(code);
        m.pixel_count = counts[static_cast<std::size_t>(code)];
        m.area_mm2 = static_cast<double>(m.pixel_count) * slice.spacing_x * slice.spacing_y;
        m.mean_hu = sums[static_cast<std::size_t>(code)] / static_cast<double>(m.pixel_count);
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace bodycomp::metrics
