#pragma once

// Deterministic synthetic data: elliptical abdominal phantoms with exact
// ground-truth label maps, and measurement cohorts with controlled
// between/within-subject variance components.
//
// Randomness comes from std::mt19937_64 (bit-identical on every platform)
// feeding a classic Box-Muller transform:
//
//   u1 = 1 - (next() >> 11) * 2^-53            in (0, 1]
//   u2 =     (next() >> 11) * 2^-53            in [0, 1)
//   z0 = sqrt(-2 ln u1) * cos(2 pi u2)
//   z1 = sqrt(-2 ln u1) * sin(2 pi u2)
//
// Samples are consumed z0, z1, z0, z1, ... so one spec and seed always
// produce the same stream.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bodycomp/core.hpp"
#include "bodycomp/stats.hpp"

namespace bodycomp::phantom {

// Library HU defaults for phantom compartments (configuration constants).
inline constexpr double kAirHu = -1000.0;
inline constexpr double kFatHu = -100.0;
inline constexpr double kMuscleHu = 50.0;
inline constexpr double kOrganHu = 55.0;
inline constexpr double kSoftTissueHu = 40.0;
inline constexpr double kBowelGasHu = -800.0;

class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : engine_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - to_unit(engine_());
        const double u2 = to_unit(engine_());
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * pi() * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    double next(double mean, double sigma) { return mean + sigma * next(); }

private:
    static constexpr double pi() { return 3.141592653589793238462643383279502884; }
    static double to_unit(std::uint64_t x) {
        return static_cast<double>(x >> 11) * 0x1.0p-53;
    }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// ---------------------------------------------------------------------------
// Phantom slices

struct Ellipse {
    double cx = 0.0, cy = 0.0;
    double rx = 1.0, ry = 1.0;

    [[nodiscard]] bool contains(int x, int y) const {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        return dx * dx + dy * dy <= 1.0;
    }
};

struct Annulus {
    double cx = 0.0, cy = 0.0;
    double outer_rx = 1.0, outer_ry = 1.0;
    double inner_rx = 0.5, inner_ry = 0.5;

    [[nodiscard]] bool contains(int x, int y) const {
        const Ellipse outer{cx, cy, outer_rx, outer_ry};
        const Ellipse inner{cx, cy, inner_rx, inner_ry};
        return outer.contains(x, y) && !inner.contains(x, y);
    }
};

// Pixel-aligned box, half-open: x in [x0, x1), y in [y0, y1).
struct Rect {
    int x0 = 0, y0 = 0;
    int x1 = 0, y1 = 0;

    [[nodiscard]] bool contains(int x, int y) const {
        return x >= x0 && x < x1 && y >= y0 && y < y1;
    }
};

struct Compartment {
    std::variant<Ellipse, Annulus, Rect> shape;
    TissueClass tissue = TissueClass::BodyMask;
    double mean_hu = kSoftTissueHu;

    [[nodiscard]] bool contains(int x, int y) const {
        return std::visit([&](const auto& s) { return s.contains(x, y); }, shape);
    }
};

struct PhantomSpec {
    int width = 96;
    int height = 96;
    double spacing = 1.0;  // mm/pixel, isotropic
    Ellipse body{48.0, 48.0, 40.0, 34.0};
    double body_hu = kSoftTissueHu;
    std::vector<Compartment> compartments;  // painted in order, later shapes carve earlier ones
    double noise_sigma = 0.0;               // HU
    std::uint64_t seed = 0;
    std::string subject_id = "phantom";
    Date scan_date{2000, 1, 1};

    void validate() const {
        if (width <= 0 || height <= 0) throw std::invalid_argument("PhantomSpec: dimensions must be positive");
        if (spacing <= 0.0) throw std::invalid_argument("PhantomSpec: spacing must be positive");
        if (noise_sigma < 0.0) throw std::invalid_argument("PhantomSpec: noise_sigma must be >= 0");
    }
};

namespace detail {

inline std::int16_t quantize_hu(double value) {
    const long v = std::lround(value);
    return static_cast<std::int16_t>(std::clamp<long>(v, kMinHu, kMaxHu));
}

}  // namespace detail

// Rasterizes the spec: air everywhere, body_hu/body-mask label inside the
// body ellipse, compartments painted on top in order. Gaussian noise of
// noise_sigma is added to body pixels in row-major order. The label map is
// the exact compartment geometry and serves as ground truth.
inline std::pair<CtSlice, LabelMap> generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    CtSlice slice;
    slice.width = spec.width;
    slice.height = spec.height;
    slice.spacing_x = slice.spacing_y = spec.spacing;
    slice.subject_id = spec.subject_id;
    slice.scan_date = spec.scan_date;
    slice.hu.assign(static_cast<std::size_t>(spec.width) * spec.height,
                    detail::quantize_hu(kAirHu));
    LabelMap truth(spec.width, spec.height);

    std::vector<double> mean(slice.hu.size(), kAirHu);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * spec.width + x;
            const bool in_body = spec.body.contains(x, y);
            if (in_body) {
                mean[i] = spec.body_hu;
                truth.labels[i] = static_cast<std::uint8_t>(TissueClass::BodyMask);
            }
            for (const Compartment& comp : spec.compartments) {
                if (!comp.contains(x, y)) continue;
                if (!in_body)
                    throw std::invalid_argument("generate_phantom: compartment extends outside the body");
                mean[i] = comp.mean_hu;
                truth.labels[i] = static_cast<std::uint8_t>(comp.tissue);
            }
        }
    }

    GaussianSampler noise(spec.seed);
    for (std::size_t i = 0; i < slice.hu.size(); ++i) {
        if (truth.labels[i] == 0) continue;  // air stays exact
        const double v = spec.noise_sigma > 0.0 ? noise.next(mean[i], spec.noise_sigma) : mean[i];
        slice.hu[i] = detail::quantize_hu(v);
    }
    return {std::move(slice), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Synthetic cohorts

// Generative model for one measured quantity over n subjects and two scans:
//
//   x_ij = true_mean + a_i + session_offset * [j = 2] + e_ij
//   a_i ~ N(0, sigma2_A),  e_ij ~ N(0, sigma2_w)
//
// so the consistency ICC of the model is sigma2_A / (sigma2_A + sigma2_w).
struct CohortSpec {
    int n_subjects = 2;
    double true_mean = 400.0;
    double sigma2_A = 0.0;      // between-subject variance
    double sigma2_w = 0.0;      // within-subject variance
    double session_offset = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_subjects < 2) throw std::invalid_argument("CohortSpec: n_subjects must be >= 2");
        if (sigma2_A < 0.0 || sigma2_w < 0.0)
            throw std::invalid_argument("CohortSpec: variances must be >= 0");
    }
};

inline std::string cohort_subject_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "S%04d", index + 1);
    return buf;
}

// Draw order per subject: a_i, e_i1, e_i2. Each record carries one muscle
// measurement whose area and mean intensity both equal the generated value,
// so either measure exercises the same model.
inline std::vector<std::pair<stats::ScanRecord, stats::ScanRecord>> generate_cohort(
    const CohortSpec& spec) {
    spec.validate();
    GaussianSampler rng(spec.seed);
    const double sd_a = std::sqrt(spec.sigma2_A);
    const double sd_w = std::sqrt(spec.sigma2_w);
    const Date first_date{2000, 1, 1};
    const Date second_date{2001, 12, 31};  // 730 days later

    std::vector<std::pair<stats::ScanRecord, stats::ScanRecord>> out;
    out.reserve(static_cast<std::size_t>(spec.n_subjects));
    for (int i = 0; i < spec.n_subjects; ++i) {
        const double subject_effect = rng.next(0.0, sd_a);
        const double x1 = spec.true_mean + subject_effect + rng.next(0.0, sd_w);
        const double x2 = spec.true_mean + subject_effect + spec.session_offset + rng.next(0.0, sd_w);

        auto make_record = [&](const Date& date, double value) {
            stats::ScanRecord rec;
            rec.subject_id = cohort_subject_id(i);
            rec.scan_date = date;
            metrics::TissueMeasurement m;
            m.subject_id = rec.subject_id;
            m.scan_date = date;
            m.tissue = TissueClass::Muscle;
            m.area_mm2 = value;
            m.mean_hu = value;
            m.pixel_count = 1;
            rec.measurements.push_back(std::move(m));
            return rec;
        };
        out.emplace_back(make_record(first_date, x1), make_record(second_date, x2));
    }
    return out;
}

// Convenience: the generated value pairs alone, for feeding the ICC/CV
// estimators directly.
inline std::vector<std::pair<double, double>> cohort_value_pairs(const CohortSpec& spec) {
    std::vector<std::pair<double, double>> out;
    for (const auto& [first, second] : generate_cohort(spec))
        out.emplace_back(first.measurements.front().area_mm2, second.measurements.front().area_mm2);
    return out;
}

}  // namespace bodycomp::phantom
