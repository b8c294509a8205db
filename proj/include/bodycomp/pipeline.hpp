#pragma once

// End-to-end orchestration: the per-slice segmentation pipeline, the
// manifest-driven cohort analysis, report emission, and the simulated
// cohort writer.
//
// Per-slice stage order: body-mask extraction, two-stage fat detection,
// wall-region ingestion, SFT/VFT/RFT partition, per-source small-component
// removal and nearest-label fill, precedence fusion, measurement. Any
// stage failure is rethrown as StageError carrying the stage name.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bodycomp/core.hpp"
#include "bodycomp/io.hpp"
#include "bodycomp/metrics.hpp"
#include "bodycomp/phantom.hpp"
#include "bodycomp/postprocess.hpp"
#include "bodycomp/segmentation.hpp"
#include "bodycomp/stats.hpp"

namespace bodycomp::pipeline {

namespace fs = std::filesystem;

struct StageError : std::runtime_error {
    std::string stage;
    StageError(std::string stage_name, const std::string& what)
        : std::runtime_error("stage " + stage_name + ": " + what), stage(std::move(stage_name)) {}
};

struct PipelineOptions {
    double body_threshold_hu = seg::kBodyThresholdHu;
    double fat_reference_hu = seg::kFatReferenceHu;
    double membership_threshold = seg::kMembershipThreshold;
    fcm::FcmConfig fcm;  // cluster_count is always 2 for fat detection
    post::FusionPolicy policy = post::FusionPolicy::defaults();
};

struct SlicePipelineResult {
    LabelMap fused;
    std::vector<metrics::TissueMeasurement> measurements;
    seg::FatSegmentationResult fat;
};

namespace detail {

template <typename Fn>
auto run_stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

inline LabelMap mask_to_label_map(const BinaryMask& mask, TissueClass cls) {
    LabelMap out(mask.width, mask.height);
    const auto code = static_cast<std::uint8_t>(cls);
    for (std::size_t i = 0; i < mask.bits.size(); ++i)
        if (mask.bits[i]) out.labels[i] = code;
    return out;
}

// Wall contours arrive as class-8/9 label bands; the fat partition wants
// the enclosed cavity interiors. A contour that encloses nothing is an
// ingestion error.
inline BinaryMask contour_interior(const LabelMap& wall, TissueClass contour_class) {
    const BinaryMask contour = class_mask(wall, contour_class);
    if (contour.empty()) return BinaryMask(wall.width, wall.height);
    const BinaryMask region = mask_subtract(seg::fill_holes(contour), contour);
    if (region.empty())
        throw std::runtime_error(std::string(tissue_class_name(contour_class)) +
                                 " contour does not enclose a region");
    return region;
}

// Small-component removal followed by nearest-label fill, applied to one
// source map before fusion. A map left without labels is passed through
// (there is no donor to fill from).
inline LabelMap refine_source(const LabelMap& map, int min_component_size) {
    post::RemovalResult removal = post::remove_small_components(map, min_component_size);
    if (removal.removed.empty()) return removal.map;
    const bool any_label =
        std::any_of(removal.map.labels.begin(), removal.map.labels.end(),
                    [](std::uint8_t code) { return code != 0; });
    if (!any_label) return removal.map;
    return post::nearest_label_fill(removal.map, removal.removed);
}

}  // namespace detail

// Runs the full unsupervised-plus-fusion pipeline for one slice. The organ,
// muscle and wall maps are ingested supervised outputs; pass empty
// (all-background) maps of matching dimensions when a source is absent.
inline SlicePipelineResult run_slice_pipeline(const CtSlice& slice, const LabelMap& organ_map,
                                              const LabelMap& muscle_map, const LabelMap& wall_map,
                                              const PipelineOptions& options = {}) {
    detail::run_stage("ingest", [&] {
        slice.validate();
        for (const LabelMap* m : {&organ_map, &muscle_map, &wall_map}) {
            m->validate();
            if (!same_dims(m->width, m->height, slice.width, slice.height))
                throw std::invalid_argument("ingested map dimensions differ from slice");
        }
        return 0;
    });

    SlicePipelineResult result;
    result.fat.body_mask = detail::run_stage(
        "body_mask", [&] { return seg::extract_body_mask(slice, options.body_threshold_hu); });

    detail::run_stage("fat_segmentation", [&] {
        auto [fat, state] = seg::segment_fat(slice, result.fat.body_mask, options.fcm,
                                             options.fat_reference_hu, options.membership_threshold);
        result.fat.fat_mask = std::move(fat);
        result.fat.fcm_state = std::move(state);
        return 0;
    });

    const BinaryMask inner_region = detail::run_stage(
        "wall_regions", [&] { return detail::contour_interior(wall_map, TissueClass::InnerWall); });
    const BinaryMask outer_region = detail::run_stage(
        "wall_regions", [&] { return detail::contour_interior(wall_map, TissueClass::OuterWall); });

    detail::run_stage("fat_partition", [&] {
        seg::FatPartition parts =
            seg::partition_fat(result.fat.fat_mask, result.fat.body_mask, inner_region, outer_region);
        result.fat.sft = std::move(parts.sft);
        result.fat.vft = std::move(parts.vft);
        result.fat.rft = std::move(parts.rft);
        return 0;
    });

    LabelMap fat_map(slice.width, slice.height);
    for (std::size_t i = 0; i < fat_map.labels.size(); ++i) {
        if (result.fat.sft.bits[i]) fat_map.labels[i] = static_cast<std::uint8_t>(TissueClass::Sft);
        if (result.fat.vft.bits[i]) fat_map.labels[i] = static_cast<std::uint8_t>(TissueClass::Vft);
        if (result.fat.rft.bits[i]) fat_map.labels[i] = static_cast<std::uint8_t>(TissueClass::Rft);
    }
    const LabelMap body_map = detail::mask_to_label_map(result.fat.body_mask, TissueClass::BodyMask);

    LabelMap organ_refined, muscle_refined, wall_refined, fat_refined, body_refined;
    detail::run_stage("postprocess", [&] {
        const int min_size = options.policy.min_component_size;
        organ_refined = detail::refine_source(organ_map, min_size);
        muscle_refined = detail::refine_source(muscle_map, min_size);
        wall_refined = detail::refine_source(wall_map, min_size);
        fat_refined = detail::refine_source(fat_map, min_size);
        body_refined = detail::refine_source(body_map, min_size);
        return 0;
    });

    result.fused = detail::run_stage("fusion", [&] {
        return post::fuse_masks(organ_refined, muscle_refined, wall_refined, fat_refined,
                                body_refined, options.policy);
    });
    result.measurements =
        detail::run_stage("measurement", [&] { return metrics::measure_all(slice, result.fused); });
    return result;
}

// ---------------------------------------------------------------------------
// Cohort analysis

struct CohortOptions {
    int target_interval_days = stats::kTargetIntervalDays;
    int tolerance_days = stats::kIntervalToleranceDays;
    stats::CvAggregation cv_aggregation = stats::CvAggregation::Mean;
};

struct ScanFailure {
    std::string subject_id;
    Date scan_date;
    std::string error;
};

struct SpaghettiTable {
    TissueClass tissue = TissueClass::Background;
    stats::Measure measure = stats::Measure::Area;
    std::vector<stats::SpaghettiRow> rows;
};

struct CohortAnalysis {
    std::vector<stats::VariabilityReport> reports;
    std::vector<SpaghettiTable> spaghetti;
    std::vector<ScanFailure> failures;
    int scans_total = 0;
    int scans_processed = 0;
    int pairs_selected = 0;
    int subjects_excluded = 0;
};

namespace detail {

inline LabelMap load_optional_map(const std::optional<std::string>& path, int width, int height) {
    if (!path) return LabelMap(width, height);
    return io::read_label_map(*path);
}

}  // namespace detail

// Runs the per-slice pipeline over every manifest entry (sorted by subject
// and date, so ingestion order never affects the output), pairs up each
// subject's first two scans, and aggregates ICC/CV per tissue. Scans that
// fail any stage are recorded and excluded; only a fully failed cohort
// aborts.
inline CohortAnalysis run_cohort_analysis(const io::CohortManifest& manifest,
                                          const PipelineOptions& pipeline_options = {},
                                          const CohortOptions& cohort_options = {}) {
    std::vector<io::ManifestEntry> entries = manifest.entries;
    std::sort(entries.begin(), entries.end(), [](const io::ManifestEntry& a, const io::ManifestEntry& b) {
        return a.subject_id != b.subject_id ? a.subject_id < b.subject_id : a.scan_date < b.scan_date;
    });

    CohortAnalysis analysis;
    analysis.scans_total = static_cast<int>(entries.size());

    std::vector<stats::ScanRecord> records;
    for (const auto& entry : entries) {
        try {
            const CtSlice slice = io::read_slice(entry.slice_path);
            if (slice.subject_id != entry.subject_id || slice.scan_date != entry.scan_date)
                throw std::runtime_error("slice sidecar identity does not match manifest entry");
            const LabelMap organ =
                detail::load_optional_map(entry.organ_mask_path, slice.width, slice.height);
            const LabelMap muscle =
                detail::load_optional_map(entry.muscle_mask_path, slice.width, slice.height);
            const LabelMap wall =
                detail::load_optional_map(entry.wall_mask_path, slice.width, slice.height);
            SlicePipelineResult result =
                run_slice_pipeline(slice, organ, muscle, wall, pipeline_options);
            records.push_back(
                stats::ScanRecord{entry.subject_id, entry.scan_date, std::move(result.measurements)});
            ++analysis.scans_processed;
        } catch (const std::exception& e) {
            analysis.failures.push_back(ScanFailure{entry.subject_id, entry.scan_date, e.what()});
        }
    }
    if (analysis.scans_processed == 0)
        throw std::runtime_error("cohort: no scan processed successfully");

    const stats::PairSelection selection = stats::select_followup_pairs(
        records, cohort_options.target_interval_days, cohort_options.tolerance_days);
    analysis.pairs_selected = static_cast<int>(selection.pairs.size());
    analysis.subjects_excluded = selection.subjects_excluded;

    analysis.reports = stats::cohort_variability_report(selection.pairs, cohort_options.cv_aggregation);
    for (const auto& row : analysis.reports)
        analysis.spaghetti.push_back(SpaghettiTable{
            row.tissue, row.measure, stats::spaghetti_data(selection.pairs, row.tissue, row.measure)});
    return analysis;
}

// ---------------------------------------------------------------------------
// Report emission (byte-stable CSV, atomic writes)

inline std::string report_csv(const std::vector<stats::VariabilityReport>& reports) {
    std::string out = "class,measure,n,raw_icc,icc,cv_percent\n";
    for (const auto& row : reports) {
        out += tissue_class_name(row.tissue);
        out += ',';
        out += stats::measure_name(row.measure);
        out += ',';
        out += std::to_string(row.n_subjects);
        out += ',';
        out += io::format_number(row.raw_icc);
        out += ',';
        out += io::format_number(row.icc);
        out += ',';
        out += io::format_number(row.cv_percent);
        out += '\n';
    }
    return out;
}

inline std::string spaghetti_csv(const std::vector<stats::SpaghettiRow>& rows) {
    std::string out = "subject_id,scan1,scan2\n";
    for (const auto& row : rows) {
        out += row.subject_id;
        out += ',';
        out += io::format_number(row.first);
        out += ',';
        out += io::format_number(row.second);
        out += '\n';
    }
    return out;
}

inline std::string measurements_csv(const std::vector<metrics::TissueMeasurement>& measurements) {
    std::string out = "subject_id,scan_date,class,pixel_count,area_mm2,mean_hu\n";
    for (const auto& m : measurements) {
        out += m.subject_id;
        out += ',';
        out += m.scan_date.to_string();
        out += ',';
        out += tissue_class_name(m.tissue);
        out += ',';
        out += std::to_string(m.pixel_count);
        out += ',';
        out += io::format_number(m.area_mm2);
        out += ',';
        out += m.mean_hu ? io::format_number(*m.mean_hu) : "";
        out += '\n';
    }
    return out;
}

// Writes report.csv, one spaghetti CSV per reported class and measure, and
// summary.json under out_dir.
inline void write_cohort_outputs(const CohortAnalysis& analysis, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    io::atomic_write(out_dir / "report.csv", report_csv(analysis.reports));
    for (const auto& table : analysis.spaghetti) {
        const std::string name = std::string("spaghetti_") + tissue_class_name(table.tissue) + "_" +
                                 stats::measure_name(table.measure) + ".csv";
        io::atomic_write(out_dir / name, spaghetti_csv(table.rows));
    }

    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : analysis.failures)
        failures.push_back({{"subject_id", f.subject_id},
                            {"scan_date", f.scan_date.to_string()},
                            {"error", f.error}});
    const nlohmann::json summary = {
        {"scans_total", analysis.scans_total},
        {"scans_processed", analysis.scans_processed},
        {"scans_failed", failures},
        {"pairs_selected", analysis.pairs_selected},
        {"subjects_excluded", analysis.subjects_excluded},
    };
    io::atomic_write(out_dir / "summary.json", summary.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Simulated cohorts on disk

// Materializes a CohortSpec as phantom slices plus a manifest. Each scan is
// a small phantom whose muscle patch is a fixed 20x20 pixel square while
// the pixel spacing is set to sqrt(value / 400), so the measured muscle
// area in mm^2 equals the generative model's value exactly and the CSV-level
// ICC matches the model's sigma2_A / (sigma2_A + sigma2_w). Muscle HU is
// constant, so intensity rows are a fixed-value control.
inline fs::path simulate_cohort_files(const phantom::CohortSpec& spec, const fs::path& out_dir) {
    spec.validate();
    fs::create_directories(out_dir);

    constexpr int kWidth = 64, kHeight = 64;
    constexpr long kMusclePixels = 400;  // 20x20

    LabelMap muscle_mask(kWidth, kHeight);
    for (int y = 22; y < 42; ++y)
        for (int x = 10; x < 30; ++x) muscle_mask.set(x, y, TissueClass::Muscle);
    const fs::path muscle_path = out_dir / "muscle_mask.pgm";
    io::write_label_map(muscle_mask, muscle_path);

    io::CohortManifest manifest;
    const auto cohort = phantom::generate_cohort(spec);
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        const auto& [first, second] = cohort[i];
        for (const stats::ScanRecord* record : {&first, &second}) {
            const double value = record->measurements.front().area_mm2;
            if (value <= 0.0)
                throw std::runtime_error(
                    "simulate_cohort_files: model produced a non-positive area; "
                    "increase true_mean or reduce the variances");
            const double spacing = std::sqrt(value / static_cast<double>(kMusclePixels));

            phantom::PhantomSpec phantom_spec;
            phantom_spec.width = kWidth;
            phantom_spec.height = kHeight;
            phantom_spec.spacing = spacing;
            phantom_spec.body = phantom::Ellipse{32.0, 32.0, 28.0, 26.0};
            phantom_spec.body_hu = phantom::kSoftTissueHu;
            phantom_spec.subject_id = record->subject_id;
            phantom_spec.scan_date = record->scan_date;
            // Muscle square matching the mask file; small fat patch so fat
            // detection has something to find.
            phantom_spec.compartments.push_back(
                {phantom::Rect{10, 22, 30, 42}, TissueClass::Muscle, phantom::kMuscleHu});
            phantom_spec.compartments.push_back(
                {phantom::Rect{40, 28, 48, 36}, TissueClass::Sft, phantom::kFatHu});

            auto [slice, truth] = phantom::generate_phantom(phantom_spec);
            (void)truth;
            char name[32];
            std::snprintf(name, sizeof(name), "s%04zu_%d.hu16", i + 1,
                          record == &first ? 1 : 2);
            const fs::path slice_path = out_dir / name;
            io::write_slice(slice, slice_path);

            io::ManifestEntry entry;
            entry.subject_id = record->subject_id;
            entry.scan_date = record->scan_date;
            entry.slice_path = slice_path.filename().string();
            entry.muscle_mask_path = muscle_path.filename().string();
            manifest.entries.push_back(std::move(entry));
        }
    }
    const fs::path manifest_path = out_dir / "manifest.json";
    io::write_manifest(manifest, manifest_path);
    return manifest_path;
}

}  // namespace bodycomp::pipeline
