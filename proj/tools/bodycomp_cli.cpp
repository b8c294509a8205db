// Command-line surface for the body-composition toolkit.
//
// Subcommands:
//   segment          one slice (+ supervised masks) -> fused map + measurements
//   cohort           manifest -> ICC/CV report and spaghetti tables
//   phantom          declarative spec -> synthetic slice + ground-truth map
//   simulate-cohort  variance-component model -> slices, masks, manifest
//   dice             two label maps -> per-class Dice table
//
// Exit code 0 on success. On failure a machine-readable JSON summary is
// written to stderr and the exit code is nonzero.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bodycomp/bodycomp.hpp"

namespace fs = std::filesystem;
using namespace bodycomp;

namespace {

struct PipelineFlags {
    double body_threshold = seg::kBodyThresholdHu;
    double fat_reference = seg::kFatReferenceHu;
    double membership_threshold = seg::kMembershipThreshold;
    double fcm_tolerance = 1e-4;
    int fcm_max_iterations = 300;
    int min_component_size = 25;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& flags) {
    cmd->add_option("--body-threshold", flags.body_threshold,
                    "HU threshold for body-mask extraction")
        ->capture_default_str();
    cmd->add_option("--fat-reference", flags.fat_reference,
                    "HU reference used to pick the fat cluster")
        ->capture_default_str();
    cmd->add_option("--membership-threshold", flags.membership_threshold,
                    "FCM membership cut for the darker/kept cluster")
        ->capture_default_str();
    cmd->add_option("--fcm-tolerance", flags.fcm_tolerance, "FCM centroid-shift stop threshold")
        ->capture_default_str();
    cmd->add_option("--fcm-max-iterations", flags.fcm_max_iterations, "FCM iteration cap")
        ->capture_default_str();
    cmd->add_option("--min-component-size", flags.min_component_size,
                    "components smaller than this are removed before fusion")
        ->capture_default_str();
}

pipeline::PipelineOptions to_options(const PipelineFlags& flags) {
    pipeline::PipelineOptions options;
    options.body_threshold_hu = flags.body_threshold;
    options.fat_reference_hu = flags.fat_reference;
    options.membership_threshold = flags.membership_threshold;
    options.fcm.tolerance = flags.fcm_tolerance;
    options.fcm.max_iterations = flags.fcm_max_iterations;
    options.policy.min_component_size = flags.min_component_size;
    return options;
}

LabelMap load_map_or_empty(const std::string& path, int width, int height, const char* what) {
    if (path.empty()) return LabelMap(width, height);
    LabelMap map = io::read_label_map(path);
    if (!same_dims(map.width, map.height, width, height))
        throw std::runtime_error(std::string(what) + " mask dimensions differ from slice");
    return map;
}

int run_segment(const std::string& slice_path, const std::string& organ_path,
                const std::string& muscle_path, const std::string& wall_path,
                const std::string& out_map, const std::string& out_csv, const PipelineFlags& flags) {
    const CtSlice slice = io::read_slice(slice_path);
    const LabelMap organ = load_map_or_empty(organ_path, slice.width, slice.height, "organ");
    const LabelMap muscle = load_map_or_empty(muscle_path, slice.width, slice.height, "muscle");
    const LabelMap wall = load_map_or_empty(wall_path, slice.width, slice.height, "wall");

    const pipeline::SlicePipelineResult result =
        pipeline::run_slice_pipeline(slice, organ, muscle, wall, to_options(flags));
    if (!out_map.empty()) io::write_label_map(result.fused, out_map);
    const std::string csv = pipeline::measurements_csv(result.measurements);
    if (out_csv.empty())
        std::cout << csv;
    else
        io::atomic_write(out_csv, csv);
    return 0;
}

int run_cohort(const std::string& manifest_path, const std::string& out_dir, int target_days,
               int tolerance_days, const std::string& cv_aggregation, const PipelineFlags& flags) {
    const io::CohortManifest manifest = io::read_manifest(manifest_path);
    pipeline::CohortOptions cohort_options;
    cohort_options.target_interval_days = target_days;
    cohort_options.tolerance_days = tolerance_days;
    cohort_options.cv_aggregation =
        cv_aggregation == "rms" ? stats::CvAggregation::Rms : stats::CvAggregation::Mean;

    const pipeline::CohortAnalysis analysis =
        pipeline::run_cohort_analysis(manifest, to_options(flags), cohort_options);
    pipeline::write_cohort_outputs(analysis, out_dir);

    std::cout << "scans processed: " << analysis.scans_processed << "/" << analysis.scans_total
              << ", pairs selected: " << analysis.pairs_selected << ", report rows: "
              << analysis.reports.size() << "\n";
    for (const auto& failure : analysis.failures)
        std::cout << "excluded scan " << failure.subject_id << " " << failure.scan_date.to_string()
                  << ": " << failure.error << "\n";
    return 0;
}

int run_phantom(const std::string& spec_path, const std::string& out_slice,
                const std::string& out_truth, std::optional<std::uint64_t> seed) {
    phantom::PhantomSpec spec = io::read_phantom_spec(spec_path);
    if (seed) spec.seed = *seed;
    auto [slice, truth] = phantom::generate_phantom(spec);
    io::write_slice(slice, out_slice);
    if (!out_truth.empty()) io::write_label_map(truth, out_truth);
    return 0;
}

int run_simulate_cohort(int subjects, double true_mean, double sigma2_a, double sigma2_w,
                        double session_offset, std::uint64_t seed, const std::string& out_dir) {
    phantom::CohortSpec spec;
    spec.n_subjects = subjects;
    spec.true_mean = true_mean;
    spec.sigma2_A = sigma2_a;
    spec.sigma2_w = sigma2_w;
    spec.session_offset = session_offset;
    spec.seed = seed;
    const fs::path manifest = pipeline::simulate_cohort_files(spec, out_dir);
    std::cout << manifest.string() << "\n";
    return 0;
}

int run_dice(const std::string& first_path, const std::string& second_path,
             const std::string& out_csv) {
    const LabelMap a = io::read_label_map(first_path);
    const LabelMap b = io::read_label_map(second_path);
    std::string csv = "class,dice\n";
    for (int code = 1; code < kTissueClassCount; ++code) {
        const auto cls = static_cast<TissueClass>(code);
        const BinaryMask ma = class_mask(a, cls);
        const BinaryMask mb = class_mask(b, cls);
        if (ma.empty() && mb.empty()) continue;
        csv += std::string(tissue_class_name(cls)) + "," + io::format_number(dice(ma, mb)) + "\n";
    }
    if (out_csv.empty())
        std::cout << csv;
    else
        io::atomic_write(out_csv, csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-slice CT body-composition pipeline"};
    app.require_subcommand(1);

    // segment
    auto* segment = app.add_subcommand("segment", "Segment one slice and measure tissues");
    std::string slice_path, organ_path, muscle_path, wall_path, out_map, out_csv;
    PipelineFlags segment_flags;
    segment->add_option("--slice", slice_path, "slice payload path")->required();
    segment->add_option("--organ", organ_path, "multi-organ label map (PGM)");
    segment->add_option("--muscle", muscle_path, "muscle label map (PGM)");
    segment->add_option("--wall", wall_path, "abdominal-wall contour label map (PGM)");
    segment->add_option("--out-map", out_map, "fused label map output (PGM)");
    segment->add_option("--out-csv", out_csv, "measurement CSV output (default: stdout)");
    add_pipeline_flags(segment, segment_flags);

    // cohort
    auto* cohort = app.add_subcommand("cohort", "Run the longitudinal cohort analysis");
    std::string manifest_path, cohort_out_dir, cv_aggregation = "mean";
    int target_days = stats::kTargetIntervalDays;
    int tolerance_days = stats::kIntervalToleranceDays;
    PipelineFlags cohort_flags;
    cohort->add_option("--manifest", manifest_path, "cohort manifest JSON")->required();
    cohort->add_option("--out-dir", cohort_out_dir, "output directory")->required();
    cohort->add_option("--target-days", target_days, "target follow-up interval in days")
        ->capture_default_str();
    cohort->add_option("--tolerance-days", tolerance_days, "admissible deviation from the target")
        ->capture_default_str();
    cohort->add_option("--cv-aggregation", cv_aggregation, "per-subject CV aggregation")
        ->check(CLI::IsMember({"mean", "rms"}))
        ->capture_default_str();
    add_pipeline_flags(cohort, cohort_flags);

    // phantom
    auto* phantom_cmd = app.add_subcommand("phantom", "Generate a synthetic phantom slice");
    std::string phantom_spec_path, phantom_out_slice, phantom_out_truth;
    std::optional<std::uint64_t> phantom_seed;
    phantom_cmd->add_option("--spec", phantom_spec_path, "phantom spec JSON")->required();
    phantom_cmd->add_option("--out-slice", phantom_out_slice, "slice output path")->required();
    phantom_cmd->add_option("--out-truth", phantom_out_truth, "ground-truth label map output (PGM)");
    phantom_cmd->add_option("--seed", phantom_seed, "override the spec's noise seed");

    // simulate-cohort
    auto* simulate = app.add_subcommand("simulate-cohort",
                                        "Write a synthetic cohort with known variance components");
    int sim_subjects = 300;
    double sim_true_mean = 400.0, sim_sigma2_a = 9.0, sim_sigma2_w = 1.0, sim_session_offset = 0.0;
    std::uint64_t sim_seed = 42;
    std::string sim_out_dir;
    simulate->add_option("--subjects", sim_subjects, "number of subjects")->capture_default_str();
    simulate->add_option("--true-mean", sim_true_mean, "model grand mean (mm^2)")
        ->capture_default_str();
    simulate->add_option("--sigma2-a", sim_sigma2_a, "between-subject variance")->capture_default_str();
    simulate->add_option("--sigma2-w", sim_sigma2_w, "within-subject variance")->capture_default_str();
    simulate->add_option("--session-offset", sim_session_offset, "constant added to scan 2")
        ->capture_default_str();
    simulate->add_option("--seed", sim_seed, "generator seed")->capture_default_str();
    simulate->add_option("--out-dir", sim_out_dir, "output directory")->required();

    // dice
    auto* dice_cmd = app.add_subcommand("dice", "Per-class Dice between two label maps");
    std::string dice_first, dice_second, dice_out;
    dice_cmd->add_option("--first", dice_first, "first label map (PGM)")->required();
    dice_cmd->add_option("--second", dice_second, "second label map (PGM)")->required();
    dice_cmd->add_option("--out-csv", dice_out, "Dice table output (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (segment->parsed())
            return run_segment(slice_path, organ_path, muscle_path, wall_path, out_map, out_csv,
                               segment_flags);
        if (cohort->parsed())
            return run_cohort(manifest_path, cohort_out_dir, target_days, tolerance_days,
                              cv_aggregation, cohort_flags);
        if (phantom_cmd->parsed())
            return run_phantom(phantom_spec_path, phantom_out_slice, phantom_out_truth, phantom_seed);
        if (simulate->parsed())
            return run_simulate_cohort(sim_subjects, sim_true_mean, sim_sigma2_a, sim_sigma2_w,
                                       sim_session_offset, sim_seed, sim_out_dir);
        if (dice_cmd->parsed()) return run_dice(dice_first, dice_second, dice_out);
    } catch (const pipeline::StageError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"stage", e.stage}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}
