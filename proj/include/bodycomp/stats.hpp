#pragma once

// Longitudinal variability statistics over follow-up scan pairs: pair
// selection, the two-way mixed consistency ICC from a subjects-by-sessions
// ANOVA, the coefficient of variation with the +1024 intensity offset, and
// the per-tissue report tables.

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bodycomp/core.hpp"
#include "bodycomp/metrics.hpp"

namespace bodycomp::stats {

// HU values are shifted by +1024 before intensity CVs so per-subject means
// stay positive.
inline constexpr double kIntensityCvOffset = 1024.0;

// Default follow-up gap: two years with a 90-day admission window.
inline constexpr int kTargetIntervalDays = 730;
inline constexpr int kIntervalToleranceDays = 90;

struct ScanRecord {
    std::string subject_id;
    Date scan_date;
    std::vector<metrics::TissueMeasurement> measurements;

    [[nodiscard]] const metrics::TissueMeasurement* find(TissueClass cls) const {
        for (const auto& m : measurements)
            if (m.tissue == cls) return &m;
        return nullptr;
    }
};

struct FollowupPair {
    std::string subject_id;
    ScanRecord first;
    ScanRecord second;
    long interval_days = 0;
};

struct PairSelection {
    std::vector<FollowupPair> pairs;
    int subjects_excluded = 0;  // subjects with one scan or an off-target first interval
};

// Takes each subject's two earliest scans and admits the pair iff the
// interval matches the target within tolerance. Output is sorted by
// subject id.
inline PairSelection select_followup_pairs(const std::vector<ScanRecord>& records,
                                           int target_interval_days = kTargetIntervalDays,
                                           int tolerance_days = kIntervalToleranceDays) {
    std::map<std::string, std::vector<const ScanRecord*>> by_subject;
    for (const auto& r : records) by_subject[r.subject_id].push_back(&r);

    PairSelection out;
    for (auto& [subject, scans] : by_subject) {
        if (scans.size() < 2) {
            ++out.subjects_excluded;
            continue;
        }
        std::sort(scans.begin(), scans.end(),
                  [](const ScanRecord* a, const ScanRecord* b) { return a->scan_date < b->scan_date; });
        const long interval = days_between(scans[0]->scan_date, scans[1]->scan_date);
        if (std::abs(interval - target_interval_days) > tolerance_days) {
            ++out.subjects_excluded;
            continue;
        }
        out.pairs.push_back(FollowupPair{subject, *scans[0], *scans[1], interval});
    }
    return out;  // std::map iteration already sorts by subject_id
}

// ---------------------------------------------------------------------------
// ICC

struct AnovaDecomposition {
    double ms_between = 0.0;  // subject mean square
    double ms_error = 0.0;    // residual mean square (session effect removed)
    double sigma2_A = 0.0;    // (ms_between - ms_error) / k
    double sigma2_w = 0.0;    // = ms_error
    int k = 2;                // measurements per subject
};

struct IccResult {
    AnovaDecomposition anova;
    double raw_icc = 0.0;
    double icc = 0.0;  // max(raw_icc, 0)
};

// Two-way mixed, consistency form, single measurements (ICC(3,1)): subject
// and session main effects, with the session effect absorbed so a constant
// scan-to-scan offset does not reduce agreement.
//
//   raw = (MS_between - MS_error) / (MS_between + (k-1) MS_error)
//
// All-identical data (and any other 0/0 degeneracy) is defined as 1.
inline IccResult icc_two_way_mixed(std::span<const std::pair<double, double>> values) {
    const std::size_t n = values.size();
    if (n < 2) throw std::invalid_argument("icc_two_way_mixed: need at least 2 subjects");
    constexpr int k = 2;

    double grand = 0.0, session1 = 0.0, session2 = 0.0;
    for (const auto& [a, b] : values) {
        session1 += a;
        session2 += b;
    }
    session1 /= static_cast<double>(n);
    session2 /= static_cast<double>(n);
    grand = (session1 + session2) / 2.0;

    double ss_between = 0.0, ss_error = 0.0;
    for (const auto& [a, b] : values) {
        const double subject_mean = (a + b) / 2.0;
        ss_between += (subject_mean - grand) * (subject_mean - grand);
        const double r1 = a - subject_mean - session1 + grand;
        const double r2 = b - subject_mean - session2 + grand;
        ss_error += r1 * r1 + r2 * r2;
    }

    IccResult out;
    out.anova.k = k;
    out.anova.ms_between = k * ss_between / static_cast<double>(n - 1);
    out.anova.ms_error = ss_error / static_cast<double>((n - 1) * (k - 1));
    out.anova.sigma2_A = (out.anova.ms_between - out.anova.ms_error) / k;
    out.anova.sigma2_w = out.anova.ms_error;

    const double denom = out.anova.ms_between + (k - 1) * out.anova.ms_error;
    out.raw_icc = denom == 0.0 ? 1.0 : (out.anova.ms_between - out.anova.ms_error) / denom;
    out.icc = std::max(out.raw_icc, 0.0);
    return out;
}

// ---------------------------------------------------------------------------
// Coefficient of variation

enum class CvAggregation {
    Mean,  // arithmetic mean of per-subject CVs (reported)
    Rms,   // root-mean-square variant for sensitivity checks
};

// Per subject: sample standard deviation over mean of the offset-shifted
// pair, in percent; aggregated across subjects.
inline double coefficient_of_variation(std::span<const std::pair<double, double>> values, double offset,
                                       CvAggregation aggregation = CvAggregation::Mean) {
    if (values.empty()) throw std::invalid_argument("coefficient_of_variation: no subjects");
    double acc = 0.0;
    for (const auto& [a, b] : values) {
        const double x1 = a + offset, x2 = b + offset;
        const double mean = (x1 + x2) / 2.0;
        if (mean <= 0.0)
            throw std::runtime_error("coefficient_of_variation: non-positive shifted mean");
        const double sd = std::abs(x1 - x2) / std::sqrt(2.0);  // k-1 divisor at k=2
        const double cv = sd / mean * 100.0;
        acc += aggregation == CvAggregation::Mean ? cv : cv * cv;
    }
    const double n = static_cast<double>(values.size());
    return aggregation == CvAggregation::Mean ? acc / n : std::sqrt(acc / n);
}

// ---------------------------------------------------------------------------
// Cohort report

enum class Measure { Area, Intensity };

inline const char* measure_name(Measure m) { return m == Measure::Area ? "area" : "intensity"; }

struct VariabilityReport {
    TissueClass tissue = TissueClass::Background;
    Measure measure = Measure::Area;
    double icc = 0.0;      // clamped to [0, 1]
    double raw_icc = 0.0;
    double cv_percent = 0.0;
    int n_subjects = 0;
};

namespace detail {

inline std::vector<std::pair<double, double>> paired_values(const std::vector<FollowupPair>& pairs,
                                                            TissueClass cls, Measure measure) {
    std::vector<std::pair<double, double>> out;
    for (const auto& p : pairs) {
        const auto* m1 = p.first.find(cls);
        const auto* m2 = p.second.find(cls);
        if (!m1 || !m2) continue;  // subject missing the class in either scan
        if (measure == Measure::Area) {
            out.emplace_back(m1->area_mm2, m2->area_mm2);
        } else {
            if (!m1->mean_hu || !m2->mean_hu) continue;
            out.emplace_back(*m1->mean_hu, *m2->mean_hu);
        }
    }
    return out;
}

}  // namespace detail

// Area and intensity ICC/CV rows for every tissue class measured in both
// scans of at least two subjects, ordered by class code with area before
// intensity.
inline std::vector<VariabilityReport> cohort_variability_report(
    const std::vector<FollowupPair>& pairs, CvAggregation aggregation = CvAggregation::Mean) {
    std::vector<VariabilityReport> out;
    for (int code = 1; code < kTissueClassCount; ++code) {
        const auto cls = static_cast<TissueClass>(code);
        for (Measure measure : {Measure::Area, Measure::Intensity}) {
            const auto values = detail::paired_values(pairs, cls, measure);
            if (values.size() < 2) continue;
            const IccResult icc = icc_two_way_mixed(values);
            const double offset = measure == Measure::Intensity ? kIntensityCvOffset : 0.0;
            VariabilityReport row;
            row.tissue = cls;
            row.measure = measure;
            row.icc = icc.icc;
            row.raw_icc = icc.raw_icc;
            row.cv_percent = coefficient_of_variation(values, offset, aggregation);
            row.n_subjects = static_cast<int>(values.size());
            out.push_back(row);
        }
    }
    return out;
}

struct SpaghettiRow {
    std::string subject_id;
    double first = 0.0;
    double second = 0.0;
};

// Plot-ready per-subject (scan-1, scan-2) table for one class and measure;
// subjects missing the class in either scan are omitted.
inline std::vector<SpaghettiRow> spaghetti_data(const std::vector<FollowupPair>& pairs,
                                                TissueClass cls, Measure measure) {
    std::vector<SpaghettiRow> out;
    for (const auto& p : pairs) {
        const auto* m1 = p.first.find(cls);
        const auto* m2 = p.second.find(cls);
        if (!m1 || !m2) continue;
        if (measure == Measure::Area) {
            out.push_back({p.subject_id, m1->area_mm2, m2->area_mm2});
        } else {
            if (!m1->mean_hu || !m2->mean_hu) continue;
            out.push_back({p.subject_id, *m1->mean_hu, *m2->mean_hu});
        }
    }
    std::sort(out.begin(), out.end(),
              [](const SpaghettiRow& a, const SpaghettiRow& b) { return a.subject_id < b.subject_id; });
    return out;
}

}  // namespace bodycomp::stats
