#pragma once

// Unsupervised body and fat segmentation: threshold-based body-mask
// extraction with hole filling, two-stage fuzzy c-means fat detection
// inside the body, and the SFT/VFT/RFT partition against the abdominal
// wall regions.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bodycomp/core.hpp"
#include "bodycomp/fcm.hpp"
#include "bodycomp/postprocess.hpp"

namespace bodycomp::seg {

// Body-mask threshold: safely above air (-1000 HU), below fat and all soft
// tissue. Fat reference steers the second clustering stage toward adipose
// intensities. Both are overridable at every call site.
inline constexpr double kBodyThresholdHu = -200.0;
inline constexpr double kFatReferenceHu = -100.0;
inline constexpr double kMembershipThreshold = 0.5;

struct FatSegmentationResult {
    BinaryMask body_mask;
    BinaryMask fat_mask;
    BinaryMask sft;
    BinaryMask vft;
    BinaryMask rft;
    fcm::FcmState fcm_state;  // diagnostics from the clustering that picked the fat
};

// Fills enclosed holes: background 4-connected components that do not touch
// the image border become foreground (the dual connectivity of 8-connected
// foreground).
inline BinaryMask fill_holes(const BinaryMask& mask) {
    BinaryMask inverse(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.bits.size(); ++i) inverse.bits[i] = mask.bits[i] ? 0 : 1;
    const post::ComponentMap comps = post::connected_components(inverse, post::Connectivity::Four);

    std::vector<std::uint8_t> touches_border(comps.sizes.size(), 0);
    const int w = mask.width, h = mask.height;
    auto mark = [&](int x, int y) {
        const std::int32_t id = comps.ids.at(x, y);
        if (id != 0) touches_border[static_cast<std::size_t>(id - 1)] = 1;
    };
    for (int x = 0; x < w; ++x) {
        mark(x, 0);
        mark(x, h - 1);
    }
    for (int y = 0; y < h; ++y) {
        mark(0, y);
        mark(w - 1, y);
    }

    BinaryMask out = mask;
    for (std::size_t i = 0; i < out.bits.size(); ++i) {
        const std::int32_t id = comps.ids.data[i];
        if (id != 0 && !touches_border[static_cast<std::size_t>(id - 1)]) out.bits[i] = 1;
    }
    return out;
}

// Thresholds at threshold_hu, keeps the largest 8-connected foreground
// component, and fills its enclosed holes (interior gas pockets belong to
// the body).
inline BinaryMask extract_body_mask(const CtSlice& slice, double threshold_hu = kBodyThresholdHu) {
    BinaryMask fg(slice.width, slice.height);
    bool any = false;
    for (std::size_t i = 0; i < slice.hu.size(); ++i) {
        if (slice.hu[i] >= threshold_hu) {
            fg.bits[i] = 1;
            any = true;
        }
    }
    if (!any) throw std::runtime_error("extract_body_mask: empty body (no pixel above threshold)");

    const post::ComponentMap comps = post::connected_components(fg, post::Connectivity::Eight);
    std::int32_t largest = 1;
    for (std::int32_t id = 2; id <= comps.count(); ++id)
        if (comps.sizes[static_cast<std::size_t>(id - 1)] > comps.sizes[static_cast<std::size_t>(largest - 1)])
            largest = id;

    BinaryMask body(slice.width, slice.height);
    for (std::size_t i = 0; i < body.bits.size(); ++i) body.bits[i] = comps.ids.data[i] == largest;
    return fill_holes(body);
}

// Two-stage fat detection inside the body mask.
//
// Stage A clusters the body-interior HU values into a darker and a brighter
// population; pixels whose darker membership exceeds membership_threshold
// form the candidate set. Stage B re-clusters that set and keeps the
// cluster whose centroid lies nearer fat_reference_hu, separating fat from
// darker-still content such as bowel gas. When the candidate set is
// constant-valued there is nothing left to split and the whole set is the
// fat mask.
inline std::pair<BinaryMask, fcm::FcmState> segment_fat(const CtSlice& slice, const BinaryMask& body,
                                                        const fcm::FcmConfig& config,
                                                        double fat_reference_hu = kFatReferenceHu,
                                                        double membership_threshold = kMembershipThreshold) {
    if (!same_dims(slice.width, slice.height, body.width, body.height))
        throw std::invalid_argument("segment_fat: body mask dimensions differ from slice");
    if (body.empty()) throw std::invalid_argument("segment_fat: body mask is empty");
    if (config.cluster_count != 2)
        throw std::invalid_argument("segment_fat: fat detection uses exactly 2 clusters");

    std::vector<double> values;
    std::vector<std::size_t> pixels;
    values.reserve(body.count());
    pixels.reserve(body.count());
    for (std::size_t i = 0; i < body.bits.size(); ++i) {
        if (body.bits[i]) {
            values.push_back(static_cast<double>(slice.hu[i]));
            pixels.push_back(i);
        }
    }

    // Stage A: darker vs brighter over the whole body interior.
    const fcm::FcmState stage_a = fcm::fcm_cluster(values, config);
    std::vector<double> dark_values;
    std::vector<std::size_t> dark_pixels;
    for (std::size_t x = 0; x < values.size(); ++x) {
        if (stage_a.membership(x, 0) > membership_threshold) {
            dark_values.push_back(values[x]);
            dark_pixels.push_back(pixels[x]);
        }
    }

    BinaryMask fat(slice.width, slice.height);
    if (fcm::detail::count_distinct(dark_values) < 2) {
        for (std::size_t i : dark_pixels) fat.bits[i] = 1;
        return {fat, stage_a};
    }

    // Stage B: pick the candidate cluster closest to the fat reference.
    const fcm::FcmState stage_b = fcm::fcm_cluster(dark_values, config);
    const double d0 = std::abs(stage_b.centroids[0] - fat_reference_hu);
    const double d1 = std::abs(stage_b.centroids[1] - fat_reference_hu);
    const std::size_t keep = d1 < d0 ? 1 : 0;
    for (std::size_t x = 0; x < dark_values.size(); ++x)
        if (stage_b.membership(x, keep) > membership_threshold) fat.bits[dark_pixels[x]] = 1;
    return {fat, stage_b};
}

struct FatPartition {
    BinaryMask sft;
    BinaryMask vft;
    BinaryMask rft;
};

// VFT is fat inside the inner-wall cavity, RFT fat inside the
// retroperitoneal (outer-wall) region, SFT the remaining fat within the
// body. Region masks must be disjoint cavity interiors.
inline FatPartition partition_fat(const BinaryMask& fat, const BinaryMask& body,
                                  const BinaryMask& inner_wall_region,
                                  const BinaryMask& outer_wall_region) {
    require_same_dims(fat, body, "partition_fat");
    require_same_dims(fat, inner_wall_region, "partition_fat");
    require_same_dims(fat, outer_wall_region, "partition_fat");
    if (masks_intersect(inner_wall_region, outer_wall_region))
        throw std::invalid_argument("partition_fat: wall regions overlap");

    FatPartition out;
    out.vft = mask_and(fat, inner_wall_region);
    out.rft = mask_and(fat, outer_wall_region);
    out.sft = mask_subtract(mask_and(fat, body), mask_or(inner_wall_region, outer_wall_region));
    return out;
}

}  // namespace bodycomp::seg
