#pragma once

// Label refinement and fusion: connected-component labeling, removal of
// tiny components, exact nearest-label hole filling, and precedence-based
// fusion of the per-source label maps.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bodycomp/core.hpp"

namespace bodycomp::post {

enum class Connectivity { Four = 4, Eight = 8 };

// Dense component labeling: ids start at 1 in scan order, background is 0.
struct ComponentMap {
    Grid<std::int32_t> ids;
    std::vector<std::size_t> sizes;  // sizes[i] is the size of component i+1

    [[nodiscard]] int count() const { return static_cast<int>(sizes.size()); }
};

inline ComponentMap connected_components(const BinaryMask& mask, Connectivity connectivity) {
    const int w = mask.width, h = mask.height;
    ComponentMap out;
    out.ids = Grid<std::int32_t>(w, h, 0);

    static constexpr std::array<std::array<int, 2>, 8> offsets = {{
        {1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1},
    }};
    const std::size_t neighbor_count = connectivity == Connectivity::Four ? 4 : 8;

    std::vector<std::size_t> stack;
    std::int32_t next_id = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t start = static_cast<std::size_t>(y) * w + x;
            if (!mask.bits[start] || out.ids.data[start] != 0) continue;
            ++next_id;
            std::size_t size = 0;
            stack.push_back(start);
            out.ids.data[start] = next_id;
            while (!stack.empty()) {
                const std::size_t cur = stack.back();
                stack.pop_back();
                ++size;
                const int cx = static_cast<int>(cur % w), cy = static_cast<int>(cur / w);
                for (std::size_t d = 0; d < neighbor_count; ++d) {
                    const int nx = cx + offsets[d][0], ny = cy + offsets[d][1];
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                    if (mask.bits[ni] && out.ids.data[ni] == 0) {
                        out.ids.data[ni] = next_id;
                        stack.push_back(ni);
                    }
                }
            }
            out.sizes.push_back(size);
        }
    }
    return out;
}

struct RemovalResult {
    LabelMap map;
    BinaryMask removed;
};

// Clears every 8-connected component of a non-background class smaller than
// min_size to background and records the cleared pixels. The strict "< min_size"
// boundary means a component of exactly min_size pixels survives.
inline RemovalResult remove_small_components(const LabelMap& map, int min_size) {
    if (min_size < 1) throw std::invalid_argument("remove_small_components: min_size must be >= 1");
    RemovalResult out{map, BinaryMask(map.width, map.height)};
    for (int code = 1; code < kTissueClassCount; ++code) {
        const BinaryMask mask = class_mask(map, static_cast<TissueClass>(code));
        if (mask.empty()) continue;
        const ComponentMap comps = connected_components(mask, Connectivity::Eight);
        std::vector<std::uint8_t> drop(comps.sizes.size(), 0);
        bool any = false;
        for (std::size_t i = 0; i < comps.sizes.size(); ++i) {
            if (comps.sizes[i] < static_cast<std::size_t>(min_size)) {
                drop[i] = 1;
                any = true;
            }
        }
        if (!any) continue;
        for (std::size_t i = 0; i < out.map.labels.size(); ++i) {
            const std::int32_t id = comps.ids.data[i];
            if (id != 0 && drop[static_cast<std::size_t>(id - 1)]) {
                out.map.labels[i] = 0;
                out.removed.bits[i] = 1;
            }
        }
    }
    return out;
}

// Assigns each hole pixel the class of its nearest labeled donor under exact
// Euclidean distance. Ties break on the smaller class code, then on the
// donor's row-major position, so the result is fully deterministic.
//
// Implementation: per hole pixel, expanding Chebyshev rings over donor
// candidates; the ring scan stops once the ring cannot beat the best exact
// distance found so far.
inline LabelMap nearest_label_fill(const LabelMap& map, const BinaryMask& holes) {
    if (!same_dims(map.width, map.height, holes.width, holes.height))
        throw std::invalid_argument("nearest_label_fill: dimensions differ");
    const int w = map.width, h = map.height;
    for (std::size_t i = 0; i < holes.bits.size(); ++i)
        if (holes.bits[i] && map.labels[i] != 0)
            throw std::invalid_argument("nearest_label_fill: hole pixel is not background");

    bool any_donor = false;
    for (std::size_t i = 0; i < map.labels.size(); ++i)
        if (map.labels[i] != 0) {
            any_donor = true;
            break;
        }
    if (!any_donor) throw std::runtime_error("nearest_label_fill: map has no labeled donor pixels");

    LabelMap out = map;
    const long max_radius = static_cast<long>(std::max(w, h));

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!holes.at(x, y)) continue;

            long best_d2 = std::numeric_limits<long>::max();
            int best_class = kTissueClassCount;
            long best_pos = std::numeric_limits<long>::max();

            auto consider = [&](int dx, int dy) {
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
                const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                const std::uint8_t cls = map.labels[ni];
                if (cls == 0) return;
                const long d2 = static_cast<long>(dx) * dx + static_cast<long>(dy) * dy;
                const long pos = static_cast<long>(ni);
                if (d2 < best_d2 || (d2 == best_d2 && (cls < best_class ||
                                                       (cls == best_class && pos < best_pos)))) {
                    best_d2 = d2;
                    best_class = cls;
                    best_pos = pos;
                }
            };

            for (long r = 1; r <= max_radius; ++r) {
                if (best_d2 != std::numeric_limits<long>::max() && r * r > best_d2) break;
                const int ri = static_cast<int>(r);
                for (int dx = -ri; dx <= ri; ++dx) {
                    consider(dx, -ri);
                    consider(dx, ri);
                }
                for (int dy = -ri + 1; dy <= ri - 1; ++dy) {
                    consider(-ri, dy);
                    consider(ri, dy);
                }
            }
            out.labels[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>(best_class);
        }
    }
    return out;
}

// Precedence order for resolving overlapping labels at fusion time:
// supervised sources (organs, muscle, wall) outrank the unsupervised fat
// and body-mask labels, and background always loses.
struct FusionPolicy {
    std::vector<std::uint8_t> precedence;  // highest priority first, background last
    int min_component_size = 25;

    static FusionPolicy defaults() {
        FusionPolicy p;
        p.precedence = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 0};
        return p;
    }

    void validate() const {
        if (min_component_size < 1)
            throw std::invalid_argument("FusionPolicy: min_component_size must be >= 1");
        if (precedence.empty() || precedence.back() != 0)
            throw std::invalid_argument("FusionPolicy: precedence must end with background");
        std::array<bool, kTissueClassCount> seen{};
        for (std::uint8_t code : precedence) {
            if (!is_valid_class_code(code))
                throw std::invalid_argument("FusionPolicy: invalid class code in precedence");
            if (seen[code]) throw std::invalid_argument("FusionPolicy: duplicate class in precedence");
            seen[code] = true;
        }
    }

    // Rank lookup, 0 = highest. Codes omitted from the list sit between the
    // listed classes and background, ordered by code.
    [[nodiscard]] std::array<int, kTissueClassCount> ranks() const {
        std::array<int, kTissueClassCount> rank{};
        rank.fill(-1);
        int next = 0;
        for (std::uint8_t code : precedence)
            if (code != 0) rank[code] = next++;
        for (int code = 1; code < kTissueClassCount; ++code)
            if (rank[static_cast<std::size_t>(code)] < 0) rank[static_cast<std::size_t>(code)] = next++;
        rank[0] = next;
        return rank;
    }
};

// Per-pixel fusion: each pixel takes the highest-precedence non-background
// class among its five source labels.
inline LabelMap fuse_masks(const LabelMap& organ, const LabelMap& muscle, const LabelMap& wall,
                           const LabelMap& fat, const LabelMap& body, const FusionPolicy& policy) {
    policy.validate();
    const std::array<const LabelMap*, 5> sources = {&organ, &muscle, &wall, &fat, &body};
    for (const LabelMap* m : sources)
        if (!same_dims(m->width, m->height, organ.width, organ.height))
            throw std::invalid_argument("fuse_masks: source dimensions differ");

    const std::array<int, kTissueClassCount> rank = policy.ranks();
    LabelMap out(organ.width, organ.height);
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
        std::uint8_t best = 0;
        int best_rank = rank[0];
        for (const LabelMap* m : sources) {
            const std::uint8_t code = m->labels[i];
            if (code != 0 && rank[code] < best_rank) {
                best = code;
                best_rank = rank[code];
            }
        }
        out.labels[i] = best;
    }
    return out;
}

}  // namespace bodycomp::post
