#pragma once

// Fuzzy c-means over scalar pixel intensities, fuzzifier fixed at 2:
// alternating membership and centroid updates minimizing
//
//   L = sum_k sum_x m_k(x)^2 (v(x) - c_k)^2
//
// with m_k(x) = [ sum_j d_k(x)^2 / d_j(x)^2 ]^-1 and c_k the
// membership-squared weighted mean. Centroids are kept in ascending
// order, so membership column k always refers to the k-th smallest
// centroid. Everything is deterministic: initialization uses evenly
// spaced quantiles of the data, never randomness.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bodycomp::fcm {

struct FcmConfig {
    // The membership exponent is fixed; the update rules hard-code the
    // squared form.
    static constexpr double fuzzifier = 2.0;

    int cluster_count = 2;
    double tolerance = 1e-4;   // max centroid shift that counts as converged
    int max_iterations = 300;
    std::optional<std::vector<double>> initial_centroids;  // strictly increasing if given

    void validate() const {
        if (cluster_count < 2) throw std::invalid_argument("FcmConfig: cluster_count must be >= 2");
        if (tolerance < 0.0) throw std::invalid_argument("FcmConfig: tolerance must be >= 0");
        if (max_iterations < 1) throw std::invalid_argument("FcmConfig: max_iterations must be >= 1");
        if (initial_centroids) {
            if (static_cast<int>(initial_centroids->size()) != cluster_count)
                throw std::invalid_argument("FcmConfig: initial_centroids size != cluster_count");
            for (std::size_t i = 1; i < initial_centroids->size(); ++i)
                if ((*initial_centroids)[i - 1] >= (*initial_centroids)[i])
                    throw std::invalid_argument("FcmConfig: initial_centroids must be strictly increasing");
        }
    }
};

struct FcmState {
    std::vector<double> centroids;        // ascending, size C
    std::vector<double> memberships;      // row-major n x C, rows sum to 1
    std::vector<double> objective_trace;  // L per iteration, non-increasing
    int iterations_run = 0;

    [[nodiscard]] double membership(std::size_t pixel, std::size_t cluster) const {
        return memberships[pixel * centroids.size() + cluster];
    }
};

// Raised when an update step degenerates (a cluster loses all weight or
// two centroids collide); carries the iteration it happened on.
struct FcmDegenerateError : std::runtime_error {
    int iteration;
    FcmDegenerateError(const std::string& what, int iter)
        : std::runtime_error(what + " (iteration " + std::to_string(iter) + ")"), iteration(iter) {}
};

namespace detail {

inline void require_distinct_centroids(std::span<const double> centroids, int iteration) {
    for (std::size_t a = 0; a < centroids.size(); ++a)
        for (std::size_t b = a + 1; b < centroids.size(); ++b)
            if (centroids[a] == centroids[b])
                throw FcmDegenerateError("fcm: duplicate centroids", iteration);
}

inline std::size_t count_distinct(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return static_cast<std::size_t>(std::unique(values.begin(), values.end()) - values.begin());
}

}  // namespace detail

// Fuzzifier-2 membership update. A pixel sitting exactly on a centroid is
// assigned crisply to it (the standard zero-distance rule).
inline std::vector<double> compute_memberships(std::span<const double> intensities,
                                               std::span<const double> centroids) {
    const std::size_t c = centroids.size();
    if (c < 2) throw std::invalid_argument("compute_memberships: need at least 2 centroids");
    detail::require_distinct_centroids(centroids, 0);

    const std::size_t n = intensities.size();
    std::vector<double> memberships(n * c, 0.0);
    std::vector<double> dist2(c);
    for (std::size_t x = 0; x < n; ++x) {
        const double v = intensities[x];
        std::size_t exact = c;
        for (std::size_t k = 0; k < c; ++k) {
            const double d = v - centroids[k];
            dist2[k] = d * d;
            if (d == 0.0) {
                exact = k;
                break;
            }
        }
        double* row = memberships.data() + x * c;
        if (exact < c) {
            row[exact] = 1.0;
            continue;
        }
        for (std::size_t k = 0; k < c; ++k) {
            double ratio_sum = 0.0;
            for (std::size_t j = 0; j < c; ++j) ratio_sum += dist2[k] / dist2[j];
            row[k] = 1.0 / ratio_sum;
        }
    }
    return memberships;
}

// Membership-squared weighted means, returned ascending.
inline std::vector<double> update_centroids(std::span<const double> intensities,
                                            std::span<const double> memberships,
                                            int cluster_count, int iteration = 0) {
    const auto c = static_cast<std::size_t>(cluster_count);
    const std::size_t n = intensities.size();
    if (memberships.size() != n * c)
        throw std::invalid_argument("update_centroids: membership size mismatch");

    std::vector<double> num(c, 0.0), den(c, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
        const double v = intensities[x];
        const double* row = memberships.data() + x * c;
        for (std::size_t k = 0; k < c; ++k) {
            const double w = row[k] * row[k];
            num[k] += w * v;
            den[k] += w;
        }
    }
    std::vector<double> centroids(c);
    for (std::size_t k = 0; k < c; ++k) {
        if (den[k] == 0.0)
            throw FcmDegenerateError("fcm: cluster " + std::to_string(k) + " has zero total membership",
                                     iteration);
        centroids[k] = num[k] / den[k];
    }
    std::sort(centroids.begin(), centroids.end());
    return centroids;
}

inline double fcm_objective(std::span<const double> intensities,
                            std::span<const double> memberships,
                            std::span<const double> centroids) {
    const std::size_t c = centroids.size();
    const std::size_t n = intensities.size();
    double loss = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
        const double v = intensities[x];
        const double* row = memberships.data() + x * c;
        for (std::size_t k = 0; k < c; ++k) {
            const double d = v - centroids[k];
            loss += row[k] * row[k] * d * d;
        }
    }
    return loss;
}

namespace detail {

// Deterministic initialization: midpoint quantiles of the intensity
// distribution (duplicates and all, so seeds follow the data mass). When
// heavy ties make quantiles coincide, the seeds are pushed apart along the
// sorted distinct values. Requires at least C distinct values.
inline std::vector<double> quantile_init(std::span<const double> intensities, int cluster_count) {
    std::vector<double> sorted(intensities.begin(), intensities.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> uniq = sorted;
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    const auto n = static_cast<long>(sorted.size());
    const auto m = static_cast<long>(uniq.size());
    const auto c = static_cast<long>(cluster_count);

    // Data quantiles, expressed as positions in the distinct-value list.
    std::vector<long> idx(static_cast<std::size_t>(c));
    for (long k = 0; k < c; ++k) {
        const double p = (2.0 * k + 1.0) / (2.0 * c);
        const double value = sorted[static_cast<std::size_t>(std::lround(p * (n - 1)))];
        idx[static_cast<std::size_t>(k)] =
            std::lower_bound(uniq.begin(), uniq.end(), value) - uniq.begin();
    }
    // Force strictly increasing positions; m >= C keeps both passes valid.
    for (long k = 1; k < c; ++k)
        idx[static_cast<std::size_t>(k)] =
            std::max(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(k - 1)] + 1);
    if (idx.back() > m - 1) {
        idx.back() = m - 1;
        for (long k = c - 2; k >= 0; --k)
            idx[static_cast<std::size_t>(k)] =
                std::min(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(k + 1)] - 1);
    }

    std::vector<double> centroids(static_cast<std::size_t>(c));
    for (long k = 0; k < c; ++k)
        centroids[static_cast<std::size_t>(k)] = uniq[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
    return centroids;
}

}  // namespace detail

// Runs the alternating update loop until the largest centroid shift drops
// below config.tolerance or max_iterations is reached. The final state
// carries memberships recomputed against the converged centroids, the full
// objective trace, and the iteration count. `seed` is accepted for
// interface stability but unused: initialization is quantile-based and the
// whole procedure is deterministic.
inline FcmState fcm_cluster(std::span<const double> intensities, const FcmConfig& config,
                            [[maybe_unused]] std::uint64_t seed = 0) {
    config.validate();
    const auto c = static_cast<std::size_t>(config.cluster_count);
    if (intensities.size() < c)
        throw std::invalid_argument("fcm_cluster: fewer samples than clusters");
    if (detail::count_distinct({intensities.begin(), intensities.end()}) < c)
        throw std::invalid_argument("fcm_cluster: fewer than " + std::to_string(c) +
                                    " distinct intensity values");

    FcmState state;
    state.centroids = config.initial_centroids ? *config.initial_centroids
                                               : detail::quantile_init(intensities, config.cluster_count);

    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        try {
            state.memberships = compute_memberships(intensities, state.centroids);
        } catch (const FcmDegenerateError&) {
            throw FcmDegenerateError("fcm: duplicate centroids", iter);
        }
        std::vector<double> next =
            update_centroids(intensities, state.memberships, config.cluster_count, iter);

        double shift = 0.0;
        for (std::size_t k = 0; k < c; ++k)
            shift = std::max(shift, std::abs(next[k] - state.centroids[k]));
        state.centroids = std::move(next);
        state.objective_trace.push_back(fcm_objective(intensities, state.memberships, state.centroids));
        state.iterations_run = iter;
        if (shift < config.tolerance) break;
    }

    // Refresh memberships against the final centroids so the state is
    // internally consistent; one extra membership step cannot increase L.
    state.memberships = compute_memberships(intensities, state.centroids);
    state.objective_trace.push_back(fcm_objective(intensities, state.memberships, state.centroids));
    return state;
}

}  // namespace bodycomp::fcm
