#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dwa/corpus.hpp"
#include "dwa/metrics.hpp"
#include "dwa/segmentation.hpp"

namespace dwa {

/// Every labeled full-window segment of the global individuals, indexed
/// densely in construction order (individuals by id, segments by start).
/// Immutable after build_pool.
class AugmentationPool {
public:
    AugmentationPool() = default;

    [[nodiscard]] std::size_t size() const noexcept { return segments_.size(); }
    [[nodiscard]] bool empty() const noexcept { return segments_.empty(); }
    [[nodiscard]] const Segment& operator[](std::size_t pool_index) const { return segments_.at(pool_index); }
    [[nodiscard]] std::span<const Segment> segments() const noexcept { return segments_; }
    [[nodiscard]] const SegmentationConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::uint64_t fingerprint() const noexcept { return fingerprint_; }

    /// Cached centroid of a pool segment; equals centroid(pool[i]) exactly.
    [[nodiscard]] const Eigen::VectorXd& centroid_of(std::size_t pool_index) const { return centroids_[pool_index]; }
    /// Cached Euclidean norms of each row of a pool segment.
    [[nodiscard]] const Eigen::VectorXd& row_norms_of(std::size_t pool_index) const { return row_norms_[pool_index]; }

    /// Distance from pool segment `pool_index` to `target` using the caches.
    [[nodiscard]] double distance_to(std::size_t pool_index, const Segment& target, const Eigen::VectorXd& target_centroid,
                                     const Eigen::VectorXd& target_norms, DistanceMetric metric) const;

    friend AugmentationPool build_pool(const Corpus& corpus, const SegmentationConfig& config);
    /// Pool over an explicit segment list (tests, tools). Segments must be
    /// labeled and share one shape.
    static AugmentationPool from_segments(std::vector<Segment> segments, std::uint64_t fingerprint = 0);

private:
    void index();

    std::vector<Segment> segments_;
    std::vector<Eigen::VectorXd> centroids_;
    std::vector<Eigen::VectorXd> row_norms_;
    SegmentationConfig config_;
    std::size_t dim_ = 0;
    std::uint64_t fingerprint_ = 0;
};

AugmentationPool build_pool(const Corpus& corpus, const SegmentationConfig& config);

struct Neighbor {
    std::size_t pool_index = 0;
    double distance = 0.0;

    bool operator==(const Neighbor&) const = default;
};

/// Strict total order used for selection: distance, then pool index.
constexpr bool closer(const Neighbor& a, const Neighbor& b) noexcept
{
    return a.distance < b.distance || (a.distance == b.distance && a.pool_index < b.pool_index);
}

/// Exact scan for the n nearest non-excluded pool segments, ascending.
/// `workers` > 1 splits the distance scan; the result does not depend on it.
std::vector<Neighbor> nearest(const AugmentationPool& pool, const Segment& target, DistanceMetric metric, std::size_t n,
                              const std::set<std::string>& exclude_source_ids = {}, std::size_t workers = 1);

struct DwaConfig {
    DistanceMetric metric = DistanceMetric::Cosine;
    std::size_t n = 1;
    std::set<std::string> exclude_source_ids;

    bool operator==(const DwaConfig&) const = default;
};

struct AugmentationRecord {
    std::size_t target_segment_index = 0;
    std::size_t rank = 0;
    std::size_t pool_index = 0;
    double distance = 0.0;
};

struct AugmentedDataset {
    std::vector<Segment> original;
    std::vector<AugmentationRecord> augmentations;
    /// original, then the selected pool segments in target-then-rank order.
    std::vector<Segment> combined;
};

AugmentedDataset augment_individual(const AugmentationPool& pool, std::span<const Segment> train_segments,
                                    const DwaConfig& config, std::size_t workers = 1);

/// CSV: target_segment_index,rank,pool_index,source_id,start_index,distance
void export_augmentation_report(const AugmentedDataset& dataset, const std::filesystem::path& path);

} // namespace dwa
