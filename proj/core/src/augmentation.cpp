#include "dwa/augmentation.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include "dwa/error.hpp"
#include "dwa/random.hpp"
#include "dwa/text.hpp"

namespace dwa {

namespace {

Eigen::VectorXd row_norms(const Eigen::MatrixXd& frames)
{
    Eigen::VectorXd out(frames.rows());
    for (Eigen::Index r = 0; r < frames.rows(); ++r) {
        out(r) = frames.row(r).norm();
    }
    return out;
}

// Runs body(begin, end) over [0, count) split into contiguous chunks.
template <typename Body>
void parallel_chunks(std::size_t count, std::size_t workers, Body&& body)
{
    constexpr std::size_t min_chunk = 256;
    workers = std::max<std::size_t>(1, std::min(workers, count / min_chunk));
    if (workers <= 1) {
        body(std::size_t{0}, count);
        return;
    }
    std::vector<std::jthread> threads;
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        if (begin < end) {
            threads.emplace_back([&body, begin, end] { body(begin, end); });
        }
    }
}

} // namespace

void AugmentationPool::index()
{
    centroids_.clear();
    row_norms_.clear();
    centroids_.reserve(segments_.size());
    row_norms_.reserve(segments_.size());
    for (const auto& seg : segments_) {
        centroids_.push_back(centroid(seg));
        row_norms_.push_back(row_norms(seg.frames));
    }
}

AugmentationPool AugmentationPool::from_segments(std::vector<Segment> segments, std::uint64_t fingerprint)
{
    AugmentationPool pool;
    if (!segments.empty()) {
        pool.config_.winlen = segments.front().winlen();
        pool.config_.hop = segments.front().winlen();
        pool.dim_ = segments.front().dim();
    }
    for (const auto& seg : segments) {
        if (!seg.labeled()) {
            throw Error(ErrorKind::UnlabeledSpan, "pool segment from '" + seg.source_id + "' has no labels");
        }
        if (seg.winlen() != pool.config_.winlen || seg.dim() != pool.dim_) {
            throw Error(ErrorKind::DimensionMismatch, "pool segments must share one shape");
        }
    }
    pool.segments_ = std::move(segments);
    pool.fingerprint_ = fingerprint;
    pool.index();
    return pool;
}

AugmentationPool build_pool(const Corpus& corpus, const SegmentationConfig& config)
{
    validate(config);
    const auto members = corpus.global();
    if (members.empty()) {
        throw Error(ErrorKind::EmptyGlobalSplit, "no TrainG/DevelG individuals to build the pool from");
    }
    AugmentationPool pool;
    pool.config_ = config;
    pool.dim_ = corpus.feature_dim;
    for (const auto* ind : members) {
        auto segs = segment_series(ind->features, &ind->labels, config, {0, ind->labels.length()});
        for (auto& s : segs) {
            pool.segments_.push_back(std::move(s));
        }
    }
    std::uint64_t h = corpus.fingerprint();
    h = fnv1a("winlen=" + std::to_string(config.winlen) + ";hop=" + std::to_string(config.hop), h);
    if (auto it = corpus.metadata.find("scaler"); it != corpus.metadata.end()) {
        h = fnv1a("scaler=" + it->second, h);
    }
    pool.fingerprint_ = h;
    pool.index();
    return pool;
}

double AugmentationPool::distance_to(std::size_t i, const Segment& target, const Eigen::VectorXd& target_centroid,
                                     const Eigen::VectorXd& target_norms, DistanceMetric metric) const
{
    switch (metric) {
    case DistanceMetric::CentroidL2:
        return (centroids_[i] - target_centroid).norm();
    case DistanceMetric::CentroidDP:
        return -centroids_[i].dot(target_centroid);
    case DistanceMetric::Cosine: {
        const auto& frames = segments_[i].frames;
        const auto& norms = row_norms_[i];
        double total = 0.0;
        for (Eigen::Index r = 0; r < frames.rows(); ++r) {
            total += cosine_term(frames.row(r).dot(target.frames.row(r)), norms(r), target_norms(r));
        }
        return total;
    }
    }
    return 0.0;
}

std::vector<Neighbor> nearest(const AugmentationPool& pool, const Segment& target, DistanceMetric metric, std::size_t n,
                              const std::set<std::string>& exclude_source_ids, std::size_t workers)
{
    if (target.winlen() != pool.config().winlen || target.dim() != pool.dim()) {
        throw Error(ErrorKind::FingerprintMismatch, "target segment shape " + std::to_string(target.winlen()) + "x" +
                                                        std::to_string(target.dim()) + " does not match the pool");
    }
    const Eigen::VectorXd target_centroid = centroid(target);
    const Eigen::VectorXd target_norms = row_norms(target.frames);

    std::vector<double> distances(pool.size());
    std::vector<char> eligible(pool.size(), 1);
    parallel_chunks(pool.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            if (!exclude_source_ids.empty() && exclude_source_ids.contains(pool[i].source_id)) {
                eligible[i] = 0;
                continue;
            }
            distances[i] = pool.distance_to(i, target, target_centroid, target_norms, metric);
        }
    });

    std::vector<Neighbor> candidates;
    candidates.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (eligible[i] != 0) {
            candidates.push_back({i, distances[i]});
        }
    }
    if (n > candidates.size()) {
        throw Error(ErrorKind::PoolTooSmall, "requested " + std::to_string(n) + " neighbours from " +
                                                 std::to_string(candidates.size()) + " eligible pool segments");
    }
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n), candidates.end(), closer);
    candidates.resize(n);
    return candidates;
}

AugmentedDataset augment_individual(const AugmentationPool& pool, std::span<const Segment> train_segments,
                                    const DwaConfig& config, std::size_t workers)
{
    if (config.n == 0) {
        throw Error(ErrorKind::InvalidConfig, "augmentation n must be >= 1");
    }
    if (train_segments.empty()) {
        throw Error(ErrorKind::EmptyPersonalSplit, "no training segments to augment");
    }
    for (const auto& seg : train_segments) {
        if (seg.winlen() != pool.config().winlen || seg.dim() != pool.dim()) {
            throw Error(ErrorKind::FingerprintMismatch, "segment of '" + seg.source_id + "' does not match the pool");
        }
    }
    AugmentedDataset out;
    out.original.assign(train_segments.begin(), train_segments.end());
    out.augmentations.reserve(train_segments.size() * config.n);
    for (std::size_t t = 0; t < train_segments.size(); ++t) {
        const auto picks = nearest(pool, train_segments[t], config.metric, config.n, config.exclude_source_ids, workers);
        for (std::size_t rank = 0; rank < picks.size(); ++rank) {
            out.augmentations.push_back({t, rank, picks[rank].pool_index, picks[rank].distance});
        }
    }
    out.combined = out.original;
    out.combined.reserve(out.original.size() + out.augmentations.size());
    for (const auto& rec : out.augmentations) {
        out.combined.push_back(pool[rec.pool_index]);
    }
    return out;
}

void export_augmentation_report(const AugmentedDataset& dataset, const std::filesystem::path& path)
{
    std::string text = "target_segment_index,rank,pool_index,source_id,start_index,distance\n";
    const std::size_t offset = dataset.original.size();
    for (std::size_t k = 0; k < dataset.augmentations.size(); ++k) {
        const auto& rec = dataset.augmentations[k];
        const Segment& seg = dataset.combined.at(offset + k);
        text += std::to_string(rec.target_segment_index) + ',' + std::to_string(rec.rank) + ',' +
                std::to_string(rec.pool_index) + ',' + seg.source_id + ',' + std::to_string(seg.start_index) + ',' +
                format_double(rec.distance) + '\n';
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw Error(ErrorKind::IoError, "write failed: " + path.string());
    }
}

} // namespace dwa
