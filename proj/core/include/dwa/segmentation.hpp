#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dwa/corpus.hpp"

namespace dwa {

struct SegmentationConfig {
    std::size_t winlen = 10;
    std::size_t hop = 5;

    bool operator==(const SegmentationConfig&) const = default;
};

void validate(const SegmentationConfig& config);

/// winlen consecutive frames of one individual, with aligned labels when
/// the whole window is labeled. Columns of `labels` are (valence, arousal).
struct Segment {
    std::string source_id;
    std::size_t start_index = 0;
    Eigen::MatrixXd frames;
    std::optional<Eigen::MatrixX2d> labels;

    [[nodiscard]] std::size_t winlen() const noexcept { return static_cast<std::size_t>(frames.rows()); }
    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(frames.cols()); }
    [[nodiscard]] bool labeled() const noexcept { return labels.has_value(); }

    [[nodiscard]] Eigen::VectorXd target_labels(Target target) const
    {
        return labels->col(target == Target::Valence ? 0 : 1);
    }
};

/// Number of full windows in a span of `span_length` timestamps.
constexpr std::size_t window_count(std::size_t span_length, const SegmentationConfig& config) noexcept
{
    return span_length < config.winlen ? 0 : (span_length - config.winlen) / config.hop + 1;
}

/// Cuts [span.begin, span.end) into full windows starting at span.begin,
/// span.begin + hop, ...; a trailing partial window is dropped.
std::vector<Segment> segment_series(const FeatureSeries& features, const LabelSeries* labels,
                                    const SegmentationConfig& config, IndexRange span);

/// Segments of an individual's named span, labeled where labels exist.
std::vector<Segment> segment_span(const Individual& individual, const SegmentationConfig& config, SpanName span);

struct TimelinePrediction {
    /// Covered timestamps in ascending order, with their averaged prediction.
    std::vector<std::size_t> indices;
    std::vector<double> values;
    /// Timestamps of the span no segment covered.
    std::vector<std::size_t> uncovered;
};

/// Reassembles per-segment predictions onto the timeline of `span`;
/// overlapping predictions are averaged.
TimelinePrediction concat_predictions(std::span<const Segment> segments, std::span<const Eigen::VectorXd> predictions,
                                      IndexRange span);

} // namespace dwa
