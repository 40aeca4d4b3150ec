#include "dwa/segmentation.hpp"

#include "dwa/error.hpp"

namespace dwa {

void validate(const SegmentationConfig& config)
{
    if (config.winlen == 0 || config.hop == 0) {
        throw Error(ErrorKind::InvalidConfig, "winlen and hop must be >= 1");
    }
}

std::vector<Segment> segment_series(const FeatureSeries& features, const LabelSeries* labels,
                                    const SegmentationConfig& config, IndexRange span)
{
    validate(config);
    if (span.begin > span.end || span.end > features.length()) {
        throw Error(ErrorKind::InvalidSpan, "span [" + std::to_string(span.begin) + ", " + std::to_string(span.end) +
                                                ") outside series of length " + std::to_string(features.length()));
    }
    const std::size_t count = window_count(span.size(), config);
    const auto w = static_cast<Eigen::Index>(config.winlen);
    std::vector<Segment> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t start = span.begin + k * config.hop;
        Segment seg;
        seg.source_id = features.individual_id;
        seg.start_index = start;
        seg.frames = features.values.middleRows(static_cast<Eigen::Index>(start), w);
        if (labels != nullptr && start + config.winlen <= labels->length()) {
            Eigen::MatrixX2d lab(w, 2);
            for (Eigen::Index r = 0; r < w; ++r) {
                lab(r, 0) = labels->valence[start + static_cast<std::size_t>(r)];
                lab(r, 1) = labels->arousal[start + static_cast<std::size_t>(r)];
            }
            seg.labels = std::move(lab);
        }
        out.push_back(std::move(seg));
    }
    return out;
}

std::vector<Segment> segment_span(const Individual& individual, const SegmentationConfig& config, SpanName span)
{
    return segment_series(individual.features, &individual.labels, config, individual.span(span));
}

TimelinePrediction concat_predictions(std::span<const Segment> segments, std::span<const Eigen::VectorXd> predictions,
                                      IndexRange span)
{
    if (segments.size() != predictions.size()) {
        throw Error(ErrorKind::LengthMismatch, std::to_string(segments.size()) + " segments but " +
                                                   std::to_string(predictions.size()) + " predictions");
    }
    TimelinePrediction out;
    if (segments.empty()) {
        return out;
    }
    std::vector<double> sum(span.size(), 0.0);
    std::vector<std::size_t> hits(span.size(), 0);
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const auto& seg = segments[k];
        const auto& pred = predictions[k];
        if (static_cast<std::size_t>(pred.size()) != seg.winlen()) {
            throw Error(ErrorKind::LengthMismatch, "prediction " + std::to_string(k) + " has length " +
                                                       std::to_string(pred.size()) + ", segment has winlen " +
                                                       std::to_string(seg.winlen()));
        }
        if (seg.start_index < span.begin || seg.start_index + seg.winlen() > span.end) {
            throw Error(ErrorKind::InvalidSpan, "segment at " + std::to_string(seg.start_index) + " outside span");
        }
        for (std::size_t r = 0; r < seg.winlen(); ++r) {
            const std::size_t slot = seg.start_index + r - span.begin;
            sum[slot] += pred(static_cast<Eigen::Index>(r));
            ++hits[slot];
        }
    }
    for (std::size_t i = 0; i < span.size(); ++i) {
        if (hits[i] == 0) {
            out.uncovered.push_back(span.begin + i);
        } else {
            out.indices.push_back(span.begin + i);
            out.values.push_back(sum[i] / static_cast<double>(hits[i]));
        }
    }
    return out;
}

} // namespace dwa
