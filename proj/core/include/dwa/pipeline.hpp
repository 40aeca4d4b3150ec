#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dwa/augmentation.hpp"
#include "dwa/corpus.hpp"
#include "dwa/metrics.hpp"
#include "dwa/regressor.hpp"
#include "dwa/segmentation.hpp"

namespace dwa {

struct GridSpec {
    std::vector<DistanceMetric> metrics;
    std::vector<std::size_t> n;

    bool operator==(const GridSpec&) const = default;
};

struct ExperimentConfig {
    SegmentationConfig seg;
    /// Absent: the no-augmentation protocol.
    std::optional<DwaConfig> dwa;
    TrainConfig train_generic;
    TrainConfig train_personal;
    /// Candidate hidden sizes for the generic model, selected on Devel_G.
    std::vector<std::size_t> hidden_dims{16};
    GridSpec grid;
    std::vector<std::uint64_t> seeds{0};
    std::vector<Target> targets{Target::Arousal, Target::Valence};
    std::filesystem::path output_dir = "out";
    /// Corpus directory; the CLI --corpus flag overrides it.
    std::string corpus_dir;
    /// Fit a scaler on D_G and apply it to the whole corpus first.
    bool standardize = true;
    /// Also score the Test span when its labels exist.
    bool evaluate_test = true;
    /// Threads for independent per-individual jobs and pool scans.
    std::size_t workers = 1;

    bool operator==(const ExperimentConfig&) const = default;
};

void validate(const ExperimentConfig& config);

/// Parses the JSON document; unknown keys anywhere are rejected.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string to_json(const ExperimentConfig& config);
std::uint64_t fingerprint(const ExperimentConfig& config);

std::string hex64(std::uint64_t value);

struct EvaluationRecord {
    std::string individual_id;
    Target target = Target::Valence;
    SpanName split = SpanName::DevelI;
    CccReport ccc;
    std::uint64_t config_fingerprint = 0;
};

/// Fits the scaler on D_G and applies it to every individual.
Corpus standardize(const Corpus& corpus);

/// Trains M_G on TrainG segments with DevelG as the early-stopping set
/// (TrainG itself when there is no DevelG), one model per hidden size in
/// the config; returns the best on the development set.
RegressorParams train_generic(const Corpus& corpus, const ExperimentConfig& config, Target target, std::uint64_t seed,
                              TrainTrace* trace = nullptr);

struct Personalized {
    RegressorParams params;
    EvaluationRecord devel;
    TrainTrace trace;
    std::size_t fine_tune_size = 0;
    std::optional<AugmentedDataset> augmentation;
};

/// Fine-tunes a copy of `generic` on the individual's Train_I segments,
/// augmented from `pool` when config.dwa is set, with early stopping on
/// Devel_I.
Personalized personalize(const RegressorParams& generic, const Individual& individual, const AugmentationPool* pool,
                         const ExperimentConfig& config, Target target, std::uint64_t seed);

/// Per-timestamp predictions over a span, overlap averaged.
TimelinePrediction predict_span(const RegressorParams& model, const Individual& individual, SpanName span,
                                const SegmentationConfig& seg);

EvaluationRecord evaluate(const RegressorParams& model, const Individual& individual, SpanName span, Target target,
                          const SegmentationConfig& seg, std::uint64_t config_fingerprint = 0);

struct FusionWeights {
    double w_a = 0.5;
    double w_b = 0.5;
    double dev_ccc_a = 0.0;
    double dev_ccc_b = 0.0;
};

inline constexpr double fusion_floor = 1e-6;

/// Weights proportional to max(dev CCC, 1e-6).
FusionWeights fusion_weights(double dev_ccc_a, double dev_ccc_b);

std::vector<double> late_fuse(std::span<const double> preds_a, std::span<const double> preds_b, double dev_ccc_a,
                              double dev_ccc_b);

struct ReportRow {
    std::string metric; // "generic", "none" or a distance metric name
    std::size_t n = 0;
    std::uint64_t seed = 0;
    Target target = Target::Valence;
    SpanName split = SpanName::DevelI;
    std::string individual_id;
    CccReport ccc;
};

struct GridCell {
    std::string metric;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    SpanName split = SpanName::DevelI;
    /// Mean of per-individual CCCs over D_I, per target.
    std::optional<double> arousal;
    std::optional<double> valence;

    /// Mean of the arousal and valence aggregates when both exist.
    [[nodiscard]] std::optional<double> combined() const;
};

struct ExperimentResult {
    std::vector<ReportRow> rows;
    std::vector<GridCell> cells;
};

std::vector<GridCell> aggregate(const std::vector<ReportRow>& rows);

/// The full protocol: generic training per (target, seed), a no-augmentation
/// baseline, then every (metric, n) grid cell (or config.dwa alone when the
/// grid is empty). Writes report.csv, grid.csv, summary.json and generic
/// checkpoints under config.output_dir.
ExperimentResult run_experiment(const Corpus& corpus, const ExperimentConfig& config);

std::string report_csv(const std::vector<ReportRow>& rows);
std::string grid_csv(const std::vector<GridCell>& cells);

} // namespace dwa
