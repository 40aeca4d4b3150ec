#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dwa {

enum class Split { TrainG, DevelG, Test };

std::string_view to_string(Split split) noexcept;
Split parse_split(std::string_view text);

/// Timestamps x feature dimensions for one individual and one modality.
struct FeatureSeries {
    std::string individual_id;
    Eigen::MatrixXd values;
    double sample_period = 1.0;

    [[nodiscard]] std::size_t length() const noexcept { return static_cast<std::size_t>(values.rows()); }
    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(values.cols()); }

    bool operator==(const FeatureSeries& other) const
    {
        return individual_id == other.individual_id && sample_period == other.sample_period &&
               values.rows() == other.values.rows() && values.cols() == other.values.cols() &&
               values == other.values;
    }
};

enum class Target { Valence, Arousal };

std::string_view to_string(Target target) noexcept;
Target parse_target(std::string_view text);

/// Per-timestamp valence/arousal. The series may be shorter than its
/// FeatureSeries for Test individuals whose tail is unlabeled; labels always
/// cover a prefix [0, length()).
struct LabelSeries {
    std::string individual_id;
    std::vector<double> valence;
    std::vector<double> arousal;

    [[nodiscard]] std::size_t length() const noexcept { return valence.size(); }
    [[nodiscard]] const std::vector<double>& of(Target target) const noexcept
    {
        return target == Target::Valence ? valence : arousal;
    }

    bool operator==(const LabelSeries&) const = default;
};

/// Boundaries of the personal spans: Train_I = [0, train_end),
/// Devel_I = [train_end, devel_end), Test = [devel_end, T).
struct Portions {
    std::size_t train_end = 0;
    std::size_t devel_end = 0;

    bool operator==(const Portions&) const = default;
};

struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    [[nodiscard]] std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
    bool operator==(const IndexRange&) const = default;
};

/// Named spans of an individual's series.
enum class SpanName { Full, TrainI, DevelI, Test };

std::string_view to_string(SpanName span) noexcept;
SpanName parse_span(std::string_view text);

struct Individual {
    std::string id;
    Split split = Split::TrainG;
    FeatureSeries features;
    LabelSeries labels;
    std::optional<Portions> portions;

    [[nodiscard]] std::size_t length() const noexcept { return features.length(); }
    [[nodiscard]] bool labeled_on(IndexRange range) const noexcept { return range.end <= labels.length(); }

    /// Resolves a span name to indices; Train_I/Devel_I/Test need portions.
    [[nodiscard]] IndexRange span(SpanName name) const;

    bool operator==(const Individual&) const = default;
};

struct Corpus {
    std::vector<Individual> individuals;
    std::size_t feature_dim = 0;
    double sample_period = 1.0;
    std::map<std::string, std::string> metadata;

    [[nodiscard]] const Individual& at(std::string_view id) const;
    [[nodiscard]] std::vector<const Individual*> in_splits(const std::set<Split>& splits) const;
    /// D_G: TrainG and DevelG individuals.
    [[nodiscard]] std::vector<const Individual*> global() const { return in_splits({Split::TrainG, Split::DevelG}); }
    /// D_I: Test individuals.
    [[nodiscard]] std::vector<const Individual*> targets() const { return in_splits({Split::Test}); }

    /// Content hash over ids, splits, portions and every value.
    [[nodiscard]] std::uint64_t fingerprint() const;

    bool operator==(const Corpus&) const = default;
};

/// Throws on any violated corpus invariant.
void validate(const Corpus& corpus);

// ---------------------------------------------------------------------------
// On-disk layout

struct CorpusSchema {
    std::string manifest_name = "manifest.json";
    /// Relative tolerance used when checking timestamp spacing.
    double timestamp_tolerance = 1e-9;
};

Corpus load_corpus(const std::filesystem::path& root, const CorpusSchema& schema = {});
void save_corpus(const Corpus& corpus, const std::filesystem::path& root, const CorpusSchema& schema = {});

// ---------------------------------------------------------------------------
// Synthetic generator

struct SynthConfig {
    std::size_t n_train_g = 12;
    std::size_t n_devel_g = 4;
    std::size_t n_test = 4;
    std::size_t t_train_g = 300;
    std::size_t t_devel_g = 300;
    std::size_t t_test = 300;
    std::size_t feature_dim = 8;
    double sample_period = 0.25;
    std::size_t n_styles = 3;
    std::size_t n_nuisance = 2;
    double noise = 0.05;
    /// Per-individual deviation of the mixing map from its style.
    double style_jitter = 0.1;
    /// Scale of the per-style additive feature offset.
    double style_offset = 0.5;
    /// Half-life (timestamps) of the label/nuisance random-walk smoothing.
    double smoothing_half_life = 8.0;
    double train_fraction = 0.2;
    double devel_fraction = 0.2;
    /// Extra TrainG members cloned from each Test individual's mixing map.
    std::size_t twins_per_test = 0;
    double twin_jitter = 0.0;
    /// Twins replay the test individual's label and nuisance paths.
    bool twins_share_paths = false;
    /// Test-span labels are kept (synthetic evaluation) unless false.
    bool label_test_span = true;
};

void validate(const SynthConfig& config);
Corpus generate_synthetic(const SynthConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Standardization

struct ScalerStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;

    [[nodiscard]] std::uint64_t fingerprint() const;
};

ScalerStats fit_scaler(const Corpus& corpus, const std::set<Split>& on_splits);
Corpus apply_scaler(const Corpus& corpus, const ScalerStats& stats);

/// Keeps only the listed feature columns, in the given order.
Corpus select_features(const Corpus& corpus, const std::vector<std::size_t>& columns);

} // namespace dwa
