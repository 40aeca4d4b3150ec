#pragma once

#include <span>
#include <string_view>

#include <Eigen/Core>

#include "dwa/segmentation.hpp"

namespace dwa {

enum class DistanceMetric { CentroidL2, CentroidDP, Cosine };

inline constexpr DistanceMetric all_metrics[] = {DistanceMetric::CentroidL2, DistanceMetric::CentroidDP,
                                                 DistanceMetric::Cosine};

/// "centroid-l2", "centroid-dp", "cosine".
std::string_view to_string(DistanceMetric metric) noexcept;
DistanceMetric parse_metric(std::string_view text);

/// Mean of the winlen rows.
Eigen::VectorXd centroid(const Segment& segment);

/// Euclidean distance between the two centroids.
double centroid_l2(const Segment& a, const Segment& b);

/// Negated dot product of the centroids. A similarity turned into a
/// ranking key: it can be negative and is not a metric.
double centroid_dp(const Segment& a, const Segment& b);

/// Sum over timestamps of (1 - cos(a_j, b_j)). Each term lies in [0, 2];
/// a term with exactly one zero row is 1, with two zero rows it is 0.
double cosine_distance(const Segment& a, const Segment& b);

double distance(DistanceMetric metric, const Segment& a, const Segment& b);

/// Per-row cosine term, shared by the pool scan. Norms are the plain
/// Euclidean norms of the rows.
double cosine_term(double dot, double norm_a, double norm_b) noexcept;

// ---------------------------------------------------------------------------
// Concordance correlation coefficient

struct CccReport {
    double ccc = 0.0;
    /// Pearson correlation; 0 when a series is constant (1 for equal constants).
    double pcc = 0.0;
    /// Bias correction factor; 1 when both series are constant and equal.
    double bcf = 0.0;
    double mean_pred = 0.0;
    double mean_label = 0.0;
    double std_pred = 0.0;
    double std_label = 0.0;
    std::size_t n_points = 0;
    bool pred_constant = false;
    bool label_constant = false;

    [[nodiscard]] bool degenerate() const noexcept { return pred_constant || label_constant; }
};

/// Population-moment CCC with the degenerate rules: both constant and equal
/// gives 1, any other constant input gives 0.
CccReport ccc(std::span<const double> pred, std::span<const double> label);

/// 1 - ccc, in [0, 2].
double ccc_loss(std::span<const double> pred, std::span<const double> label);

} // namespace dwa
