#include "dwa/metrics.hpp"

#include <cmath>

#include "dwa/error.hpp"

namespace dwa {

std::string_view to_string(DistanceMetric metric) noexcept
{
    switch (metric) {
    case DistanceMetric::CentroidL2: return "centroid-l2";
    case DistanceMetric::CentroidDP: return "centroid-dp";
    case DistanceMetric::Cosine: return "cosine";
    }
    return "?";
}

DistanceMetric parse_metric(std::string_view text)
{
    if (text == "centroid-l2") return DistanceMetric::CentroidL2;
    if (text == "centroid-dp") return DistanceMetric::CentroidDP;
    if (text == "cosine") return DistanceMetric::Cosine;
    throw Error(ErrorKind::InvalidConfig, "unknown metric '" + std::string(text) + "'");
}

namespace {

void require_compatible(const Segment& a, const Segment& b)
{
    if (a.dim() != b.dim() || a.winlen() != b.winlen()) {
        throw Error(ErrorKind::DimensionMismatch, "segments differ in shape: " + std::to_string(a.winlen()) + "x" +
                                                      std::to_string(a.dim()) + " vs " + std::to_string(b.winlen()) +
                                                      "x" + std::to_string(b.dim()));
    }
}

} // namespace

Eigen::VectorXd centroid(const Segment& segment)
{
    const auto& f = segment.frames;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(f.cols());
    // row order summation keeps pool centroids bit-identical to this function
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
        for (Eigen::Index j = 0; j < f.cols(); ++j) {
            c(j) += f(r, j);
        }
    }
    return c / static_cast<double>(f.rows());
}

double centroid_l2(const Segment& a, const Segment& b)
{
    require_compatible(a, b);
    return (centroid(a) - centroid(b)).norm();
}

double centroid_dp(const Segment& a, const Segment& b)
{
    require_compatible(a, b);
    return -centroid(a).dot(centroid(b));
}

double cosine_term(double dot, double norm_a, double norm_b) noexcept
{
    const bool zero_a = norm_a == 0.0;
    const bool zero_b = norm_b == 0.0;
    if (zero_a && zero_b) {
        return 0.0;
    }
    if (zero_a || zero_b) {
        return 1.0;
    }
    return 1.0 - dot / (norm_a * norm_b);
}

double cosine_distance(const Segment& a, const Segment& b)
{
    require_compatible(a, b);
    double total = 0.0;
    for (Eigen::Index r = 0; r < a.frames.rows(); ++r) {
        const auto ra = a.frames.row(r);
        const auto rb = b.frames.row(r);
        total += cosine_term(ra.dot(rb), ra.norm(), rb.norm());
    }
    return total;
}

double distance(DistanceMetric metric, const Segment& a, const Segment& b)
{
    switch (metric) {
    case DistanceMetric::CentroidL2: return centroid_l2(a, b);
    case DistanceMetric::CentroidDP: return centroid_dp(a, b);
    case DistanceMetric::Cosine: return cosine_distance(a, b);
    }
    return 0.0;
}

CccReport ccc(std::span<const double> pred, std::span<const double> label)
{
    if (pred.size() != label.size()) {
        throw Error(ErrorKind::LengthMismatch,
                    "ccc: " + std::to_string(pred.size()) + " predictions vs " + std::to_string(label.size()) + " labels");
    }
    if (pred.empty()) {
        throw Error(ErrorKind::EmptyInput, "ccc of empty sequences");
    }
    const auto n = static_cast<double>(pred.size());
    CccReport rep;
    rep.n_points = pred.size();

    double sum_p = 0.0;
    double sum_l = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        sum_p += pred[i];
        sum_l += label[i];
    }
    rep.mean_pred = sum_p / n;
    rep.mean_label = sum_l / n;

    double var_p = 0.0;
    double var_l = 0.0;
    double cov = 0.0;
    bool const_p = true;
    bool const_l = true;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double dp = pred[i] - rep.mean_pred;
        const double dl = label[i] - rep.mean_label;
        var_p += dp * dp;
        var_l += dl * dl;
        cov += dp * dl;
        const_p = const_p && pred[i] == pred[0];
        const_l = const_l && label[i] == label[0];
    }
    var_p /= n;
    var_l /= n;
    cov /= n;
    rep.std_pred = std::sqrt(var_p);
    rep.std_label = std::sqrt(var_l);
    rep.pred_constant = const_p;
    rep.label_constant = const_l;

    const double shift = rep.mean_pred - rep.mean_label;
    if (const_p || const_l) {
        const bool agree = const_p && const_l && pred[0] == label[0];
        rep.ccc = agree ? 1.0 : 0.0;
        rep.pcc = 0.0;
        rep.bcf = agree ? 1.0 : 2.0 * rep.std_pred * rep.std_label / (var_p + var_l + shift * shift);
        if (agree) {
            rep.pcc = 1.0;
        }
        return rep;
    }
    const double denom = var_p + var_l + shift * shift;
    rep.ccc = 2.0 * cov / denom;
    rep.pcc = cov / (rep.std_pred * rep.std_label);
    rep.bcf = 2.0 * rep.std_pred * rep.std_label / denom;
    return rep;
}

double ccc_loss(std::span<const double> pred, std::span<const double> label)
{
    return 1.0 - ccc(pred, label).ccc;
}

} // namespace dwa
