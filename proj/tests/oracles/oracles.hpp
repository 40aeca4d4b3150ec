#pragma once

// Brute-force reference implementations for the test suites. Nothing here
// calls into the library's numeric code: only its data types are shared.

#include <cstdint>
#include <string>
#include <vector>

#include "dwa/augmentation.hpp"
#include "dwa/metrics.hpp"
#include "dwa/regressor.hpp"

namespace dwa::oracle {

struct OracleReport {
    std::string case_id;
    std::vector<double> main_values;
    std::vector<double> oracle_values;
    double abs_error = 0.0;
    double rel_error = 0.0;
    bool pass = false;
};

/// Compares two value lists; relative error uses max(|a|, |b|, floor).
OracleReport compare(std::string case_id, std::vector<double> main_values, std::vector<double> oracle_values,
                     double rel_tolerance, double floor);

struct RankedCandidate {
    std::size_t pool_index = 0;
    double distance = 0.0;
};

/// Every distance computed from raw frames, then a stable sort by
/// (distance, pool_index) and the first n taken.
std::vector<RankedCandidate> nearest(const AugmentationPool& pool, const Segment& target, DistanceMetric metric,
                                     std::size_t n, const std::vector<std::string>& exclude = {});

/// Distance straight from the printed formulas, in plain loops.
double distance(DistanceMetric metric, const Segment& a, const Segment& b);

/// Two-pass CCC, term by term: rho, sigma and mu separately.
double ccc(const std::vector<double>& x, const std::vector<double>& y);

/// Plain-loop gated recurrent forward pass.
std::vector<double> forward(const RegressorParams& params, const Eigen::MatrixXd& frames);

/// 1 - CCC over the batch using the oracle forward and CCC.
double loss(const RegressorParams& params, const std::vector<Segment>& batch, Target target);

/// Central finite differences of `loss` in flattened parameter order.
std::vector<double> grad(const RegressorParams& params, const std::vector<Segment>& batch, Target target, double step);

} // namespace dwa::oracle
