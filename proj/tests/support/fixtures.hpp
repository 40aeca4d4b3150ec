#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dwa/corpus.hpp"
#include "dwa/random.hpp"
#include "dwa/regressor.hpp"
#include "dwa/segmentation.hpp"

namespace dwa::testing {

inline Segment make_segment(const Eigen::MatrixXd& frames, std::string source = "s", std::size_t start = 0)
{
    Segment seg;
    seg.source_id = std::move(source);
    seg.start_index = start;
    seg.frames = frames;
    return seg;
}

inline Segment random_segment(Rng& rng, std::size_t winlen, std::size_t dim, std::string source = "s",
                              std::size_t start = 0, bool labeled = true)
{
    Eigen::MatrixXd frames(static_cast<Eigen::Index>(winlen), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < frames.rows(); ++i) {
        for (Eigen::Index j = 0; j < frames.cols(); ++j) {
            frames(i, j) = normal01(rng);
        }
    }
    Segment seg = make_segment(frames, std::move(source), start);
    if (labeled) {
        Eigen::MatrixX2d lab(frames.rows(), 2);
        for (Eigen::Index i = 0; i < frames.rows(); ++i) {
            lab(i, 0) = uniform(rng, -1.0, 1.0);
            lab(i, 1) = uniform(rng, -1.0, 1.0);
        }
        seg.labels = lab;
    }
    return seg;
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0)
{
    std::vector<double> v(n);
    for (auto& x : v) {
        x = scale * normal01(rng);
    }
    return v;
}

/// Randomized parameters with every block filled, including biases.
inline RegressorParams random_params(std::size_t d, std::size_t h, Rng& rng, double scale = 0.5)
{
    RegressorParams p = RegressorParams::zeros(d, h);
    Eigen::VectorXd flat(static_cast<Eigen::Index>(p.parameter_count()));
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        flat(i) = scale * normal01(rng);
    }
    p.assign(flat);
    return p;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("dwa_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace dwa::testing
