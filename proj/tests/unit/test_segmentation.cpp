#include <doctest.h>

#include "dwa/error.hpp"
#include "dwa/segmentation.hpp"
#include "fixtures.hpp"

using namespace dwa;

namespace {

FeatureSeries ramp(std::size_t length, std::size_t dim = 2)
{
    FeatureSeries f;
    f.individual_id = "x";
    f.values.resize(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(dim));
    for (Eigen::Index t = 0; t < f.values.rows(); ++t) {
        for (Eigen::Index j = 0; j < f.values.cols(); ++j) {
            f.values(t, j) = static_cast<double>(10 * t + j);
        }
    }
    return f;
}

LabelSeries labels_for(std::size_t length)
{
    LabelSeries l;
    l.individual_id = "x";
    for (std::size_t t = 0; t < length; ++t) {
        l.valence.push_back(static_cast<double>(t) / 100.0);
        l.arousal.push_back(-static_cast<double>(t) / 100.0);
    }
    return l;
}

// Naive window enumeration: every start s with s + winlen <= end, stepping by hop.
std::vector<std::size_t> enumerate_starts(IndexRange span, std::size_t winlen, std::size_t hop)
{
    std::vector<std::size_t> starts;
    for (std::size_t s = span.begin; s + winlen <= span.end; s += hop) {
        starts.push_back(s);
    }
    return starts;
}

} // namespace

TEST_CASE("T=5, winlen=2, hop=1 gives four windows")
{
    const auto segs = segment_series(ramp(5), nullptr, {2, 1}, {0, 5});
    REQUIRE(segs.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(segs[k].start_index == k);
        CHECK(segs[k].frames(0, 0) == static_cast<double>(10 * k));
        CHECK_FALSE(segs[k].labeled());
    }
}

TEST_CASE("remainder shorter than winlen is dropped")
{
    CHECK(segment_series(ramp(10), nullptr, {10, 5}, {0, 10}).size() == 1);
    CHECK(segment_series(ramp(3), nullptr, {5, 1}, {0, 3}).empty());
    CHECK(segment_series(ramp(13), nullptr, {4, 4}, {0, 13}).size() == 3);
}

TEST_CASE("window count matches naive enumeration for random configs")
{
    Rng rng = make_rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t length = 1 + uniform_index(rng, 60);
        const std::size_t begin = uniform_index(rng, length);
        const std::size_t end = begin + uniform_index(rng, length - begin + 1);
        const SegmentationConfig cfg{1 + uniform_index(rng, 12), 1 + uniform_index(rng, 12)};
        const auto segs = segment_series(ramp(length), nullptr, cfg, {begin, end});
        const auto starts = enumerate_starts({begin, end}, cfg.winlen, cfg.hop);
        REQUIRE(segs.size() == starts.size());
        CHECK(segs.size() == window_count(end - begin, cfg));
        for (std::size_t k = 0; k < segs.size(); ++k) {
            CHECK(segs[k].start_index == starts[k]);
            CHECK(segs[k].winlen() == cfg.winlen);
        }
    }
}

TEST_CASE("labels attach only when the window is fully labeled")
{
    const FeatureSeries f = ramp(10);
    const LabelSeries l = labels_for(6);
    const auto segs = segment_series(f, &l, {3, 1}, {0, 10});
    REQUIRE(segs.size() == 8);
    for (const auto& s : segs) {
        CHECK(s.labeled() == (s.start_index + 3 <= 6));
    }
    CHECK((*segs[2].labels)(1, 0) == doctest::Approx(0.03));
    CHECK((*segs[2].labels)(1, 1) == doctest::Approx(-0.03));
}

TEST_CASE("span outside the series is rejected")
{
    CHECK_THROWS_AS(segment_series(ramp(5), nullptr, {2, 1}, {0, 6}), Error);
    CHECK_THROWS_AS(segment_series(ramp(5), nullptr, {2, 1}, {4, 3}), Error);
    CHECK_THROWS_AS(segment_series(ramp(5), nullptr, {0, 1}, {0, 5}), Error);
}

TEST_CASE("concat_predictions averages overlaps")
{
    const auto segs = segment_series(ramp(3), nullptr, {2, 1}, {0, 3});
    REQUIRE(segs.size() == 2);
    std::vector<Eigen::VectorXd> preds{Eigen::Vector2d(1, 1), Eigen::Vector2d(3, 3)};
    const auto out = concat_predictions(segs, preds, {0, 3});
    REQUIRE(out.values.size() == 3);
    CHECK(out.values[0] == 1.0);
    CHECK(out.values[1] == 2.0);
    CHECK(out.values[2] == 3.0);
    CHECK(out.uncovered.empty());
}

TEST_CASE("concat_predictions reports uncovered timestamps")
{
    const auto segs = segment_series(ramp(7), nullptr, {3, 3}, {0, 7});
    std::vector<Eigen::VectorXd> preds(segs.size(), Eigen::VectorXd::Ones(3));
    const auto out = concat_predictions(segs, preds, {0, 7});
    CHECK(out.indices.size() == 6);
    CHECK(out.uncovered == std::vector<std::size_t>{6});
}

TEST_CASE("concat_predictions with hop == winlen inverts disjoint splitting")
{
    Rng rng = make_rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t winlen = 1 + uniform_index(rng, 6);
        const std::size_t windows = 1 + uniform_index(rng, 8);
        const std::size_t length = winlen * windows;
        const auto seq = testing::random_vector(rng, length);
        const auto segs = segment_series(ramp(length), nullptr, {winlen, winlen}, {0, length});
        std::vector<Eigen::VectorXd> pieces;
        for (const auto& s : segs) {
            pieces.push_back(Eigen::Map<const Eigen::VectorXd>(seq.data() + s.start_index, static_cast<Eigen::Index>(winlen)));
        }
        const auto out = concat_predictions(segs, pieces, {0, length});
        CHECK(out.values == seq);
    }
}

TEST_CASE("concat_predictions edge cases")
{
    CHECK(concat_predictions({}, {}, {0, 5}).values.empty());
    const auto segs = segment_series(ramp(4), nullptr, {2, 2}, {0, 4});
    std::vector<Eigen::VectorXd> one{Eigen::Vector2d(1, 1)};
    CHECK_THROWS_AS(concat_predictions(segs, one, {0, 4}), Error);
    std::vector<Eigen::VectorXd> wrong_len{Eigen::Vector3d(1, 1, 1), Eigen::Vector3d(1, 1, 1)};
    CHECK_THROWS_AS(concat_predictions(segs, wrong_len, {0, 4}), Error);
}
