#include <doctest.h>

#include <cmath>

#include "dwa/error.hpp"
#include "dwa/regressor.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dwa;

namespace {

std::vector<Segment> random_batch(Rng& rng, std::size_t count, std::size_t w, std::size_t d)
{
    std::vector<Segment> out;
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(testing::random_segment(rng, w, d, "b", i));
    }
    return out;
}

double rel_error(double a, double b)
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

} // namespace

TEST_CASE("parameter count")
{
    CHECK(RegressorParams::zeros(1, 1).parameter_count() == 11);
    CHECK(RegressorParams::zeros(3, 4).parameter_count() == 3 * (12 + 16 + 4) + 4 + 1);
    CHECK(RegressorParams::zeros(3, 4).flatten().size() == 3 * (12 + 16 + 4) + 4 + 1);
    CHECK_THROWS_AS(RegressorParams::zeros(0, 1), Error);
    CHECK_THROWS_AS(init_params(1, 0, 0), Error);
}

TEST_CASE("flatten and assign are inverse")
{
    Rng rng = make_rng(1);
    const auto p = testing::random_params(3, 2, rng);
    auto q = RegressorParams::zeros(3, 2);
    q.assign(p.flatten());
    CHECK(q.flatten() == p.flatten());
    CHECK_THROWS_AS(q.assign(Eigen::VectorXd::Zero(5)), Error);
}

TEST_CASE("initialization is deterministic in the seed")
{
    const auto a = init_params(4, 3, 77);
    const auto b = init_params(4, 3, 77);
    CHECK(a == b);
    CHECK_FALSE(a == init_params(4, 3, 78));
    CHECK(a.b_update.isZero());
    CHECK(a.head_b == 0.0);
    CHECK(a.w_update.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(4.0));
    CHECK(a.u_cand.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(3.0));
}

TEST_CASE("zero parameters predict zero")
{
    Rng rng = make_rng(2);
    const auto seg = testing::random_segment(rng, 7, 3);
    CHECK(forward(RegressorParams::zeros(3, 5), seg.frames).isZero());
}

TEST_CASE("golden forward pass")
{
    auto p = RegressorParams::zeros(1, 2);
    Eigen::VectorXd flat(27);
    for (Eigen::Index i = 0; i < 27; ++i) {
        flat(i) = 0.1 * static_cast<double>(i + 1) * (i % 2 == 0 ? 1.0 : -1.0);
    }
    p.assign(flat);
    Eigen::MatrixXd x(2, 1);
    x << 1, -1;
    const auto y = forward(p, x);
    CHECK(std::abs(y(0) - 5.3248850880426675) <= 1e-12);
    CHECK(std::abs(y(1) - 5.78977367164582) <= 1e-12);
}

TEST_CASE("forward agrees with the oracle")
{
    Rng rng = make_rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t d = 1 + uniform_index(rng, 4);
        const std::size_t h = 1 + uniform_index(rng, 6);
        const auto p = testing::random_params(d, h, rng);
        const auto seg = testing::random_segment(rng, 1 + uniform_index(rng, 12), d);
        const auto got = forward(p, seg.frames);
        const auto ref = oracle::forward(p, seg.frames);
        for (Eigen::Index t = 0; t < got.size(); ++t) {
            CHECK(std::abs(got(t) - ref[static_cast<std::size_t>(t)]) <= 1e-12);
        }
    }
}

TEST_CASE("forward is causal")
{
    Rng rng = make_rng(4);
    const auto p = testing::random_params(2, 3, rng);
    auto seg = testing::random_segment(rng, 8, 2);
    const auto before = forward(p, seg.frames);
    seg.frames.row(5) *= -3.0;
    const auto after = forward(p, seg.frames);
    CHECK(before.head(5) == after.head(5));
    CHECK(before(5) != after(5));
}

TEST_CASE("gradient matches finite differences")
{
    Rng rng = make_rng(5);
    for (int trial = 0; trial < 15; ++trial) {
        const std::size_t d = 1 + uniform_index(rng, 3);
        const std::size_t h = 1 + uniform_index(rng, 4);
        const auto p = testing::random_params(d, h, rng);
        const auto batch = random_batch(rng, 1 + uniform_index(rng, 3), 2 + uniform_index(rng, 5), d);
        const Target target = trial % 2 == 0 ? Target::Valence : Target::Arousal;
        const auto lg = loss_and_gradient(p, batch, target);
        CHECK(std::abs(lg.loss - oracle::loss(p, batch, target)) <= 1e-12);
        const auto fd = oracle::grad(p, batch, target, 1e-5);
        const auto g = lg.grad.flatten();
        REQUIRE(static_cast<std::size_t>(g.size()) == fd.size());
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            CHECK(rel_error(g(i), fd[static_cast<std::size_t>(i)]) < 1e-4);
        }
    }
}

TEST_CASE("a perfectly fitting model has zero loss and gradient")
{
    Rng rng = make_rng(6);
    const auto p = testing::random_params(2, 3, rng);
    auto batch = random_batch(rng, 3, 5, 2);
    for (auto& s : batch) {
        s.labels->col(1) = forward(p, s.frames);
    }
    const auto lg = loss_and_gradient(p, batch, Target::Arousal);
    CHECK(std::abs(lg.loss) <= 1e-12);
    CHECK(lg.grad.flatten().norm() < 1e-8);
}

TEST_CASE("constant labels give loss 1 and zero gradient")
{
    Rng rng = make_rng(7);
    const auto p = testing::random_params(2, 3, rng);
    auto batch = random_batch(rng, 2, 4, 2);
    for (auto& s : batch) {
        s.labels->col(0).setConstant(0.3);
    }
    const auto lg = loss_and_gradient(p, batch, Target::Valence);
    CHECK(lg.loss == 1.0);
    CHECK(lg.degenerate_labels);
    CHECK(lg.grad.flatten().isZero());
}

TEST_CASE("loss_and_gradient errors")
{
    Rng rng = make_rng(8);
    const auto p = testing::random_params(2, 2, rng);
    try {
        (void)loss_and_gradient(p, {}, Target::Valence);
        FAIL("expected EmptyBatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyBatch);
    }
    const std::vector<Segment> unlabeled{testing::random_segment(rng, 3, 2, "u", 0, false)};
    try {
        (void)loss_and_gradient(p, unlabeled, Target::Valence);
        FAIL("expected UnlabeledSpan");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnlabeledSpan);
    }
    const std::vector<Segment> wrong_dim{testing::random_segment(rng, 3, 3)};
    CHECK_THROWS_AS(loss_and_gradient(p, wrong_dim, Target::Valence), Error);
}

TEST_CASE("early stopping with patience 1")
{
    EarlyStopping es(1);
    CHECK_FALSE(es.observe(0, 0.5));
    CHECK_FALSE(es.observe(1, 0.9));
    CHECK(es.improved_last());
    CHECK(es.observe(2, 0.8));
    CHECK(es.best_epoch() == 1);
    CHECK(es.best_score() == 0.9);
}

TEST_CASE("early stopping keeps the first of equal scores")
{
    EarlyStopping es(3);
    CHECK_FALSE(es.observe(0, 0.2));
    CHECK_FALSE(es.observe(1, 0.2));
    CHECK_FALSE(es.observe(2, 0.2));
    CHECK(es.observe(3, 0.2));
    CHECK(es.best_epoch() == 0);
}

TEST_CASE("training decreases loss and is bit-reproducible")
{
    Rng rng = make_rng(9);
    std::vector<Segment> train_set, dev_set;
    // labels are a smooth function of the first feature
    for (std::size_t i = 0; i < 24; ++i) {
        auto s = testing::random_segment(rng, 6, 2, "t", i);
        s.labels->col(0) = (0.7 * s.frames.col(0)).array().tanh().matrix();
        (i % 4 == 0 ? dev_set : train_set).push_back(s);
    }
    TrainConfig cfg;
    cfg.learning_rate = 0.02;
    cfg.max_epochs = 30;
    cfg.patience = 30;
    cfg.batch = 4;
    cfg.seed = 3;
    const auto init = init_params(2, 4, 1);
    const auto [a, trace_a] = train(init, train_set, dev_set, cfg);
    const auto [b, trace_b] = train(init, train_set, dev_set, cfg);
    CHECK(a == b);
    CHECK(trace_a == trace_b);
    CHECK(trace_a.dev_ccc.size() == trace_a.train_loss.size() + 1);
    CHECK(trace_a.best_dev_ccc() > trace_a.dev_ccc[0]);
    CHECK(trace_a.best_dev_ccc() > 0.8);
    CHECK(concatenated_ccc(a, dev_set, Target::Valence) == trace_a.best_dev_ccc());
}

TEST_CASE("training never returns a model worse than the start on dev")
{
    Rng rng = make_rng(10);
    std::vector<Segment> train_set = random_batch(rng, 8, 4, 2);
    std::vector<Segment> dev_set = random_batch(rng, 4, 4, 2);
    TrainConfig cfg;
    cfg.max_epochs = 5;
    cfg.patience = 2;
    cfg.learning_rate = 0.05;
    const auto init = init_params(2, 3, 4);
    const auto [p, trace] = train(init, train_set, dev_set, cfg);
    CHECK(trace.best_dev_ccc() >= trace.dev_ccc[0]);
    CHECK(concatenated_ccc(p, dev_set, Target::Valence) == trace.best_dev_ccc());
}

TEST_CASE("train errors")
{
    Rng rng = make_rng(11);
    const auto init = init_params(2, 2, 0);
    const auto some = random_batch(rng, 2, 3, 2);
    try {
        (void)train(init, {}, some, {});
        FAIL("expected EmptySet");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptySet);
    }
    CHECK_THROWS_AS(train(init, some, {}, {}), Error);
    TrainConfig bad;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(train(init, some, some, bad), Error);
    bad = {};
    bad.batch = 0;
    CHECK_THROWS_AS(train(init, some, some, bad), Error);
}

TEST_CASE("checkpoint round trip is exact")
{
    Rng rng = make_rng(12);
    auto p = testing::random_params(3, 4, rng, 1.7);
    p.seed = 123456789012345ULL;
    const auto dir = testing::scratch_dir("checkpoint");
    save_params(p, dir / "m.json");
    const auto q = load_params(dir / "m.json");
    CHECK(q == p);
    CHECK(q.seed == p.seed);
    CHECK_THROWS_AS(load_params(dir / "missing.json"), Error);
}
