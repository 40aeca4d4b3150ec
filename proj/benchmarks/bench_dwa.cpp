#include <benchmark/benchmark.h>

#include <vector>

#include "dwa/augmentation.hpp"
#include "dwa/metrics.hpp"
#include "dwa/random.hpp"
#include "dwa/regressor.hpp"

namespace {

dwa::Segment random_segment(dwa::Rng& rng, std::size_t winlen, std::size_t dim, std::size_t start)
{
    dwa::Segment s;
    s.source_id = "b" + std::to_string(start % 16);
    s.start_index = start;
    s.frames = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(winlen), static_cast<Eigen::Index>(dim),
                                            [&] { return dwa::normal01(rng); });
    s.labels = Eigen::MatrixX2d::NullaryExpr(static_cast<Eigen::Index>(winlen), 2,
                                             [&] { return dwa::uniform(rng, -1.0, 1.0); });
    return s;
}

dwa::AugmentationPool make_pool(std::size_t size, std::size_t winlen, std::size_t dim)
{
    dwa::Rng rng = dwa::make_rng(1);
    std::vector<dwa::Segment> segs;
    segs.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        segs.push_back(random_segment(rng, winlen, dim, i));
    }
    return dwa::AugmentationPool::from_segments(std::move(segs));
}

void BM_NearestScan(benchmark::State& state)
{
    const auto metric = dwa::all_metrics[state.range(0)];
    const auto size = static_cast<std::size_t>(state.range(1));
    const auto pool = make_pool(size, 10, 8);
    dwa::Rng rng = dwa::make_rng(2);
    const auto target = random_segment(rng, 10, 8, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dwa::nearest(pool, target, metric, 3));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(1));
    state.SetLabel(std::string(dwa::to_string(metric)));
}
BENCHMARK(BM_NearestScan)->ArgsProduct({{0, 1, 2}, {1000, 10000}});

void BM_LossAndGradient(benchmark::State& state)
{
    const auto hidden = static_cast<std::size_t>(state.range(0));
    dwa::Rng rng = dwa::make_rng(3);
    std::vector<dwa::Segment> batch;
    for (std::size_t i = 0; i < 16; ++i) {
        batch.push_back(random_segment(rng, 10, 8, i));
    }
    const auto params = dwa::init_params(8, hidden, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dwa::loss_and_gradient(params, batch, dwa::Target::Valence));
    }
}
BENCHMARK(BM_LossAndGradient)->Arg(4)->Arg(16)->Arg(64);

void BM_Forward(benchmark::State& state)
{
    dwa::Rng rng = dwa::make_rng(5);
    const auto seg = random_segment(rng, static_cast<std::size_t>(state.range(0)), 8, 0);
    const auto params = dwa::init_params(8, 16, 6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dwa::forward(params, seg.frames));
    }
}
BENCHMARK(BM_Forward)->Arg(10)->Arg(100);

void BM_Ccc(benchmark::State& state)
{
    dwa::Rng rng = dwa::make_rng(7);
    std::vector<double> x(static_cast<std::size_t>(state.range(0)));
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = dwa::normal01(rng);
        y[i] = dwa::normal01(rng);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(dwa::ccc(x, y));
    }
}
BENCHMARK(BM_Ccc)->Arg(500)->Arg(100000);

} // namespace
BENCHMARK_MAIN();
