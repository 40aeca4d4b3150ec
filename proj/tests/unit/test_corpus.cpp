#include <doctest.h>

#include <fstream>
#include <sstream>

#include "dwa/corpus.hpp"
#include "dwa/error.hpp"
#include "fixtures.hpp"

using namespace dwa;
namespace fs = std::filesystem;

namespace {

Individual make_individual(std::string id, Split split, Eigen::MatrixXd values, double period = 0.5)
{
    Individual ind;
    ind.id = id;
    ind.split = split;
    ind.features.individual_id = id;
    ind.features.sample_period = period;
    ind.features.values = std::move(values);
    ind.labels.individual_id = id;
    for (Eigen::Index t = 0; t < ind.features.values.rows(); ++t) {
        ind.labels.valence.push_back(0.1 * static_cast<double>(t) - 0.3);
        ind.labels.arousal.push_back(-0.05 * static_cast<double>(t) + 0.2);
    }
    return ind;
}

Corpus three_individuals()
{
    Corpus c;
    c.feature_dim = 2;
    c.sample_period = 0.5;
    c.metadata = {{"feature_name", "fixture"}};
    Eigen::MatrixXd a(6, 2);
    a << 0.1, 2, -1.5, 3.25, 1e-9, 4, 7, -0.125, 1.0 / 3.0, 5, 2, 2;
    c.individuals.push_back(make_individual("alice", Split::TrainG, a));
    c.individuals.push_back(make_individual("bob", Split::DevelG, a * 2.0));
    Individual t = make_individual("carol", Split::Test, a.array() + 1.0);
    t.portions = Portions{2, 4};
    c.individuals.push_back(t);
    return c;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

void rewrite(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

} // namespace

TEST_CASE("load_corpus reads the documented layout")
{
    const auto dir = testing::scratch_dir("corpus_layout");
    fs::create_directories(dir / "features");
    fs::create_directories(dir / "labels");
    rewrite(dir / "manifest.json", R"({
  "feature_dim": 2,
  "sample_period": 0.5,
  "individuals": [
    {"id": "g1", "split": "TrainG"},
    {"id": "t1", "split": "Test", "portions": {"train_end": 1, "devel_end": 2}}
  ]
})");
    rewrite(dir / "features/g1.csv", "timestamp,f0,f1\n0,1,2\n0.5,3,4\n1,5,6\n");
    rewrite(dir / "labels/g1.csv", "timestamp,valence,arousal\n0,0.1,0.2\n0.5,0.3,0.4\n1,-0.5,-0.6\n");
    rewrite(dir / "features/t1.csv", "timestamp,f0,f1\n0,0,0\n0.5,1,1\n1,2,2\n");
    rewrite(dir / "labels/t1.csv", "timestamp,valence,arousal\n0,0,0\n0.5,0.5,0.5\n1,1,1\n");

    const Corpus c = load_corpus(dir);
    REQUIRE(c.individuals.size() == 2);
    CHECK(c.feature_dim == 2);
    CHECK(c.at("g1").features.values(2, 1) == 6.0);
    CHECK(c.at("g1").labels.arousal[2] == -0.6);
    CHECK(c.at("t1").portions == Portions{1, 2});
    CHECK(c.at("t1").span(SpanName::Test) == IndexRange{2, 3});
}

TEST_CASE("save_corpus then load_corpus reproduces the corpus")
{
    const auto dir = testing::scratch_dir("corpus_roundtrip");
    const Corpus c = three_individuals();
    save_corpus(c, dir);
    const Corpus back = load_corpus(dir);
    CHECK(back == c);
    CHECK(back.individuals.size() == 3);
}

TEST_CASE("round trip holds for generated corpora with unlabeled test tails")
{
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        SynthConfig cfg;
        cfg.n_train_g = 2;
        cfg.n_devel_g = 1;
        cfg.n_test = 2;
        cfg.t_train_g = 37;
        cfg.t_devel_g = 23;
        cfg.t_test = 41;
        cfg.feature_dim = 3;
        cfg.sample_period = 0.1;
        cfg.label_test_span = seed != 2;
        const Corpus c = generate_synthetic(cfg, seed);
        const auto dir = testing::scratch_dir("corpus_roundtrip_synth");
        save_corpus(c, dir);
        CHECK(load_corpus(dir) == c);
    }
}

TEST_CASE("a removed label row is reported with file and line")
{
    const auto dir = testing::scratch_dir("corpus_missing_row");
    save_corpus(three_individuals(), dir);
    const fs::path labels = dir / "labels" / "alice.csv";
    std::string text = slurp(labels);
    // drop the third data row (line 4)
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        pos = text.find('\n', pos) + 1;
    }
    const std::size_t end = text.find('\n', pos) + 1;
    text.erase(pos, end - pos);
    rewrite(labels, text);

    try {
        (void)load_corpus(dir);
        FAIL("expected MalformedRow");
    } catch (const MalformedRowError& e) {
        CHECK(e.kind() == ErrorKind::MalformedRow);
        CHECK(e.file() == labels.string());
        CHECK(e.line() == 4);
    }
}

TEST_CASE("a truncated label file is reported as malformed")
{
    const auto dir = testing::scratch_dir("corpus_truncated");
    save_corpus(three_individuals(), dir);
    const fs::path labels = dir / "labels" / "bob.csv";
    std::string text = slurp(labels);
    text.erase(text.rfind('\n', text.size() - 2) + 1);
    rewrite(labels, text);
    CHECK_THROWS_AS((void)load_corpus(dir), MalformedRowError);
}

TEST_CASE("an extra feature column is a dimension mismatch")
{
    const auto dir = testing::scratch_dir("corpus_dim");
    save_corpus(three_individuals(), dir);
    const fs::path features = dir / "features" / "bob.csv";
    std::string text = slurp(features);
    std::string patched;
    std::istringstream lines(text);
    std::string line;
    bool header = true;
    while (std::getline(lines, line)) {
        patched += line + (header ? ",f2" : ",0") + "\n";
        header = false;
    }
    rewrite(features, patched);
    try {
        (void)load_corpus(dir);
        FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DimensionMismatch);
    }
}

TEST_CASE("missing files and bad portions are rejected")
{
    SUBCASE("no manifest")
    {
        const auto dir = testing::scratch_dir("corpus_empty");
        try {
            (void)load_corpus(dir);
            FAIL("expected MissingFile");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::MissingFile);
        }
    }
    SUBCASE("missing feature file")
    {
        const auto dir = testing::scratch_dir("corpus_nofeat");
        save_corpus(three_individuals(), dir);
        fs::remove(dir / "features" / "carol.csv");
        try {
            (void)load_corpus(dir);
            FAIL("expected MissingFile");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::MissingFile);
        }
    }
    SUBCASE("devel_end beyond the series")
    {
        Corpus c = three_individuals();
        c.individuals[2].portions = Portions{2, 7};
        try {
            validate(c);
            FAIL("expected PortionOutOfRange");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::PortionOutOfRange);
        }
    }
    SUBCASE("train_end zero")
    {
        Corpus c = three_individuals();
        c.individuals[2].portions = Portions{0, 3};
        CHECK_THROWS_AS(validate(c), Error);
    }
    SUBCASE("test individual without labels on Devel_I")
    {
        Corpus c = three_individuals();
        c.individuals[2].labels.valence.resize(3);
        c.individuals[2].labels.arousal.resize(3);
        CHECK_THROWS_AS(validate(c), Error);
    }
}

// ---------------------------------------------------------------------------

TEST_CASE("generate_synthetic is a pure function of config and seed")
{
    SynthConfig cfg;
    cfg.n_train_g = 3;
    cfg.n_devel_g = 1;
    cfg.n_test = 2;
    cfg.t_train_g = 50;
    cfg.t_devel_g = 40;
    cfg.t_test = 60;
    const Corpus a = generate_synthetic(cfg, 42);
    const Corpus b = generate_synthetic(cfg, 42);
    CHECK(a == b);
    CHECK(a.fingerprint() == b.fingerprint());

    const auto da = testing::scratch_dir("synth_a");
    const auto db = testing::scratch_dir("synth_b");
    save_corpus(a, da);
    save_corpus(b, db);
    for (const auto& entry : fs::recursive_directory_iterator(da)) {
        if (entry.is_regular_file()) {
            CHECK(slurp(entry.path()) == slurp(db / fs::relative(entry.path(), da)));
        }
    }
    CHECK_FALSE(generate_synthetic(cfg, 43) == a);
}

TEST_CASE("synthetic test portions follow the 1/5, 1/5, 3/5 split")
{
    SynthConfig cfg;
    cfg.n_test = 3;
    cfg.t_test = 100;
    const Corpus c = generate_synthetic(cfg, 7);
    const auto tests = c.targets();
    REQUIRE(tests.size() == 3);
    for (const auto* ind : tests) {
        CHECK(ind->portions->train_end == 20);
        CHECK(ind->portions->devel_end == 40);
        CHECK(ind->length() == 100);
    }
}

TEST_CASE("synthetic labels stay within [-1, 1]")
{
    SynthConfig cfg;
    cfg.smoothing_half_life = 2.0;
    const Corpus c = generate_synthetic(cfg, 3);
    for (const auto& ind : c.individuals) {
        for (std::size_t t = 0; t < ind.labels.length(); ++t) {
            CHECK(std::abs(ind.labels.valence[t]) <= 1.0);
            CHECK(std::abs(ind.labels.arousal[t]) <= 1.0);
        }
    }
}

TEST_CASE("noiseless twins with shared paths have identical features")
{
    SynthConfig cfg;
    cfg.noise = 0.0;
    cfg.n_test = 2;
    cfg.twins_per_test = 1;
    cfg.twin_jitter = 0.0;
    cfg.twins_share_paths = true;
    const Corpus c = generate_synthetic(cfg, 11);
    const auto& test = c.at("test_000");
    const auto& twin = c.at("twin_test_000_0");
    CHECK(twin.split == Split::TrainG);
    CHECK(twin.features.values == test.features.values);
    CHECK(twin.labels.valence == test.labels.valence);
}

TEST_CASE("invalid synthetic configs are rejected")
{
    SynthConfig cfg;
    cfg.n_test = 0;
    CHECK_THROWS_AS(generate_synthetic(cfg, 1), Error);
    cfg = {};
    cfg.t_train_g = 0;
    CHECK_THROWS_AS(generate_synthetic(cfg, 1), Error);
    cfg = {};
    cfg.noise = -1.0;
    CHECK_THROWS_AS(generate_synthetic(cfg, 1), Error);
    cfg = {};
    cfg.t_test = 3;
    CHECK_THROWS_AS(generate_synthetic(cfg, 1), Error);
}

// ---------------------------------------------------------------------------

TEST_CASE("fit_scaler uses population moments")
{
    Corpus c;
    c.feature_dim = 1;
    Eigen::MatrixXd v(2, 1);
    v << 0, 2;
    c.individuals.push_back(make_individual("a", Split::TrainG, v, 1.0));
    const ScalerStats s = fit_scaler(c, {Split::TrainG});
    CHECK(s.mean(0) == 1.0);
    CHECK(s.stddev(0) == 1.0);

    const Corpus scaled = apply_scaler(c, s);
    CHECK(scaled.individuals[0].features.values(0, 0) == -1.0);
    CHECK(scaled.individuals[0].features.values(1, 0) == 1.0);
    CHECK(scaled.individuals[0].labels == c.individuals[0].labels);
}

TEST_CASE("constant columns keep std 0 and are applied with unit scale")
{
    Corpus c;
    c.feature_dim = 2;
    Eigen::MatrixXd v(3, 2);
    v << 5, 1, 5, 2, 5, 3;
    c.individuals.push_back(make_individual("a", Split::TrainG, v, 1.0));
    const ScalerStats s = fit_scaler(c, {Split::TrainG});
    CHECK(s.stddev(0) == 0.0);
    const Corpus scaled = apply_scaler(c, s);
    CHECK(scaled.individuals[0].features.values.col(0).isZero());
}

TEST_CASE("pooled moments over two individuals equal moments of the concatenation")
{
    Rng rng = make_rng(5);
    Corpus two;
    two.feature_dim = 3;
    Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(7, 3, [&] { return normal01(rng); });
    Eigen::MatrixXd b = Eigen::MatrixXd::NullaryExpr(4, 3, [&] { return 3.0 + normal01(rng); });
    two.individuals.push_back(make_individual("a", Split::TrainG, a, 1.0));
    two.individuals.push_back(make_individual("b", Split::DevelG, b, 1.0));

    Corpus one;
    one.feature_dim = 3;
    Eigen::MatrixXd ab(11, 3);
    ab << a, b;
    one.individuals.push_back(make_individual("ab", Split::TrainG, ab, 1.0));

    const auto s2 = fit_scaler(two, {Split::TrainG, Split::DevelG});
    const auto s1 = fit_scaler(one, {Split::TrainG});
    CHECK((s2.mean - s1.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s2.stddev - s1.stddev).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("identity scaler leaves features unchanged")
{
    const Corpus c = three_individuals();
    ScalerStats id{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)};
    const Corpus scaled = apply_scaler(c, id);
    for (std::size_t i = 0; i < c.individuals.size(); ++i) {
        CHECK(scaled.individuals[i].features == c.individuals[i].features);
    }
}

TEST_CASE("standardized global split has zero mean and unit std")
{
    SynthConfig cfg;
    const Corpus c = generate_synthetic(cfg, 9);
    const auto s = fit_scaler(c, {Split::TrainG, Split::DevelG});
    const Corpus scaled = apply_scaler(c, s);
    const auto again = fit_scaler(scaled, {Split::TrainG, Split::DevelG});
    CHECK(again.mean.cwiseAbs().maxCoeff() < 1e-10);
    CHECK((again.stddev.array() - 1.0).abs().maxCoeff() < 1e-10);
}

TEST_CASE("scaler errors")
{
    const Corpus c = three_individuals();
    CHECK_THROWS_AS(fit_scaler(c, {}), Error);
    Corpus only_test = c;
    only_test.individuals.erase(only_test.individuals.begin(), only_test.individuals.begin() + 2);
    try {
        (void)fit_scaler(only_test, {Split::TrainG});
        FAIL("expected EmptySplit");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptySplit);
    }
    ScalerStats wrong{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3)};
    try {
        (void)apply_scaler(c, wrong);
        FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DimensionMismatch);
    }
}

TEST_CASE("select_features keeps the requested columns")
{
    const Corpus c = three_individuals();
    const Corpus s = select_features(c, {1});
    CHECK(s.feature_dim == 1);
    CHECK(s.individuals[0].features.values.col(0) == c.individuals[0].features.values.col(1));
    CHECK_THROWS_AS(select_features(c, {2}), Error);
}
