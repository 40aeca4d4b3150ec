#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "cli_io.hpp"
#include "dwa/augmentation.hpp"
#include "dwa/corpus.hpp"
#include "dwa/error.hpp"
#include "dwa/pipeline.hpp"
#include "dwa/regressor.hpp"
#include "dwa/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dwa;

namespace {

enum ExitCode { Ok = 0, Internal = 1, ConfigError = 2, DataError = 3, NumericalError = 4 };

struct Common {
    std::string corpus;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::string> metric;
    std::optional<std::size_t> n;
    std::optional<std::string> target;
    std::string individual;
};

ExperimentConfig experiment_config(const Common& c)
{
    ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_experiment_config(c.config);
    if (c.metric || c.n) {
        DwaConfig dwa = cfg.dwa.value_or(DwaConfig{});
        if (c.metric) {
            dwa.metric = parse_metric(*c.metric);
        }
        if (c.n) {
            dwa.n = *c.n;
        }
        cfg.dwa = dwa;
    }
    if (c.seed) {
        cfg.seeds = {*c.seed};
    }
    if (!c.corpus.empty()) {
        cfg.corpus_dir = c.corpus;
    }
    validate(cfg);
    return cfg;
}

Corpus prepared_corpus(const ExperimentConfig& cfg)
{
    if (cfg.corpus_dir.empty()) {
        throw Error(ErrorKind::InvalidConfig, "no corpus: pass --corpus or set corpus_dir in the config");
    }
    Corpus corpus = load_corpus(cfg.corpus_dir);
    return cfg.standardize ? standardize(corpus) : corpus;
}

Target target_of(const Common& c, const ExperimentConfig& cfg)
{
    if (c.target) {
        return parse_target(*c.target);
    }
    if (cfg.targets.size() == 1) {
        return cfg.targets.front();
    }
    throw Error(ErrorKind::InvalidConfig, "choose a target with --target {valence|arousal}");
}

std::uint64_t seed_of(const ExperimentConfig& cfg) { return cfg.seeds.front(); }

fs::path out_dir(const Common& c)
{
    if (c.out.empty()) {
        throw Error(ErrorKind::InvalidConfig, "--out is required");
    }
    fs::create_directories(c.out);
    return c.out;
}

json record_json(const EvaluationRecord& r)
{
    return {{"individual_id", r.individual_id},
            {"target", std::string(to_string(r.target))},
            {"split", std::string(to_string(r.split))},
            {"ccc", r.ccc.ccc},
            {"pcc", r.ccc.pcc},
            {"bcf", r.ccc.bcf},
            {"n_points", r.ccc.n_points},
            {"config_fingerprint", hex64(r.config_fingerprint)}};
}

json trace_json(const TrainTrace& t)
{
    return {{"train_loss", t.train_loss},
            {"dev_ccc", t.dev_ccc},
            {"best_epoch", t.best_epoch},
            {"stopped_early", t.stopped_early}};
}

// ---------------------------------------------------------------------------

int cmd_synth(const Common& c)
{
    const SynthConfig sc = c.config.empty() ? SynthConfig{} : cli::load_synth_config(c.config);
    const std::uint64_t seed = c.seed.value_or(0);
    const Corpus corpus = generate_synthetic(sc, seed);
    const fs::path dir = out_dir(c);
    save_corpus(corpus, dir);
    std::cout << "wrote " << corpus.individuals.size() << " individuals to " << dir.string()
              << " (fingerprint " << hex64(corpus.fingerprint()) << ")\n";
    return Ok;
}

int cmd_train_generic(const Common& c)
{
    const ExperimentConfig cfg = experiment_config(c);
    const Corpus corpus = prepared_corpus(cfg);
    const Target target = target_of(c, cfg);
    const std::uint64_t seed = seed_of(cfg);
    TrainTrace trace;
    const auto model = train_generic(corpus, cfg, target, seed, &trace);
    const fs::path dir = out_dir(c);
    const std::string name = "generic_" + std::string(to_string(target)) + "_seed" + std::to_string(seed);
    save_params(model, dir / (name + ".json"));
    cli::write_text(dir / (name + "_trace.json"), trace_json(trace).dump(2) + "\n");
    std::cout << "generic " << to_string(target) << " seed " << seed << ": best dev CCC "
              << format_double(trace.best_dev_ccc()) << " at epoch " << trace.best_epoch << " -> "
              << (dir / (name + ".json")).string() << "\n";
    return Ok;
}

int cmd_augment(const Common& c)
{
    ExperimentConfig cfg = experiment_config(c);
    if (!cfg.dwa) {
        cfg.dwa = DwaConfig{};
    }
    const Corpus corpus = prepared_corpus(cfg);
    const Individual& ind = corpus.at(c.individual);
    const auto pool = build_pool(corpus, cfg.seg);
    DwaConfig dwa = *cfg.dwa;
    dwa.exclude_source_ids.insert(ind.id);
    const auto train_segments = segment_span(ind, cfg.seg, SpanName::TrainI);
    const auto dataset = augment_individual(pool, train_segments, dwa, cfg.workers);
    const fs::path dir = out_dir(c);
    const fs::path report = dir / ("augmentation_" + ind.id + ".csv");
    export_augmentation_report(dataset, report);
    std::cout << "pool " << pool.size() << " segments, " << dataset.original.size() << " targets, "
              << dataset.augmentations.size() << " selections -> " << report.string() << "\n";
    return Ok;
}

int cmd_personalize(const Common& c, const std::string& generic_path)
{
    const ExperimentConfig cfg = experiment_config(c);
    const Corpus corpus = prepared_corpus(cfg);
    const Target target = target_of(c, cfg);
    const std::uint64_t seed = seed_of(cfg);
    const Individual& ind = corpus.at(c.individual);
    const auto generic = load_params(generic_path);
    std::optional<AugmentationPool> pool;
    if (cfg.dwa) {
        pool = build_pool(corpus, cfg.seg);
    }
    const auto result = personalize(generic, ind, pool ? &*pool : nullptr, cfg, target, seed);
    const fs::path dir = out_dir(c);
    const std::string name = "personal_" + ind.id + "_" + std::string(to_string(target)) + "_seed" + std::to_string(seed);
    save_params(result.params, dir / (name + ".json"));
    json summary{{"devel", record_json(result.devel)},
                 {"fine_tune_size", result.fine_tune_size},
                 {"trace", trace_json(result.trace)},
                 {"dwa", cfg.dwa ? json{{"metric", std::string(to_string(cfg.dwa->metric))}, {"n", cfg.dwa->n}}
                                 : json(nullptr)}};
    cli::write_text(dir / (name + "_summary.json"), summary.dump(2) + "\n");
    if (result.augmentation) {
        export_augmentation_report(*result.augmentation, dir / (name + "_augmentation.csv"));
    }
    std::cout << ind.id << " " << to_string(target) << ": Devel_I CCC " << format_double(result.devel.ccc.ccc)
              << " (fine-tune set " << result.fine_tune_size << " segments) -> " << (dir / (name + ".json")).string()
              << "\n";
    return Ok;
}

int cmd_evaluate(const Common& c, const std::string& model_path, const std::string& split)
{
    const ExperimentConfig cfg = experiment_config(c);
    const Corpus corpus = prepared_corpus(cfg);
    const Target target = target_of(c, cfg);
    const Individual& ind = corpus.at(c.individual);
    const SpanName span = parse_span(split);
    const auto model = load_params(model_path);
    const auto record = evaluate(model, ind, span, target, cfg.seg, fingerprint(cfg));
    const json doc = record_json(record);
    if (!c.out.empty()) {
        const fs::path dir = out_dir(c);
        const std::string stem = "eval_" + ind.id + "_" + std::string(to_string(target)) + "_" + std::string(to_string(span));
        cli::write_text(dir / (stem + ".json"), doc.dump(2) + "\n");
        cli::write_predictions(predict_span(model, ind, span, cfg.seg), dir / (stem + "_predictions.csv"));
    }
    std::cout << doc.dump() << "\n";
    return Ok;
}

int cmd_fuse(const Common& c, const std::string& a_path, const std::string& b_path, double dev_a, double dev_b)
{
    const auto a = cli::read_predictions(a_path);
    const auto b = cli::read_predictions(b_path);
    if (a.indices != b.indices) {
        throw Error(ErrorKind::LengthMismatch, "prediction files cover different timestamps");
    }
    TimelinePrediction fused;
    fused.indices = a.indices;
    fused.values = late_fuse(a.values, b.values, dev_a, dev_b);
    const auto w = fusion_weights(dev_a, dev_b);
    const fs::path dir = out_dir(c);
    cli::write_predictions(fused, dir / "fused_predictions.csv");
    json doc{{"w_a", w.w_a}, {"w_b", w.w_b}, {"dev_ccc_a", dev_a}, {"dev_ccc_b", dev_b}};

    // Score the fused stream when the predictions belong to a labeled span.
    if (!c.corpus.empty() && !c.individual.empty()) {
        const ExperimentConfig cfg = experiment_config(c);
        const Corpus corpus = load_corpus(cfg.corpus_dir);
        const Individual& ind = corpus.at(c.individual);
        const Target target = target_of(c, cfg);
        const auto& labels = ind.labels.of(target);
        std::vector<double> truth;
        for (auto t : fused.indices) {
            if (t >= labels.size()) {
                throw Error(ErrorKind::UnlabeledSpan, "fused predictions reach unlabeled timestamp " + std::to_string(t));
            }
            truth.push_back(labels[t]);
        }
        doc["fused_ccc"] = ccc(fused.values, truth).ccc;
        doc["ccc_a"] = ccc(a.values, truth).ccc;
        doc["ccc_b"] = ccc(b.values, truth).ccc;
    }
    cli::write_text(dir / "fusion.json", doc.dump(2) + "\n");
    std::cout << doc.dump() << "\n";
    return Ok;
}

int cmd_experiment(const Common& c)
{
    ExperimentConfig cfg = experiment_config(c);
    if (!c.out.empty()) {
        cfg.output_dir = c.out;
    }
    if (cfg.corpus_dir.empty()) {
        throw Error(ErrorKind::InvalidConfig, "no corpus: pass --corpus or set corpus_dir in the config");
    }
    const Corpus corpus = load_corpus(cfg.corpus_dir);
    const auto result = run_experiment(corpus, cfg);
    std::cout << grid_csv(result.cells);
    std::cout << "wrote " << (cfg.output_dir / "report.csv").string() << " (" << result.rows.size() << " rows)\n";
    return Ok;
}

int exit_code(const Error& e)
{
    switch (e.category()) {
    case ErrorCategory::Config: return ConfigError;
    case ErrorCategory::Data: return DataError;
    case ErrorCategory::Numerical: return NumericalError;
    }
    return Internal;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Distance-weighted augmentation for personalized valence/arousal regression"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--corpus", common.corpus, "corpus directory");
        sub->add_option("--config", common.config, "JSON config file");
        sub->add_option("--seed", common.seed, "random seed");
        sub->add_option("--out", common.out, "output directory");
        sub->add_option("--metric", common.metric, "centroid-l2 | centroid-dp | cosine");
        sub->add_option("--n", common.n, "augmentation samples per segment");
        sub->add_option("--target", common.target, "valence | arousal");
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    add_common(synth);

    auto* train_cmd = app.add_subcommand("train-generic", "train the generic model on the global split");
    add_common(train_cmd);

    auto* augment = app.add_subcommand("augment", "write the augmentation report of one test individual");
    add_common(augment);
    augment->add_option("--individual", common.individual, "test individual id")->required();

    std::string generic_path;
    auto* personalize_cmd = app.add_subcommand("personalize", "fine-tune the generic model for one individual");
    add_common(personalize_cmd);
    personalize_cmd->add_option("--individual", common.individual, "test individual id")->required();
    personalize_cmd->add_option("--generic", generic_path, "generic checkpoint")->required();

    std::string model_path;
    std::string split = "Devel_I";
    auto* evaluate_cmd = app.add_subcommand("evaluate", "score a checkpoint on an individual's span");
    add_common(evaluate_cmd);
    evaluate_cmd->add_option("--individual", common.individual, "individual id")->required();
    evaluate_cmd->add_option("--model", model_path, "checkpoint")->required();
    evaluate_cmd->add_option("--split", split, "Train_I | Devel_I | Test | full");

    std::string fuse_a;
    std::string fuse_b;
    double dev_a = 0.0;
    double dev_b = 0.0;
    auto* fuse = app.add_subcommand("fuse", "late-fuse two prediction files by development CCC");
    add_common(fuse);
    fuse->add_option("--a", fuse_a, "first predictions CSV")->required();
    fuse->add_option("--b", fuse_b, "second predictions CSV")->required();
    fuse->add_option("--dev-ccc-a", dev_a, "development CCC of the first model")->required();
    fuse->add_option("--dev-ccc-b", dev_b, "development CCC of the second model")->required();
    fuse->add_option("--individual", common.individual, "individual whose labels score the fused stream");

    auto* experiment = app.add_subcommand("experiment", "run the full protocol and grid");
    add_common(experiment);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Ok : ConfigError;
    }

    try {
        if (synth->parsed()) return cmd_synth(common);
        if (train_cmd->parsed()) return cmd_train_generic(common);
        if (augment->parsed()) return cmd_augment(common);
        if (personalize_cmd->parsed()) return cmd_personalize(common, generic_path);
        if (evaluate_cmd->parsed()) return cmd_evaluate(common, model_path, split);
        if (fuse->parsed()) return cmd_fuse(common, fuse_a, fuse_b, dev_a, dev_b);
        if (experiment->parsed()) return cmd_experiment(common);
    } catch (const MalformedRowError& e) {
        std::cerr << "error [" << to_string(e.kind()) << "] " << e.what() << "\n";
        return DataError;
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.kind()) << "] " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return Internal;
    }
    return Internal;
}
