#include "dwa/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dwa/error.hpp"
#include "dwa/random.hpp"
#include "dwa/text.hpp"

namespace dwa {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

void validate(const ExperimentConfig& c)
{
    validate(c.seg);
    validate(c.train_generic);
    validate(c.train_personal);
    if (c.dwa && c.dwa->n == 0) {
        throw Error(ErrorKind::InvalidConfig, "dwa.n must be >= 1");
    }
    if (c.hidden_dims.empty() || std::ranges::any_of(c.hidden_dims, [](std::size_t h) { return h == 0; })) {
        throw Error(ErrorKind::InvalidConfig, "hidden_dims must be a non-empty list of positive sizes");
    }
    if (c.grid.metrics.empty() != c.grid.n.empty()) {
        throw Error(ErrorKind::InvalidConfig, "grid needs both metrics and n, or neither");
    }
    if (std::ranges::any_of(c.grid.n, [](std::size_t n) { return n == 0; })) {
        throw Error(ErrorKind::InvalidConfig, "grid n values must be >= 1");
    }
    if (c.seeds.empty() || c.targets.empty()) {
        throw Error(ErrorKind::InvalidConfig, "seeds and targets must be non-empty");
    }
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, const std::string& where)
{
    if (!obj.is_object()) {
        throw Error(ErrorKind::InvalidConfig, where + " must be an object");
    }
    for (const auto& [key, _] : obj.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw Error(ErrorKind::InvalidConfig, "unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void read_if(const json& obj, const char* key, T& out)
{
    if (obj.contains(key)) {
        out = obj.at(key).get<T>();
    }
}

TrainConfig parse_train(const json& obj, const TrainConfig& defaults, const std::string& where)
{
    reject_unknown(obj,
                   {"learning_rate", "beta1", "beta2", "epsilon", "max_epochs", "patience", "batch", "seed", "target"},
                   where);
    TrainConfig c = defaults;
    read_if(obj, "learning_rate", c.learning_rate);
    read_if(obj, "beta1", c.beta1);
    read_if(obj, "beta2", c.beta2);
    read_if(obj, "epsilon", c.epsilon);
    read_if(obj, "max_epochs", c.max_epochs);
    read_if(obj, "patience", c.patience);
    read_if(obj, "batch", c.batch);
    read_if(obj, "seed", c.seed);
    if (obj.contains("target")) {
        c.target = parse_target(obj.at("target").get<std::string>());
    }
    return c;
}

json train_to_json(const TrainConfig& c)
{
    return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1},     {"beta2", c.beta2},
            {"epsilon", c.epsilon},             {"max_epochs", c.max_epochs}, {"patience", c.patience},
            {"batch", c.batch},                 {"seed", c.seed},       {"target", std::string(to_string(c.target))}};
}

DwaConfig parse_dwa(const json& obj)
{
    reject_unknown(obj, {"metric", "n", "exclude_source_ids"}, "dwa");
    DwaConfig c;
    c.metric = parse_metric(obj.at("metric").get<std::string>());
    read_if(obj, "n", c.n);
    if (obj.contains("exclude_source_ids")) {
        const auto ids = obj.at("exclude_source_ids").get<std::vector<std::string>>();
        c.exclude_source_ids = {ids.begin(), ids.end()};
    }
    return c;
}

} // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text)
{
    ExperimentConfig c;
    try {
        const json doc = json::parse(json_text);
        reject_unknown(doc,
                       {"seg", "dwa", "train_generic", "train_personal", "hidden_dims", "grid", "seeds", "targets",
                        "output_dir", "corpus_dir", "standardize", "evaluate_test", "workers"},
                       "config");
        if (doc.contains("seg")) {
            const auto& s = doc.at("seg");
            reject_unknown(s, {"winlen", "hop"}, "seg");
            read_if(s, "winlen", c.seg.winlen);
            read_if(s, "hop", c.seg.hop);
        }
        if (doc.contains("dwa") && !doc.at("dwa").is_null()) {
            c.dwa = parse_dwa(doc.at("dwa"));
        }
        if (doc.contains("train_generic")) {
            c.train_generic = parse_train(doc.at("train_generic"), c.train_generic, "train_generic");
        }
        if (doc.contains("train_personal")) {
            c.train_personal = parse_train(doc.at("train_personal"), c.train_personal, "train_personal");
        }
        read_if(doc, "hidden_dims", c.hidden_dims);
        if (doc.contains("grid")) {
            const auto& g = doc.at("grid");
            reject_unknown(g, {"metrics", "n"}, "grid");
            c.grid.metrics.clear();
            if (g.contains("metrics")) {
                for (const auto& m : g.at("metrics")) {
                    c.grid.metrics.push_back(parse_metric(m.get<std::string>()));
                }
            }
            read_if(g, "n", c.grid.n);
        }
        read_if(doc, "seeds", c.seeds);
        if (doc.contains("targets")) {
            c.targets.clear();
            for (const auto& t : doc.at("targets")) {
                c.targets.push_back(parse_target(t.get<std::string>()));
            }
        }
        if (doc.contains("output_dir")) {
            c.output_dir = doc.at("output_dir").get<std::string>();
        }
        read_if(doc, "corpus_dir", c.corpus_dir);
        read_if(doc, "standardize", c.standardize);
        read_if(doc, "evaluate_test", c.evaluate_test);
        read_if(doc, "workers", c.workers);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, e.what());
    }
    validate(c);
    return c;
}

ExperimentConfig load_experiment_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::InvalidConfig, "cannot read config " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_experiment_config(buf.str());
}

std::string to_json(const ExperimentConfig& c)
{
    json doc;
    doc["seg"] = {{"winlen", c.seg.winlen}, {"hop", c.seg.hop}};
    if (c.dwa) {
        doc["dwa"] = {{"metric", std::string(to_string(c.dwa->metric))},
                      {"n", c.dwa->n},
                      {"exclude_source_ids", std::vector<std::string>(c.dwa->exclude_source_ids.begin(),
                                                                      c.dwa->exclude_source_ids.end())}};
    } else {
        doc["dwa"] = nullptr;
    }
    doc["train_generic"] = train_to_json(c.train_generic);
    doc["train_personal"] = train_to_json(c.train_personal);
    doc["hidden_dims"] = c.hidden_dims;
    json metrics = json::array();
    for (auto m : c.grid.metrics) {
        metrics.push_back(std::string(to_string(m)));
    }
    doc["grid"] = {{"metrics", metrics}, {"n", c.grid.n}};
    doc["seeds"] = c.seeds;
    json targets = json::array();
    for (auto t : c.targets) {
        targets.push_back(std::string(to_string(t)));
    }
    doc["targets"] = targets;
    doc["output_dir"] = c.output_dir.string();
    doc["corpus_dir"] = c.corpus_dir;
    doc["standardize"] = c.standardize;
    doc["evaluate_test"] = c.evaluate_test;
    doc["workers"] = c.workers;
    return doc.dump(2);
}

std::uint64_t fingerprint(const ExperimentConfig& config)
{
    // Paths and thread counts do not change results.
    ExperimentConfig canonical = config;
    canonical.output_dir.clear();
    canonical.corpus_dir.clear();
    canonical.workers = 1;
    return fnv1a(to_json(canonical));
}

std::string hex64(std::uint64_t value)
{
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

// ---------------------------------------------------------------------------
// Protocol steps

Corpus standardize(const Corpus& corpus)
{
    return apply_scaler(corpus, fit_scaler(corpus, {Split::TrainG, Split::DevelG}));
}

namespace {

std::vector<Segment> full_segments(const std::vector<const Individual*>& members, const SegmentationConfig& seg)
{
    std::vector<Segment> out;
    for (const auto* ind : members) {
        auto segs = segment_series(ind->features, &ind->labels, seg, {0, ind->labels.length()});
        std::move(segs.begin(), segs.end(), std::back_inserter(out));
    }
    return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag)
{
    return splitmix64(seed ^ fnv1a(tag));
}

} // namespace

RegressorParams train_generic(const Corpus& corpus, const ExperimentConfig& config, Target target, std::uint64_t seed,
                              TrainTrace* trace)
{
    validate(config);
    const auto train_members = corpus.in_splits({Split::TrainG});
    auto dev_members = corpus.in_splits({Split::DevelG});
    if (train_members.empty()) {
        throw Error(ErrorKind::EmptyGlobalSplit, "no TrainG individuals");
    }
    if (dev_members.empty()) {
        dev_members = train_members;
    }
    const auto train_set = full_segments(train_members, config.seg);
    const auto dev_set = full_segments(dev_members, config.seg);
    if (train_set.empty() || dev_set.empty()) {
        throw Error(ErrorKind::EmptyGlobalSplit, "global series shorter than one window");
    }

    TrainConfig tc = config.train_generic;
    tc.target = target;
    tc.seed = mix_seed(seed, std::string("generic-train:") + std::string(to_string(target)));

    std::optional<std::pair<RegressorParams, TrainTrace>> best;
    for (const std::size_t hidden : config.hidden_dims) {
        const auto init_seed = mix_seed(seed, "generic-init:" + std::string(to_string(target)) + ":" +
                                                  std::to_string(hidden));
        auto result = train(init_params(corpus.feature_dim, hidden, init_seed), train_set, dev_set, tc);
        if (!best || result.second.best_dev_ccc() > best->second.best_dev_ccc()) {
            best = std::move(result);
        }
    }
    if (trace != nullptr) {
        *trace = best->second;
    }
    return best->first;
}

Personalized personalize(const RegressorParams& generic, const Individual& individual, const AugmentationPool* pool,
                         const ExperimentConfig& config, Target target, std::uint64_t seed)
{
    if (individual.split != Split::Test) {
        throw Error(ErrorKind::InvalidConfig, "personalization target '" + individual.id + "' is not a Test individual");
    }
    if (config.dwa && pool == nullptr) {
        throw Error(ErrorKind::MissingPool, "augmentation requested without a pool");
    }
    if (!config.dwa && pool != nullptr) {
        throw Error(ErrorKind::InvalidConfig, "pool given but augmentation is disabled");
    }
    const auto train_segments = segment_span(individual, config.seg, SpanName::TrainI);
    const auto dev_segments = segment_span(individual, config.seg, SpanName::DevelI);
    if (train_segments.empty() || dev_segments.empty()) {
        throw Error(ErrorKind::EmptyPersonalSplit, "'" + individual.id + "' has no full Train_I or Devel_I window");
    }

    Personalized out;
    std::vector<Segment> fine_tune;
    if (config.dwa) {
        DwaConfig dwa = *config.dwa;
        dwa.exclude_source_ids.insert(individual.id);
        auto augmented = augment_individual(*pool, train_segments, dwa, config.workers);
        fine_tune = augmented.combined;
        out.augmentation = std::move(augmented);
    } else {
        fine_tune = train_segments;
    }
    out.fine_tune_size = fine_tune.size();

    TrainConfig tc = config.train_personal;
    tc.target = target;
    tc.seed = mix_seed(seed, "personal:" + individual.id + ":" + std::string(to_string(target)));
    auto [params, trace] = train(generic, fine_tune, dev_segments, tc);
    out.params = std::move(params);
    out.trace = std::move(trace);
    out.devel = evaluate(out.params, individual, SpanName::DevelI, target, config.seg, fingerprint(config));
    return out;
}

TimelinePrediction predict_span(const RegressorParams& model, const Individual& individual, SpanName span,
                                const SegmentationConfig& seg)
{
    const IndexRange range = individual.span(span);
    const auto segments = segment_series(individual.features, nullptr, seg, range);
    const auto preds = predict(model, segments);
    return concat_predictions(segments, preds, range);
}

EvaluationRecord evaluate(const RegressorParams& model, const Individual& individual, SpanName span, Target target,
                          const SegmentationConfig& seg, std::uint64_t config_fingerprint)
{
    const IndexRange range = individual.span(span);
    if (!individual.labeled_on(range)) {
        throw Error(ErrorKind::UnlabeledSpan, "'" + individual.id + "' has no labels on " + std::string(to_string(span)));
    }
    const auto timeline = predict_span(model, individual, span, seg);
    if (timeline.values.empty()) {
        throw Error(ErrorKind::EmptyPersonalSplit, "'" + individual.id + "' span " + std::string(to_string(span)) +
                                                       " is shorter than one window");
    }
    const auto& labels = individual.labels.of(target);
    std::vector<double> truth;
    truth.reserve(timeline.indices.size());
    for (auto t : timeline.indices) {
        truth.push_back(labels[t]);
    }
    EvaluationRecord rec;
    rec.individual_id = individual.id;
    rec.target = target;
    rec.split = span;
    rec.ccc = ccc(timeline.values, truth);
    rec.config_fingerprint = config_fingerprint;
    return rec;
}

FusionWeights fusion_weights(double dev_ccc_a, double dev_ccc_b)
{
    const double a = std::max(dev_ccc_a, fusion_floor);
    const double b = std::max(dev_ccc_b, fusion_floor);
    // The smaller share is divided out and the larger one is its complement,
    // so the pair sums to one.
    FusionWeights w;
    if (a <= b) {
        w.w_a = a / (a + b);
        w.w_b = 1.0 - w.w_a;
    } else {
        w.w_b = b / (a + b);
        w.w_a = 1.0 - w.w_b;
    }
    w.dev_ccc_a = dev_ccc_a;
    w.dev_ccc_b = dev_ccc_b;
    return w;
}

std::vector<double> late_fuse(std::span<const double> preds_a, std::span<const double> preds_b, double dev_ccc_a,
                              double dev_ccc_b)
{
    if (preds_a.size() != preds_b.size()) {
        throw Error(ErrorKind::LengthMismatch, "fusion inputs differ in length");
    }
    const FusionWeights w = fusion_weights(dev_ccc_a, dev_ccc_b);
    std::vector<double> out(preds_a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = w.w_a * preds_a[i] + w.w_b * preds_b[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reports

std::optional<double> GridCell::combined() const
{
    if (arousal && valence) {
        return (*arousal + *valence) / 2.0;
    }
    return std::nullopt;
}

std::vector<GridCell> aggregate(const std::vector<ReportRow>& rows)
{
    // keyed in first-appearance order
    std::vector<GridCell> cells;
    std::map<std::tuple<std::string, std::size_t, std::uint64_t, int, int>, std::pair<double, std::size_t>> sums;
    auto find_cell = [&](const ReportRow& r) -> GridCell& {
        for (auto& c : cells) {
            if (c.metric == r.metric && c.n == r.n && c.seed == r.seed && c.split == r.split) {
                return c;
            }
        }
        cells.push_back(GridCell{r.metric, r.n, r.seed, r.split, std::nullopt, std::nullopt});
        return cells.back();
    };
    for (const auto& r : rows) {
        find_cell(r);
        auto& acc = sums[{r.metric, r.n, r.seed, static_cast<int>(r.split), static_cast<int>(r.target)}];
        acc.first += r.ccc.ccc;
        acc.second += 1;
    }
    for (auto& c : cells) {
        for (Target t : {Target::Arousal, Target::Valence}) {
            auto it = sums.find({c.metric, c.n, c.seed, static_cast<int>(c.split), static_cast<int>(t)});
            if (it != sums.end()) {
                const double mean = it->second.first / static_cast<double>(it->second.second);
                (t == Target::Arousal ? c.arousal : c.valence) = mean;
            }
        }
    }
    return cells;
}

std::string report_csv(const std::vector<ReportRow>& rows)
{
    std::string out = "metric,n,seed,target,split,individual_id,ccc,pcc,bcf\n";
    for (const auto& r : rows) {
        out += r.metric + ',' + std::to_string(r.n) + ',' + std::to_string(r.seed) + ',' +
               std::string(to_string(r.target)) + ',' + std::string(to_string(r.split)) + ',' + r.individual_id + ',' +
               format_double(r.ccc.ccc) + ',' + format_double(r.ccc.pcc) + ',' + format_double(r.ccc.bcf) + '\n';
    }
    return out;
}

std::string grid_csv(const std::vector<GridCell>& cells)
{
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    std::string out = "metric,n,seed,split,arousal,valence,combined\n";
    for (const auto& c : cells) {
        out += c.metric + ',' + std::to_string(c.n) + ',' + std::to_string(c.seed) + ',' +
               std::string(to_string(c.split)) + ',' + opt(c.arousal) + ',' + opt(c.valence) + ',' +
               opt(c.combined()) + '\n';
    }
    return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw Error(ErrorKind::IoError, "write failed: " + path.string());
    }
}

// Runs job(i) for i in [0, count) on up to `workers` threads. Each job
// writes only its own slot, so results do not depend on scheduling.
template <typename Job>
void run_jobs(std::size_t count, std::size_t workers, Job&& job)
{
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            job(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    {
        std::vector<std::jthread> threads;
        for (std::size_t w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        job(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

std::uint64_t params_hash(const RegressorParams& params)
{
    const Eigen::VectorXd flat = params.flatten();
    return fnv1a(std::string_view(reinterpret_cast<const char*>(flat.data()),
                                  static_cast<std::size_t>(flat.size()) * sizeof(double)));
}

json cells_to_json(const std::vector<GridCell>& cells)
{
    json arr = json::array();
    for (const auto& c : cells) {
        json cell{{"metric", c.metric}, {"n", c.n}, {"seed", c.seed}, {"split", std::string(to_string(c.split))}};
        cell["arousal"] = c.arousal ? json(*c.arousal) : json(nullptr);
        cell["valence"] = c.valence ? json(*c.valence) : json(nullptr);
        const auto comb = c.combined();
        cell["combined"] = comb ? json(*comb) : json(nullptr);
        arr.push_back(std::move(cell));
    }
    return arr;
}

} // namespace

ExperimentResult run_experiment(const Corpus& raw, const ExperimentConfig& config)
{
    validate(config);
    std::error_code ec;
    fs::create_directories(config.output_dir / "checkpoints", ec);
    if (ec) {
        throw Error(ErrorKind::IoError, "cannot create " + config.output_dir.string() + ": " + ec.message());
    }

    ExperimentResult result;
    json summary;
    summary["config_fingerprint"] = hex64(fingerprint(config));
    summary["corpus_fingerprint"] = hex64(raw.fingerprint());
    json checkpoints = json::object();

    auto flush = [&] {
        result.cells = aggregate(result.rows);
        write_text(config.output_dir / "report.csv", report_csv(result.rows));
        write_text(config.output_dir / "grid.csv", grid_csv(result.cells));
        summary["cells"] = cells_to_json(result.cells);
        summary["generic_checkpoints"] = checkpoints;
        write_text(config.output_dir / "summary.json", summary.dump(2) + "\n");
    };

    try {
        const Corpus corpus = config.standardize ? standardize(raw) : raw;
        validate(corpus);
        const auto targets = corpus.targets();
        if (targets.empty()) {
            throw Error(ErrorKind::EmptyPersonalSplit, "corpus has no Test individuals");
        }

        // Cells: the no-augmentation baseline, then the grid (or the single
        // configured augmentation when no grid is given).
        std::vector<std::optional<DwaConfig>> cells{std::nullopt};
        if (!config.grid.metrics.empty()) {
            for (auto metric : config.grid.metrics) {
                for (auto n : config.grid.n) {
                    DwaConfig d = config.dwa.value_or(DwaConfig{});
                    d.metric = metric;
                    d.n = n;
                    cells.emplace_back(std::move(d));
                }
            }
        } else if (config.dwa) {
            cells.emplace_back(config.dwa);
        }

        std::optional<AugmentationPool> pool;
        if (cells.size() > 1) {
            pool = build_pool(corpus, config.seg);
            summary["pool_fingerprint"] = hex64(pool->fingerprint());
            summary["pool_size"] = pool->size();
        }

        std::vector<SpanName> spans{SpanName::DevelI};
        if (config.evaluate_test) {
            spans.push_back(SpanName::Test);
        }
        auto score_rows = [&](const RegressorParams& model, const Individual& ind, const std::string& metric,
                              std::size_t n, std::uint64_t seed, Target target) {
            std::vector<ReportRow> rows;
            for (auto span : spans) {
                if (span == SpanName::Test &&
                    (!ind.labeled_on(ind.span(span)) || window_count(ind.span(span).size(), config.seg) == 0)) {
                    continue;
                }
                const auto rec = evaluate(model, ind, span, target, config.seg);
                rows.push_back({metric, n, seed, target, span, ind.id, rec.ccc});
            }
            return rows;
        };

        for (const auto seed : config.seeds) {
            for (const auto target : config.targets) {
                // one generic model per (target, seed), shared by every cell
                const RegressorParams generic = train_generic(corpus, config, target, seed);
                const std::string name = "generic_" + std::string(to_string(target)) + "_seed" + std::to_string(seed);
                save_params(generic, config.output_dir / "checkpoints" / (name + ".json"));
                checkpoints[name] = hex64(params_hash(generic));

                for (const auto* ind : targets) {
                    auto rows = score_rows(generic, *ind, "generic", 0, seed, target);
                    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
                }

                for (const auto& cell : cells) {
                    ExperimentConfig cell_config = config;
                    cell_config.dwa = cell;
                    const std::string metric = cell ? std::string(to_string(cell->metric)) : "none";
                    const std::size_t n = cell ? cell->n : 0;
                    std::vector<std::vector<ReportRow>> per_individual(targets.size());
                    run_jobs(targets.size(), config.workers, [&](std::size_t i) {
                        ExperimentConfig job_config = cell_config;
                        job_config.workers = 1;
                        const auto personal = personalize(generic, *targets[i], cell ? &*pool : nullptr, job_config,
                                                          target, seed);
                        per_individual[i] = score_rows(personal.params, *targets[i], metric, n, seed, target);
                    });
                    for (auto& rows : per_individual) {
                        result.rows.insert(result.rows.end(), rows.begin(), rows.end());
                    }
                }
            }
        }
    } catch (const Error& e) {
        flush();
        json failure{{"error", e.what()}, {"kind", std::string(to_string(e.kind()))}};
        write_text(config.output_dir / "failure.json", failure.dump(2) + "\n");
        throw;
    }
    flush();
    return result;
}

} // namespace dwa
