#include "dwa/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "dwa/error.hpp"
#include "dwa/random.hpp"
#include "dwa/text.hpp"

namespace dwa {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(Split split) noexcept
{
    switch (split) {
    case Split::TrainG: return "TrainG";
    case Split::DevelG: return "DevelG";
    case Split::Test: return "Test";
    }
    return "?";
}

Split parse_split(std::string_view text)
{
    if (text == "TrainG") return Split::TrainG;
    if (text == "DevelG") return Split::DevelG;
    if (text == "Test") return Split::Test;
    throw Error(ErrorKind::InvalidConfig, "unknown split '" + std::string(text) + "'");
}

std::string_view to_string(Target target) noexcept
{
    return target == Target::Valence ? "valence" : "arousal";
}

Target parse_target(std::string_view text)
{
    if (text == "valence") return Target::Valence;
    if (text == "arousal") return Target::Arousal;
    throw Error(ErrorKind::InvalidConfig, "unknown target '" + std::string(text) + "'");
}

std::string_view to_string(SpanName span) noexcept
{
    switch (span) {
    case SpanName::Full: return "Full";
    case SpanName::TrainI: return "Train_I";
    case SpanName::DevelI: return "Devel_I";
    case SpanName::Test: return "Test";
    }
    return "?";
}

SpanName parse_span(std::string_view text)
{
    if (text == "Full" || text == "full") return SpanName::Full;
    if (text == "Train_I" || text == "train") return SpanName::TrainI;
    if (text == "Devel_I" || text == "devel") return SpanName::DevelI;
    if (text == "Test" || text == "test") return SpanName::Test;
    throw Error(ErrorKind::InvalidConfig, "unknown span '" + std::string(text) + "'");
}

IndexRange Individual::span(SpanName name) const
{
    if (name == SpanName::Full) {
        return {0, length()};
    }
    if (!portions) {
        throw Error(ErrorKind::InvalidSpan, "individual '" + id + "' has no personal portions");
    }
    switch (name) {
    case SpanName::TrainI: return {0, portions->train_end};
    case SpanName::DevelI: return {portions->train_end, portions->devel_end};
    default: return {portions->devel_end, length()};
    }
}

const Individual& Corpus::at(std::string_view id) const
{
    for (const auto& ind : individuals) {
        if (ind.id == id) {
            return ind;
        }
    }
    throw Error(ErrorKind::InvalidConfig, "no individual '" + std::string(id) + "'");
}

std::vector<const Individual*> Corpus::in_splits(const std::set<Split>& splits) const
{
    std::vector<const Individual*> out;
    for (const auto& ind : individuals) {
        if (splits.contains(ind.split)) {
            out.push_back(&ind);
        }
    }
    std::sort(out.begin(), out.end(), [](const Individual* a, const Individual* b) { return a->id < b->id; });
    return out;
}

namespace {

std::uint64_t hash_doubles(const double* data, std::size_t count, std::uint64_t h)
{
    return fnv1a(std::string_view(reinterpret_cast<const char*>(data), count * sizeof(double)), h);
}

std::uint64_t hash_size(std::size_t v, std::uint64_t h)
{
    const auto x = static_cast<std::uint64_t>(v);
    return fnv1a(std::string_view(reinterpret_cast<const char*>(&x), sizeof(x)), h);
}

} // namespace

std::uint64_t Corpus::fingerprint() const
{
    std::uint64_t h = fnv1a("corpus");
    h = hash_size(feature_dim, h);
    h = hash_doubles(&sample_period, 1, h);
    for (const auto& [k, v] : metadata) {
        h = fnv1a(k + "=" + v + ";", h);
    }
    for (const auto& ind : individuals) {
        h = fnv1a(ind.id, h);
        h = fnv1a(to_string(ind.split), h);
        if (ind.portions) {
            h = hash_size(ind.portions->train_end, h);
            h = hash_size(ind.portions->devel_end, h);
        }
        const Eigen::MatrixXd& v = ind.features.values;
        h = hash_size(static_cast<std::size_t>(v.rows()), h);
        h = hash_doubles(v.data(), static_cast<std::size_t>(v.size()), h);
        h = hash_doubles(ind.labels.valence.data(), ind.labels.valence.size(), h);
        h = hash_doubles(ind.labels.arousal.data(), ind.labels.arousal.size(), h);
    }
    return h;
}

void validate(const Corpus& corpus)
{
    if (corpus.feature_dim == 0) {
        throw Error(ErrorKind::InvalidDims, "feature_dim must be >= 1");
    }
    if (!(corpus.sample_period > 0.0) || !std::isfinite(corpus.sample_period)) {
        throw Error(ErrorKind::InvalidConfig, "sample_period must be positive");
    }
    std::unordered_set<std::string> ids;
    for (const auto& ind : corpus.individuals) {
        if (!ids.insert(ind.id).second) {
            throw Error(ErrorKind::InvalidConfig, "duplicate individual id '" + ind.id + "'");
        }
        const auto& f = ind.features;
        if (f.length() == 0) {
            throw Error(ErrorKind::MalformedRow, ind.id + ": empty feature series");
        }
        if (f.dim() != corpus.feature_dim) {
            throw Error(ErrorKind::DimensionMismatch, ind.id + ": expected d=" + std::to_string(corpus.feature_dim) +
                                                          ", found d=" + std::to_string(f.dim()));
        }
        if (!f.values.allFinite()) {
            throw Error(ErrorKind::NumericalFailure, ind.id + ": non-finite feature value");
        }
        if (ind.labels.valence.size() != ind.labels.arousal.size()) {
            throw Error(ErrorKind::LengthMismatch, ind.id + ": valence/arousal length differ");
        }
        if (ind.labels.length() > f.length()) {
            throw Error(ErrorKind::LengthMismatch, ind.id + ": more labels than feature rows");
        }
        for (std::size_t t = 0; t < ind.labels.length(); ++t) {
            if (!std::isfinite(ind.labels.valence[t]) || !std::isfinite(ind.labels.arousal[t])) {
                throw Error(ErrorKind::NumericalFailure, ind.id + ": non-finite label");
            }
        }
        if (ind.split == Split::Test) {
            if (!ind.portions) {
                throw Error(ErrorKind::PortionOutOfRange, ind.id + ": Test individual without portions");
            }
            const auto& p = *ind.portions;
            if (!(0 < p.train_end && p.train_end < p.devel_end && p.devel_end <= f.length())) {
                throw Error(ErrorKind::PortionOutOfRange, ind.id + ": need 0 < train_end < devel_end <= T");
            }
            if (ind.labels.length() < p.devel_end) {
                throw Error(ErrorKind::PortionOutOfRange, ind.id + ": labels do not cover [0, devel_end)");
            }
        } else if (ind.labels.length() != f.length()) {
            throw Error(ErrorKind::LengthMismatch, ind.id + ": global individuals need labels on the full series");
        }
    }
}

// ---------------------------------------------------------------------------
// CSV layout

namespace {

struct CsvTable {
    std::vector<std::vector<double>> rows;
};

std::vector<std::string> read_lines(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::MissingFile, path.string());
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(std::move(line));
    }
    while (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    return lines;
}

// Parses a CSV whose first column is a uniformly spaced timestamp.
CsvTable read_timed_csv(const fs::path& path, const std::vector<std::string>& header, std::size_t expected_rows,
                        double sample_period, double tolerance, bool dimension_checked)
{
    const auto lines = read_lines(path);
    const std::string file = path.string();
    if (lines.empty()) {
        throw MalformedRowError(file, 1, "missing header");
    }
    const auto head = split_fields(lines[0]);
    if (head.size() != header.size()) {
        if (dimension_checked && !head.empty() && head[0] == "timestamp") {
            throw Error(ErrorKind::DimensionMismatch, file + ": expected d=" + std::to_string(header.size() - 1) +
                                                          ", found d=" + std::to_string(head.size() - 1));
        }
        throw MalformedRowError(file, 1, "unexpected header");
    }
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (head[j] != header[j]) {
            throw MalformedRowError(file, 1, "expected column '" + header[j] + "'");
        }
    }
    CsvTable table;
    table.rows.reserve(lines.size() - 1);
    double previous = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        const auto fields = split_fields(lines[i]);
        if (fields.size() != header.size()) {
            if (dimension_checked && fields.size() > 1) {
                throw Error(ErrorKind::DimensionMismatch, file + ":" + std::to_string(lineno) + ": expected d=" +
                                                              std::to_string(header.size() - 1) + ", found d=" +
                                                              std::to_string(fields.size() - 1));
            }
            throw MalformedRowError(file, lineno, "expected " + std::to_string(header.size()) + " fields");
        }
        std::vector<double> row(fields.size());
        for (std::size_t j = 0; j < fields.size(); ++j) {
            if (!parse_double(fields[j], row[j])) {
                throw MalformedRowError(file, lineno, "cannot parse '" + std::string(fields[j]) + "'");
            }
        }
        const double expected = static_cast<double>(i - 1) * sample_period;
        if (!(row[0] > previous) || std::abs(row[0] - expected) > tolerance * std::max(1.0, std::abs(expected))) {
            throw MalformedRowError(file, lineno,
                                    "timestamp " + format_double(row[0]) + " != expected " + format_double(expected));
        }
        previous = row[0];
        table.rows.push_back(std::move(row));
    }
    if (table.rows.size() != expected_rows) {
        throw MalformedRowError(file, lines.size() + 1,
                                "expected " + std::to_string(expected_rows) + " data rows, found " +
                                    std::to_string(table.rows.size()));
    }
    return table;
}

void write_file(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    }
    out << content;
    if (!out) {
        throw Error(ErrorKind::IoError, "write failed: " + path.string());
    }
}

std::size_t count_data_rows(const fs::path& path)
{
    const auto lines = read_lines(path);
    return lines.empty() ? 0 : lines.size() - 1;
}

} // namespace

Corpus load_corpus(const fs::path& root, const CorpusSchema& schema)
{
    const fs::path manifest_path = root / schema.manifest_name;
    std::ifstream in(manifest_path);
    if (!in) {
        throw Error(ErrorKind::MissingFile, manifest_path.string());
    }
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::MalformedRow, manifest_path.string() + ": " + e.what());
    }

    Corpus corpus;
    try {
        corpus.feature_dim = manifest.at("feature_dim").get<std::size_t>();
        corpus.sample_period = manifest.at("sample_period").get<double>();
        if (manifest.contains("metadata")) {
            corpus.metadata = manifest.at("metadata").get<std::map<std::string, std::string>>();
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::MalformedRow, manifest_path.string() + ": " + e.what());
    }
    if (corpus.feature_dim == 0) {
        throw Error(ErrorKind::InvalidDims, manifest_path.string() + ": feature_dim must be >= 1");
    }

    std::vector<std::string> feature_header{"timestamp"};
    for (std::size_t j = 0; j < corpus.feature_dim; ++j) {
        feature_header.push_back("f" + std::to_string(j));
    }
    const std::vector<std::string> label_header{"timestamp", "valence", "arousal"};

    for (const auto& entry : manifest.at("individuals")) {
        Individual ind;
        std::string features_file;
        std::string labels_file;
        std::optional<std::size_t> labeled_rows;
        try {
            ind.id = entry.at("id").get<std::string>();
            ind.split = parse_split(entry.at("split").get<std::string>());
            features_file = entry.value("features", "features/" + ind.id + ".csv");
            labels_file = entry.value("labels", "labels/" + ind.id + ".csv");
            if (entry.contains("portions")) {
                const auto& p = entry.at("portions");
                ind.portions = Portions{p.at("train_end").get<std::size_t>(), p.at("devel_end").get<std::size_t>()};
            }
            if (entry.contains("labeled_rows")) {
                labeled_rows = entry.at("labeled_rows").get<std::size_t>();
            }
        } catch (const json::exception& e) {
            throw Error(ErrorKind::MalformedRow, manifest_path.string() + ": " + e.what());
        }

        const fs::path fpath = root / features_file;
        if (!fs::exists(fpath)) {
            throw Error(ErrorKind::MissingFile, fpath.string());
        }
        const std::size_t t_rows = count_data_rows(fpath);
        const auto ftable = read_timed_csv(fpath, feature_header, t_rows, corpus.sample_period,
                                           schema.timestamp_tolerance, true);
        if (ftable.rows.empty()) {
            throw MalformedRowError(fpath.string(), 2, "no data rows");
        }
        ind.features.individual_id = ind.id;
        ind.features.sample_period = corpus.sample_period;
        ind.features.values.resize(static_cast<Eigen::Index>(t_rows), static_cast<Eigen::Index>(corpus.feature_dim));
        for (std::size_t t = 0; t < t_rows; ++t) {
            for (std::size_t j = 0; j < corpus.feature_dim; ++j) {
                ind.features.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = ftable.rows[t][j + 1];
            }
        }

        const fs::path lpath = root / labels_file;
        if (!fs::exists(lpath)) {
            throw Error(ErrorKind::MissingFile, lpath.string());
        }
        const std::size_t expected_labels = labeled_rows.value_or(t_rows);
        if (expected_labels > t_rows) {
            throw Error(ErrorKind::PortionOutOfRange, ind.id + ": labeled_rows exceeds series length");
        }
        const auto ltable =
            read_timed_csv(lpath, label_header, expected_labels, corpus.sample_period, schema.timestamp_tolerance, false);
        ind.labels.individual_id = ind.id;
        for (const auto& row : ltable.rows) {
            ind.labels.valence.push_back(row[1]);
            ind.labels.arousal.push_back(row[2]);
        }
        corpus.individuals.push_back(std::move(ind));
    }
    validate(corpus);
    return corpus;
}

void save_corpus(const Corpus& corpus, const fs::path& root, const CorpusSchema& schema)
{
    validate(corpus);
    std::error_code ec;
    fs::create_directories(root / "features", ec);
    fs::create_directories(root / "labels", ec);
    if (ec) {
        throw Error(ErrorKind::IoError, "cannot create " + root.string() + ": " + ec.message());
    }

    json manifest;
    manifest["format"] = "dwa-corpus";
    manifest["version"] = 1;
    manifest["feature_dim"] = corpus.feature_dim;
    manifest["sample_period"] = corpus.sample_period;
    manifest["metadata"] = corpus.metadata;
    manifest["individuals"] = json::array();

    for (const auto& ind : corpus.individuals) {
        const std::string ffile = "features/" + ind.id + ".csv";
        const std::string lfile = "labels/" + ind.id + ".csv";
        json entry{{"id", ind.id}, {"split", std::string(to_string(ind.split))}, {"features", ffile}, {"labels", lfile}};
        if (ind.portions) {
            entry["portions"] = {{"train_end", ind.portions->train_end}, {"devel_end", ind.portions->devel_end}};
        }
        if (ind.labels.length() != ind.length()) {
            entry["labeled_rows"] = ind.labels.length();
        }
        manifest["individuals"].push_back(std::move(entry));

        std::string out = "timestamp";
        for (std::size_t j = 0; j < corpus.feature_dim; ++j) {
            out += ",f" + std::to_string(j);
        }
        out += '\n';
        const auto& v = ind.features.values;
        for (Eigen::Index t = 0; t < v.rows(); ++t) {
            out += format_double(static_cast<double>(t) * corpus.sample_period);
            for (Eigen::Index j = 0; j < v.cols(); ++j) {
                out += ',';
                out += format_double(v(t, j));
            }
            out += '\n';
        }
        write_file(root / ffile, out);

        out = "timestamp,valence,arousal\n";
        for (std::size_t t = 0; t < ind.labels.length(); ++t) {
            out += format_double(static_cast<double>(t) * corpus.sample_period) + ',' +
                   format_double(ind.labels.valence[t]) + ',' + format_double(ind.labels.arousal[t]) + '\n';
        }
        write_file(root / lfile, out);
    }
    write_file(root / schema.manifest_name, manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Synthetic generator

void validate(const SynthConfig& c)
{
    auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
    if (c.n_train_g == 0 || c.n_test == 0) fail("n_train_g and n_test must be >= 1");
    if (c.t_train_g == 0 || c.t_test == 0 || (c.n_devel_g > 0 && c.t_devel_g == 0)) fail("series lengths must be >= 1");
    if (c.feature_dim == 0) fail("feature_dim must be >= 1");
    if (c.n_styles == 0) fail("n_styles must be >= 1");
    if (!(c.sample_period > 0.0)) fail("sample_period must be positive");
    if (!(c.noise >= 0.0) || !(c.style_jitter >= 0.0) || !(c.twin_jitter >= 0.0) || !(c.style_offset >= 0.0)) {
        fail("noise and jitter levels must be >= 0");
    }
    if (!(c.smoothing_half_life > 0.0)) fail("smoothing_half_life must be positive");
    if (!(c.train_fraction > 0.0) || !(c.devel_fraction > 0.0) || c.train_fraction + c.devel_fraction > 1.0) {
        fail("portion fractions must be positive and sum to <= 1");
    }
    const auto train_end = static_cast<std::size_t>(std::floor(static_cast<double>(c.t_test) * c.train_fraction + 1e-9));
    const auto devel_len = static_cast<std::size_t>(std::floor(static_cast<double>(c.t_test) * c.devel_fraction + 1e-9));
    if (train_end == 0 || devel_len == 0) fail("t_test too short for the requested portions");
}

namespace {

struct MixingMap {
    Eigen::MatrixXd weights; // d x latent
    Eigen::VectorXd offset;  // d
};

// Mean-reverting walk, reflected back into [-1, 1].
std::vector<double> bounded_walk(std::size_t length, double half_life, Rng& rng)
{
    const double phi = std::pow(0.5, 1.0 / half_life);
    const double sigma = 0.5;
    const double innovation = sigma * std::sqrt(1.0 - phi * phi);
    std::vector<double> path(length);
    double x = sigma * normal01(rng);
    for (std::size_t t = 0; t < length; ++t) {
        if (t > 0) {
            x = phi * x + innovation * normal01(rng);
        }
        while (x > 1.0 || x < -1.0) {
            x = x > 1.0 ? 2.0 - x : -2.0 - x;
        }
        path[t] = x;
    }
    return path;
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng)
{
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = scale * normal01(rng);
        }
    }
    return m;
}

MixingMap perturb(const MixingMap& base, double jitter, Rng& rng)
{
    const auto latent = base.weights.cols();
    MixingMap out = base;
    if (jitter > 0.0) {
        out.weights += gaussian_matrix(base.weights.rows(), latent, jitter / std::sqrt(static_cast<double>(latent)), rng);
        out.offset += gaussian_matrix(base.offset.rows(), 1, jitter, rng);
    }
    return out;
}

struct LatentPaths {
    std::vector<std::vector<double>> channels; // [valence, arousal, nuisance...]
};

LatentPaths draw_paths(std::size_t latent, std::size_t length, double half_life, Rng& rng)
{
    LatentPaths p;
    for (std::size_t k = 0; k < latent; ++k) {
        p.channels.push_back(bounded_walk(length, half_life, rng));
    }
    return p;
}

Individual render(const std::string& id, Split split, const MixingMap& map, const LatentPaths& paths, double noise,
                  double sample_period, Rng& noise_rng)
{
    const auto d = map.weights.rows();
    const auto latent = map.weights.cols();
    const auto length = paths.channels.front().size();
    Individual ind;
    ind.id = id;
    ind.split = split;
    ind.features.individual_id = id;
    ind.features.sample_period = sample_period;
    ind.features.values.resize(static_cast<Eigen::Index>(length), d);
    Eigen::VectorXd z(latent);
    for (std::size_t t = 0; t < length; ++t) {
        for (Eigen::Index k = 0; k < latent; ++k) {
            z(k) = paths.channels[static_cast<std::size_t>(k)][t];
        }
        Eigen::VectorXd x = map.weights * z + map.offset;
        if (noise > 0.0) {
            for (Eigen::Index j = 0; j < d; ++j) {
                x(j) += noise * normal01(noise_rng);
            }
        }
        ind.features.values.row(static_cast<Eigen::Index>(t)) = x.transpose();
    }
    ind.labels.individual_id = id;
    ind.labels.valence = paths.channels[0];
    ind.labels.arousal = paths.channels[1];
    return ind;
}

std::string indexed_id(const char* prefix, std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%03zu", prefix, i);
    return buf;
}

} // namespace

Corpus generate_synthetic(const SynthConfig& config, std::uint64_t seed)
{
    validate(config);
    const auto d = static_cast<Eigen::Index>(config.feature_dim);
    const std::size_t latent = 2 + config.n_nuisance;
    const auto latent_i = static_cast<Eigen::Index>(latent);

    std::vector<MixingMap> styles;
    for (std::size_t k = 0; k < config.n_styles; ++k) {
        Rng rng = make_rng(seed, fnv1a("style:" + std::to_string(k)));
        MixingMap m;
        m.weights = gaussian_matrix(d, latent_i, 1.0 / std::sqrt(static_cast<double>(latent)), rng);
        m.offset = gaussian_matrix(d, 1, config.style_offset, rng);
        styles.push_back(std::move(m));
    }

    Corpus corpus;
    corpus.feature_dim = config.feature_dim;
    corpus.sample_period = config.sample_period;
    corpus.metadata = {{"generator", "synthetic"},
                       {"seed", std::to_string(seed)},
                       {"corpus_id", "synthetic-" + std::to_string(seed)},
                       {"feature_name", "synthetic"}};

    std::size_t ordinal = 0;
    auto make = [&](const std::string& id, Split split, std::size_t length) {
        Rng rng = make_rng(seed, fnv1a("individual:" + id));
        const MixingMap map = perturb(styles[ordinal % config.n_styles], config.style_jitter, rng);
        ++ordinal;
        const LatentPaths paths = draw_paths(latent, length, config.smoothing_half_life, rng);
        return std::make_tuple(render(id, split, map, paths, config.noise, config.sample_period, rng), map, paths);
    };

    for (std::size_t i = 0; i < config.n_train_g; ++i) {
        corpus.individuals.push_back(std::get<0>(make(indexed_id("train_g_", i), Split::TrainG, config.t_train_g)));
    }
    for (std::size_t i = 0; i < config.n_devel_g; ++i) {
        corpus.individuals.push_back(std::get<0>(make(indexed_id("devel_g_", i), Split::DevelG, config.t_devel_g)));
    }

    const auto train_end =
        static_cast<std::size_t>(std::floor(static_cast<double>(config.t_test) * config.train_fraction + 1e-9));
    const auto devel_end = train_end + static_cast<std::size_t>(std::floor(
                                           static_cast<double>(config.t_test) * config.devel_fraction + 1e-9));
    for (std::size_t i = 0; i < config.n_test; ++i) {
        const std::string id = indexed_id("test_", i);
        auto [ind, map, paths] = make(id, Split::Test, config.t_test);
        ind.portions = Portions{train_end, devel_end};
        for (std::size_t c = 0; c < config.twins_per_test; ++c) {
            const std::string twin_id = "twin_" + id + "_" + std::to_string(c);
            Rng rng = make_rng(seed, fnv1a("individual:" + twin_id));
            const MixingMap twin_map = perturb(map, config.twin_jitter, rng);
            const LatentPaths twin_paths =
                config.twins_share_paths ? paths
                                         : draw_paths(latent, config.t_train_g, config.smoothing_half_life, rng);
            // Noise-free twins reuse the exact arithmetic of the original.
            corpus.individuals.push_back(
                render(twin_id, Split::TrainG, twin_map, twin_paths, config.noise, config.sample_period, rng));
        }
        if (!config.label_test_span) {
            ind.labels.valence.resize(devel_end);
            ind.labels.arousal.resize(devel_end);
        }
        corpus.individuals.push_back(std::move(ind));
    }
    validate(corpus);
    return corpus;
}

// ---------------------------------------------------------------------------
// Standardization

std::uint64_t ScalerStats::fingerprint() const
{
    std::uint64_t h = fnv1a("scaler");
    h = hash_doubles(mean.data(), static_cast<std::size_t>(mean.size()), h);
    return hash_doubles(stddev.data(), static_cast<std::size_t>(stddev.size()), h);
}

ScalerStats fit_scaler(const Corpus& corpus, const std::set<Split>& on_splits)
{
    const auto members = corpus.in_splits(on_splits);
    if (on_splits.empty() || members.empty()) {
        throw Error(ErrorKind::EmptySplit, "no individuals in the requested splits");
    }
    const auto d = static_cast<Eigen::Index>(corpus.feature_dim);
    ScalerStats stats;
    stats.mean = Eigen::VectorXd::Zero(d);
    stats.stddev = Eigen::VectorXd::Zero(d);
    double count = 0.0;
    for (const auto* ind : members) {
        stats.mean += ind->features.values.colwise().sum().transpose();
        count += static_cast<double>(ind->features.values.rows());
    }
    stats.mean /= count;
    for (const auto* ind : members) {
        stats.stddev += (ind->features.values.rowwise() - stats.mean.transpose()).array().square().colwise().sum().matrix().transpose();
    }
    stats.stddev = (stats.stddev / count).array().sqrt().matrix();
    return stats;
}

Corpus apply_scaler(const Corpus& corpus, const ScalerStats& stats)
{
    const auto d = static_cast<Eigen::Index>(corpus.feature_dim);
    if (stats.mean.size() != d || stats.stddev.size() != d) {
        throw Error(ErrorKind::DimensionMismatch, "scaler has d=" + std::to_string(stats.mean.size()) +
                                                      ", corpus has d=" + std::to_string(d));
    }
    const Eigen::RowVectorXd scale =
        stats.stddev.unaryExpr([](double s) { return s == 0.0 ? 1.0 : s; }).transpose();
    Corpus out = corpus;
    for (auto& ind : out.individuals) {
        auto& v = ind.features.values;
        v = ((v.rowwise() - stats.mean.transpose()).array().rowwise() / scale.array()).matrix();
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(stats.fingerprint()));
    out.metadata["scaler"] = buf;
    return out;
}

Corpus select_features(const Corpus& corpus, const std::vector<std::size_t>& columns)
{
    if (columns.empty()) {
        throw Error(ErrorKind::InvalidDims, "select_features needs at least one column");
    }
    for (auto c : columns) {
        if (c >= corpus.feature_dim) {
            throw Error(ErrorKind::DimensionMismatch, "column " + std::to_string(c) + " out of range");
        }
    }
    Corpus out = corpus;
    out.feature_dim = columns.size();
    std::string names;
    for (auto c : columns) {
        names += (names.empty() ? "" : ",") + std::to_string(c);
    }
    out.metadata["feature_columns"] = names;
    for (auto& ind : out.individuals) {
        const Eigen::MatrixXd src = ind.features.values;
        ind.features.values.resize(src.rows(), static_cast<Eigen::Index>(columns.size()));
        for (std::size_t k = 0; k < columns.size(); ++k) {
            ind.features.values.col(static_cast<Eigen::Index>(k)) = src.col(static_cast<Eigen::Index>(columns[k]));
        }
    }
    return out;
}

} // namespace dwa
