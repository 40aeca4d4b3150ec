#include "cli_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dwa/error.hpp"
#include "dwa/text.hpp"

namespace dwa::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
void read_if(const json& doc, const char* key, T& out)
{
    if (doc.contains(key)) {
        out = doc.at(key).get<T>();
    }
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
    }
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

SynthConfig load_synth_config(const fs::path& path)
{
    static const std::set<std::string> known{
        "n_train_g",    "n_devel_g",      "n_test",         "t_train_g",           "t_devel_g",
        "t_test",       "feature_dim",    "sample_period",  "n_styles",            "n_nuisance",
        "noise",        "style_jitter",   "style_offset",   "smoothing_half_life", "train_fraction",
        "devel_fraction", "twins_per_test", "twin_jitter",  "twins_share_paths",   "label_test_span"};
    SynthConfig c;
    try {
        const json doc = json::parse(slurp(path));
        if (!doc.is_object()) {
            throw Error(ErrorKind::InvalidConfig, "synthetic config must be a JSON object");
        }
        for (const auto& [key, value] : doc.items()) {
            if (!known.contains(key)) {
                throw Error(ErrorKind::InvalidConfig, "unknown synthetic config key '" + key + "'");
            }
        }
        read_if(doc, "n_train_g", c.n_train_g);
        read_if(doc, "n_devel_g", c.n_devel_g);
        read_if(doc, "n_test", c.n_test);
        read_if(doc, "t_train_g", c.t_train_g);
        read_if(doc, "t_devel_g", c.t_devel_g);
        read_if(doc, "t_test", c.t_test);
        read_if(doc, "feature_dim", c.feature_dim);
        read_if(doc, "sample_period", c.sample_period);
        read_if(doc, "n_styles", c.n_styles);
        read_if(doc, "n_nuisance", c.n_nuisance);
        read_if(doc, "noise", c.noise);
        read_if(doc, "style_jitter", c.style_jitter);
        read_if(doc, "style_offset", c.style_offset);
        read_if(doc, "smoothing_half_life", c.smoothing_half_life);
        read_if(doc, "train_fraction", c.train_fraction);
        read_if(doc, "devel_fraction", c.devel_fraction);
        read_if(doc, "twins_per_test", c.twins_per_test);
        read_if(doc, "twin_jitter", c.twin_jitter);
        read_if(doc, "twins_share_paths", c.twins_share_paths);
        read_if(doc, "label_test_span", c.label_test_span);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
    }
    validate(c);
    return c;
}

std::string synth_config_json(const SynthConfig& c)
{
    const json doc{{"n_train_g", c.n_train_g},
                   {"n_devel_g", c.n_devel_g},
                   {"n_test", c.n_test},
                   {"t_train_g", c.t_train_g},
                   {"t_devel_g", c.t_devel_g},
                   {"t_test", c.t_test},
                   {"feature_dim", c.feature_dim},
                   {"sample_period", c.sample_period},
                   {"n_styles", c.n_styles},
                   {"n_nuisance", c.n_nuisance},
                   {"noise", c.noise},
                   {"style_jitter", c.style_jitter},
                   {"style_offset", c.style_offset},
                   {"smoothing_half_life", c.smoothing_half_life},
                   {"train_fraction", c.train_fraction},
                   {"devel_fraction", c.devel_fraction},
                   {"twins_per_test", c.twins_per_test},
                   {"twin_jitter", c.twin_jitter},
                   {"twins_share_paths", c.twins_share_paths},
                   {"label_test_span", c.label_test_span}};
    return doc.dump(2) + "\n";
}

void write_predictions(const TimelinePrediction& timeline, const fs::path& path)
{
    std::string out = "index,prediction\n";
    for (std::size_t i = 0; i < timeline.indices.size(); ++i) {
        out += std::to_string(timeline.indices[i]) + ',' + format_double(timeline.values[i]) + '\n';
    }
    write_text(path, out);
}

TimelinePrediction read_predictions(const fs::path& path)
{
    std::istringstream in(slurp(path));
    std::string line;
    std::getline(in, line);
    if (line != "index,prediction") {
        throw MalformedRowError(path.string(), 1, "expected header 'index,prediction'");
    }
    TimelinePrediction t;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto fields = split_fields(line);
        double index = 0.0;
        double value = 0.0;
        if (fields.size() != 2 || !parse_double(fields[0], index) || !parse_double(fields[1], value) || index < 0.0) {
            throw MalformedRowError(path.string(), line_no, "expected 'index,prediction'");
        }
        t.indices.push_back(static_cast<std::size_t>(index));
        t.values.push_back(value);
    }
    return t;
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot write " + path.string());
    }
    out << text;
}

} // namespace dwa::cli
