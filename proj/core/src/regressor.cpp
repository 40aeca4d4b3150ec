#include "dwa/regressor.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "dwa/error.hpp"
#include "dwa/metrics.hpp"
#include "dwa/random.hpp"

namespace dwa {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

RegressorParams RegressorParams::zeros(std::size_t input_dim, std::size_t hidden_dim)
{
    if (input_dim == 0 || hidden_dim == 0) {
        throw Error(ErrorKind::InvalidDims, "input and hidden dimensions must be >= 1");
    }
    const auto d = static_cast<Index>(input_dim);
    const auto h = static_cast<Index>(hidden_dim);
    RegressorParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.w_update = p.w_reset = p.w_cand = MatrixXd::Zero(h, d);
    p.u_update = p.u_reset = p.u_cand = MatrixXd::Zero(h, h);
    p.b_update = p.b_reset = p.b_cand = VectorXd::Zero(h);
    p.head_w = VectorXd::Zero(h);
    p.head_b = 0.0;
    return p;
}

std::size_t RegressorParams::parameter_count() const noexcept
{
    const std::size_t h = hidden_dim;
    const std::size_t d = input_dim;
    return 3 * (h * d + h * h + h) + h + 1;
}

namespace {

template <typename Fn>
void for_each_block(RegressorParams& p, Fn&& fn)
{
    fn(p.w_update.data(), p.w_update.size());
    fn(p.w_reset.data(), p.w_reset.size());
    fn(p.w_cand.data(), p.w_cand.size());
    fn(p.u_update.data(), p.u_update.size());
    fn(p.u_reset.data(), p.u_reset.size());
    fn(p.u_cand.data(), p.u_cand.size());
    fn(p.b_update.data(), p.b_update.size());
    fn(p.b_reset.data(), p.b_reset.size());
    fn(p.b_cand.data(), p.b_cand.size());
    fn(p.head_w.data(), p.head_w.size());
    fn(&p.head_b, Index{1});
}

} // namespace

VectorXd RegressorParams::flatten() const
{
    VectorXd flat(static_cast<Index>(parameter_count()));
    Index offset = 0;
    for_each_block(const_cast<RegressorParams&>(*this), [&](double* data, Index n) {
        flat.segment(offset, n) = Eigen::Map<const VectorXd>(data, n);
        offset += n;
    });
    return flat;
}

void RegressorParams::assign(const VectorXd& flat)
{
    if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
        throw Error(ErrorKind::DimensionMismatch, "flat parameter vector has wrong length");
    }
    Index offset = 0;
    for_each_block(*this, [&](double* data, Index n) {
        Eigen::Map<VectorXd>(data, n) = flat.segment(offset, n);
        offset += n;
    });
}

bool RegressorParams::all_finite() const
{
    return flatten().allFinite();
}

bool RegressorParams::operator==(const RegressorParams& other) const
{
    return input_dim == other.input_dim && hidden_dim == other.hidden_dim && seed == other.seed &&
           flatten() == other.flatten();
}

RegressorParams init_params(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed)
{
    RegressorParams p = RegressorParams::zeros(input_dim, hidden_dim);
    p.seed = seed;
    Rng rng = make_rng(seed, fnv1a("gru-init"));
    auto fill = [&rng](MatrixXd& m, double fan_in) {
        const double bound = 1.0 / std::sqrt(fan_in);
        for (Index j = 0; j < m.cols(); ++j) {
            for (Index i = 0; i < m.rows(); ++i) {
                m(i, j) = uniform(rng, -bound, bound);
            }
        }
    };
    const auto d = static_cast<double>(input_dim);
    const auto h = static_cast<double>(hidden_dim);
    fill(p.w_update, d);
    fill(p.w_reset, d);
    fill(p.w_cand, d);
    fill(p.u_update, h);
    fill(p.u_reset, h);
    fill(p.u_cand, h);
    MatrixXd head(static_cast<Index>(hidden_dim), 1);
    fill(head, h);
    p.head_w = head.col(0);
    return p;
}

namespace {

double sigmoid(double x)
{
    return 1.0 / (1.0 + std::exp(-x));
}

// Activations of one sequence, one column per timestep.
struct Trace {
    MatrixXd hidden; // h x (T+1), column 0 is the zero initial state
    MatrixXd update; // h x T
    MatrixXd reset;
    MatrixXd cand;
    VectorXd output; // T
};

void check_frames(const RegressorParams& p, const MatrixXd& frames)
{
    if (static_cast<std::size_t>(frames.cols()) != p.input_dim) {
        throw Error(ErrorKind::DimensionMismatch, "frames have d=" + std::to_string(frames.cols()) +
                                                      ", model expects d=" + std::to_string(p.input_dim));
    }
}

Trace run(const RegressorParams& p, const MatrixXd& frames)
{
    check_frames(p, frames);
    const Index steps = frames.rows();
    const auto h = static_cast<Index>(p.hidden_dim);
    Trace tr;
    tr.hidden = MatrixXd::Zero(h, steps + 1);
    tr.update.resize(h, steps);
    tr.reset.resize(h, steps);
    tr.cand.resize(h, steps);
    tr.output.resize(steps);

    const MatrixXd in_update = (p.w_update * frames.transpose()).colwise() + p.b_update;
    const MatrixXd in_reset = (p.w_reset * frames.transpose()).colwise() + p.b_reset;
    const MatrixXd in_cand = (p.w_cand * frames.transpose()).colwise() + p.b_cand;

    for (Index t = 0; t < steps; ++t) {
        const VectorXd prev = tr.hidden.col(t);
        const VectorXd z = (in_update.col(t) + p.u_update * prev).unaryExpr(&sigmoid);
        const VectorXd r = (in_reset.col(t) + p.u_reset * prev).unaryExpr(&sigmoid);
        const VectorXd gated = r.cwiseProduct(prev);
        const VectorXd c = (in_cand.col(t) + p.u_cand * gated).array().tanh().matrix();
        tr.hidden.col(t + 1) = (VectorXd::Ones(h) - z).cwiseProduct(c) + z.cwiseProduct(prev);
        tr.update.col(t) = z;
        tr.reset.col(t) = r;
        tr.cand.col(t) = c;
        tr.output(t) = p.head_w.dot(tr.hidden.col(t + 1)) + p.head_b;
    }
    return tr;
}

// Accumulates into `grad` the gradient of sum_t out_grad(t) * y_t.
void backward(const RegressorParams& p, const MatrixXd& frames, const Trace& tr, const VectorXd& out_grad,
              RegressorParams& grad)
{
    const Index steps = frames.rows();
    const auto h = static_cast<Index>(p.hidden_dim);
    MatrixXd d_update(h, steps);
    MatrixXd d_reset(h, steps);
    MatrixXd d_cand(h, steps);
    MatrixXd gated_prev(h, steps);
    VectorXd carry = VectorXd::Zero(h);

    for (Index t = steps - 1; t >= 0; --t) {
        const auto prev = tr.hidden.col(t);
        const auto z = tr.update.col(t);
        const auto r = tr.reset.col(t);
        const auto c = tr.cand.col(t);
        const double g = out_grad(t);

        grad.head_w += g * tr.hidden.col(t + 1);
        grad.head_b += g;
        const VectorXd dh = carry + g * p.head_w;

        const VectorXd dc = dh.cwiseProduct(VectorXd::Ones(h) - z);
        const VectorXd dz = dh.cwiseProduct(prev - c);
        VectorXd dprev = dh.cwiseProduct(z);

        const VectorXd da_cand = dc.array() * (1.0 - c.array().square());
        const VectorXd d_gated = p.u_cand.transpose() * da_cand;
        const VectorXd dr = d_gated.cwiseProduct(prev);
        dprev += d_gated.cwiseProduct(r);

        const VectorXd da_update = dz.array() * z.array() * (1.0 - z.array());
        const VectorXd da_reset = dr.array() * r.array() * (1.0 - r.array());
        dprev += p.u_update.transpose() * da_update;
        dprev += p.u_reset.transpose() * da_reset;

        d_update.col(t) = da_update;
        d_reset.col(t) = da_reset;
        d_cand.col(t) = da_cand;
        gated_prev.col(t) = r.cwiseProduct(prev);
        carry = dprev;
    }

    const auto prevs = tr.hidden.leftCols(steps);
    grad.w_update += d_update * frames;
    grad.w_reset += d_reset * frames;
    grad.w_cand += d_cand * frames;
    grad.u_update += d_update * prevs.transpose();
    grad.u_reset += d_reset * prevs.transpose();
    grad.u_cand += d_cand * gated_prev.transpose();
    grad.b_update += d_update.rowwise().sum();
    grad.b_reset += d_reset.rowwise().sum();
    grad.b_cand += d_cand.rowwise().sum();
}

void require_labeled(std::span<const Segment> batch)
{
    if (batch.empty()) {
        throw Error(ErrorKind::EmptyBatch, "empty batch");
    }
    for (const auto& seg : batch) {
        if (!seg.labeled()) {
            throw Error(ErrorKind::UnlabeledSpan, "segment of '" + seg.source_id + "' at " +
                                                      std::to_string(seg.start_index) + " has no labels");
        }
    }
}

std::vector<double> concat_labels(std::span<const Segment> batch, Target target)
{
    std::vector<double> out;
    for (const auto& seg : batch) {
        const VectorXd lab = seg.target_labels(target);
        out.insert(out.end(), lab.data(), lab.data() + lab.size());
    }
    return out;
}

} // namespace

VectorXd forward(const RegressorParams& params, const MatrixXd& frames)
{
    return run(params, frames).output;
}

std::vector<VectorXd> predict(const RegressorParams& params, std::span<const Segment> segments)
{
    std::vector<VectorXd> out;
    out.reserve(segments.size());
    for (const auto& seg : segments) {
        out.push_back(forward(params, seg.frames));
    }
    return out;
}

LossGradient loss_and_gradient(const RegressorParams& params, std::span<const Segment> batch, Target target)
{
    require_labeled(batch);
    std::vector<Trace> traces;
    traces.reserve(batch.size());
    std::vector<double> preds;
    for (const auto& seg : batch) {
        traces.push_back(run(params, seg.frames));
        const auto& y = traces.back().output;
        preds.insert(preds.end(), y.data(), y.data() + y.size());
    }
    const std::vector<double> labels = concat_labels(batch, target);
    const CccReport rep = ccc(preds, labels);

    LossGradient out;
    out.loss = 1.0 - rep.ccc;
    out.grad = RegressorParams::zeros(params.input_dim, params.hidden_dim);
    out.grad.seed = params.seed;
    if (rep.label_constant) {
        out.degenerate_labels = true;
        return out;
    }

    // d(1 - ccc)/dp_i with ccc = 2 cov / (var_p + var_l + (mu_p - mu_l)^2)
    const auto n = static_cast<double>(preds.size());
    double cov = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        cov += (preds[i] - rep.mean_pred) * (labels[i] - rep.mean_label);
    }
    cov /= n;
    const double shift = rep.mean_pred - rep.mean_label;
    const double denom = rep.std_pred * rep.std_pred + rep.std_label * rep.std_label + shift * shift;
    const double numer = 2.0 * cov;

    std::size_t offset = 0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const Index steps = batch[k].frames.rows();
        VectorXd out_grad(steps);
        for (Index t = 0; t < steps; ++t) {
            const std::size_t i = offset + static_cast<std::size_t>(t);
            const double d_numer = 2.0 * (labels[i] - rep.mean_label) / n;
            const double d_denom = 2.0 * (preds[i] - rep.mean_pred) / n + 2.0 * shift / n;
            const double d_ccc = (d_numer * denom - numer * d_denom) / (denom * denom);
            out_grad(t) = -d_ccc;
        }
        backward(params, batch[k].frames, traces[k], out_grad, out.grad);
        offset += static_cast<std::size_t>(steps);
    }
    return out;
}

double batch_loss(const RegressorParams& params, std::span<const Segment> batch, Target target)
{
    require_labeled(batch);
    std::vector<double> preds;
    for (const auto& seg : batch) {
        const VectorXd y = forward(params, seg.frames);
        preds.insert(preds.end(), y.data(), y.data() + y.size());
    }
    return ccc_loss(preds, concat_labels(batch, target));
}

double concatenated_ccc(const RegressorParams& params, std::span<const Segment> segments, Target target)
{
    return 1.0 - batch_loss(params, segments, target);
}

void validate(const TrainConfig& c)
{
    if (!(c.learning_rate > 0.0) || c.max_epochs == 0 || c.patience == 0 || c.batch == 0) {
        throw Error(ErrorKind::InvalidConfig, "learning_rate, max_epochs, patience and batch must be positive");
    }
    if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0) || !(c.epsilon > 0.0)) {
        throw Error(ErrorKind::InvalidConfig, "invalid moment decay or epsilon");
    }
}

bool EarlyStopping::observe(std::size_t epoch, double score)
{
    improved_last_ = score > best_score_;
    if (improved_last_) {
        best_score_ = score;
        best_epoch_ = epoch;
        since_best_ = 0;
        return false;
    }
    ++since_best_;
    return since_best_ >= patience_;
}

std::pair<RegressorParams, TrainTrace> train(const RegressorParams& initial, std::span<const Segment> train_set,
                                             std::span<const Segment> dev_set, const TrainConfig& config)
{
    validate(config);
    if (train_set.empty() || dev_set.empty()) {
        throw Error(ErrorKind::EmptySet, "training and development sets must be non-empty");
    }
    require_labeled(train_set);
    require_labeled(dev_set);

    RegressorParams params = initial;
    RegressorParams best = initial;
    TrainTrace trace;
    EarlyStopping stopper(config.patience);
    stopper.observe(0, concatenated_ccc(params, dev_set, config.target));
    trace.dev_ccc.push_back(stopper.best_score());

    VectorXd theta = params.flatten();
    VectorXd m = VectorXd::Zero(theta.size());
    VectorXd v = VectorXd::Zero(theta.size());
    std::uint64_t step = 0;

    Rng rng = make_rng(config.seed, fnv1a("train-shuffle"));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Segment> batch;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        shuffle(std::span<std::size_t>(order), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch) {
            const std::size_t end = std::min(order.size(), begin + config.batch);
            batch.clear();
            for (std::size_t i = begin; i < end; ++i) {
                batch.push_back(train_set[order[i]]);
            }
            const LossGradient lg = loss_and_gradient(params, batch, config.target);
            loss_sum += lg.loss;
            ++batches;
            if (lg.degenerate_labels) {
                continue;
            }
            const VectorXd g = lg.grad.flatten();
            ++step;
            m = config.beta1 * m + (1.0 - config.beta1) * g;
            v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
            const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            theta.array() -= config.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config.epsilon);
            params.assign(theta);
        }
        if (!theta.allFinite()) {
            throw Error(ErrorKind::NumericalFailure, "parameters diverged at epoch " + std::to_string(epoch));
        }
        trace.train_loss.push_back(loss_sum / static_cast<double>(batches));
        const double score = concatenated_ccc(params, dev_set, config.target);
        trace.dev_ccc.push_back(score);
        const bool stop = stopper.observe(epoch, score);
        if (stopper.improved_last()) {
            best = params;
        }
        if (stop) {
            trace.stopped_early = true;
            break;
        }
    }
    trace.best_epoch = stopper.best_epoch();
    return {best, trace};
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

using json = nlohmann::json;

json matrix_to_json(const MatrixXd& m)
{
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

MatrixXd matrix_from_json(const json& rows, Index expect_rows, Index expect_cols, const char* name)
{
    if (!rows.is_array() || static_cast<Index>(rows.size()) != expect_rows) {
        throw Error(ErrorKind::DimensionMismatch, std::string("checkpoint field '") + name + "' has wrong shape");
    }
    MatrixXd m(expect_rows, expect_cols);
    for (Index i = 0; i < expect_rows; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != expect_cols) {
            throw Error(ErrorKind::DimensionMismatch, std::string("checkpoint field '") + name + "' has wrong shape");
        }
        for (Index j = 0; j < expect_cols; ++j) {
            m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
        }
    }
    return m;
}

json vector_to_json(const VectorXd& v)
{
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

VectorXd vector_from_json(const json& arr, Index expect, const char* name)
{
    const auto values = arr.get<std::vector<double>>();
    if (static_cast<Index>(values.size()) != expect) {
        throw Error(ErrorKind::DimensionMismatch, std::string("checkpoint field '") + name + "' has wrong length");
    }
    return Eigen::Map<const VectorXd>(values.data(), expect);
}

} // namespace

void save_params(const RegressorParams& p, const std::filesystem::path& path)
{
    json doc;
    doc["format"] = "dwa-gru";
    doc["version"] = 1;
    doc["input_dim"] = p.input_dim;
    doc["hidden_dim"] = p.hidden_dim;
    doc["seed"] = p.seed;
    doc["w_update"] = matrix_to_json(p.w_update);
    doc["w_reset"] = matrix_to_json(p.w_reset);
    doc["w_cand"] = matrix_to_json(p.w_cand);
    doc["u_update"] = matrix_to_json(p.u_update);
    doc["u_reset"] = matrix_to_json(p.u_reset);
    doc["u_cand"] = matrix_to_json(p.u_cand);
    doc["b_update"] = vector_to_json(p.b_update);
    doc["b_reset"] = vector_to_json(p.b_reset);
    doc["b_cand"] = vector_to_json(p.b_cand);
    doc["head_w"] = vector_to_json(p.head_w);
    doc["head_b"] = p.head_b;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    }
    out << doc.dump(1) << '\n';
    if (!out) {
        throw Error(ErrorKind::IoError, "write failed: " + path.string());
    }
}

RegressorParams load_params(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::MissingFile, path.string());
    }
    try {
        const json doc = json::parse(in);
        if (doc.at("format").get<std::string>() != "dwa-gru" || doc.at("version").get<int>() != 1) {
            throw Error(ErrorKind::MalformedRow, path.string() + ": not a version-1 dwa-gru checkpoint");
        }
        RegressorParams p =
            RegressorParams::zeros(doc.at("input_dim").get<std::size_t>(), doc.at("hidden_dim").get<std::size_t>());
        p.seed = doc.at("seed").get<std::uint64_t>();
        const auto d = static_cast<Index>(p.input_dim);
        const auto h = static_cast<Index>(p.hidden_dim);
        p.w_update = matrix_from_json(doc.at("w_update"), h, d, "w_update");
        p.w_reset = matrix_from_json(doc.at("w_reset"), h, d, "w_reset");
        p.w_cand = matrix_from_json(doc.at("w_cand"), h, d, "w_cand");
        p.u_update = matrix_from_json(doc.at("u_update"), h, h, "u_update");
        p.u_reset = matrix_from_json(doc.at("u_reset"), h, h, "u_reset");
        p.u_cand = matrix_from_json(doc.at("u_cand"), h, h, "u_cand");
        p.b_update = vector_from_json(doc.at("b_update"), h, "b_update");
        p.b_reset = vector_from_json(doc.at("b_reset"), h, "b_reset");
        p.b_cand = vector_from_json(doc.at("b_cand"), h, "b_cand");
        p.head_w = vector_from_json(doc.at("head_w"), h, "head_w");
        p.head_b = doc.at("head_b").get<double>();
        if (!p.all_finite()) {
            throw Error(ErrorKind::NumericalFailure, path.string() + ": non-finite weight");
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedRow, path.string() + ": " + e.what());
    }
}

} // namespace dwa
