#include "pheno/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "pheno/common.hpp"
#include "pheno/csv.hpp"
#include "pheno/kv.hpp"

namespace pheno::ae {

namespace {

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& x, std::span<const std::size_t> idx) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(idx[j]));
    return out;
}

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::kLayer1: return "layer1";
        case Phase::kLayer2: return "layer2";
        case Phase::kFineTune: return "finetune";
    }
    return "";
}

struct Split {
    Eigen::MatrixXd train;  // D x N
    Eigen::MatrixXd validation;
};

// Same seed -> same split for every phase.
Split split_validation(const Eigen::MatrixXd& patches, const TrainConfig& cfg) {
    const auto n = static_cast<std::size_t>(patches.rows());
    if (n == 0) throw PreconditionError("autoencoder: no training patches");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(stage_seed(cfg.seed, "ae.validation"));
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(n)));
    if (n_val >= n) n_val = n - 1;
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());

    const Eigen::MatrixXd cols = patches.transpose();
    Split s;
    s.validation = gather_columns(cols, std::span<const std::size_t>(idx.data(), n_val));
    s.train = gather_columns(cols, std::span<const std::size_t>(idx.data() + n_val, n - n_val));
    return s;
}

void add_l2(LayerGrad& g, const DenseLayer& l, double l2) {
    if (l2 != 0.0) g.W += 2.0 * l2 * l.W;
}

double l2_term(const DenseLayer& l, double l2) { return l2 == 0.0 ? 0.0 : l2 * l.W.squaredNorm(); }

Eigen::MatrixXd sign_of(const Eigen::MatrixXd& h) {
    return h.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

// Runs mini-batch SGD on the trainable layers of `model` for `phase`.
TrainReport run_sgd(StackedAutoencoder& model, Phase phase, const Split& data, const TrainConfig& cfg,
                    bool keep_best) {
    TrainReport report;
    report.n_train = static_cast<std::size_t>(data.train.cols());
    report.n_validation = static_cast<std::size_t>(data.validation.cols());
    const auto trainable = trainable_layers(phase);

    auto evaluate = [&](const Eigen::MatrixXd& x) {
        return x.cols() == 0 ? std::numeric_limits<double>::quiet_NaN() : phase_objective(model, phase, x, cfg);
    };
    report.train_loss.push_back(evaluate(data.train));
    report.validation_loss.push_back(evaluate(data.validation));

    StackedAutoencoder best = model;
    double best_loss = report.train_loss.front();

    std::vector<std::size_t> order(report.n_train);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(stage_seed(cfg.seed, std::string("ae.sgd.") + phase_name(phase)));
    Gradients grad;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, order.size() - start);
            const Eigen::MatrixXd batch =
                gather_columns(data.train, std::span<const std::size_t>(order.data() + start, len));
            phase_objective(model, phase, batch, cfg, &grad);
            for (auto id : trainable) {
                auto& l = layer(model, id);
                l.W -= cfg.learning_rate * grad[static_cast<std::size_t>(id)].W;
                l.b -= cfg.learning_rate * grad[static_cast<std::size_t>(id)].b;
            }
        }
        const double loss = evaluate(data.train);
        if (!std::isfinite(loss)) {
            throw NumericalError(std::string("autoencoder ") + phase_name(phase) + " training diverged at epoch " +
                                 std::to_string(epoch) + "; try a smaller learning_rate");
        }
        report.train_loss.push_back(loss);
        report.validation_loss.push_back(evaluate(data.validation));
        if (loss < best_loss) {
            best_loss = loss;
            report.best_epoch = epoch;
            if (keep_best) best = model;
        }
    }
    if (keep_best) {
        model = std::move(best);
    } else {
        report.best_epoch = cfg.epochs;
    }
    return report;
}

void check_patches(const Eigen::MatrixXd& patches, std::size_t input_dim) {
    if (patches.rows() == 0) throw PreconditionError("autoencoder: no training patches");
    if (static_cast<std::size_t>(patches.cols()) != input_dim) {
        throw PreconditionError("autoencoder: patch width " + std::to_string(patches.cols()) +
                                " does not match network input " + std::to_string(input_dim));
    }
    if (!patches.allFinite()) throw PreconditionError("autoencoder: non-finite patch entries");
}

std::string hex(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

double unhex(const std::string& s, const std::filesystem::path& path) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw SchemaError("bad number '" + s + "' in " + path.string());
    return v;
}

const char* activation_name(Activation a) { return a == Activation::kSigmoid ? "sigmoid" : "linear"; }

}  // namespace

Eigen::MatrixXd DenseLayer::forward(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd z = W * x;
    z.colwise() += b;
    return activation == Activation::kSigmoid ? sigmoid(z) : z;
}

DenseLayer DenseLayer::init(std::size_t out, std::size_t in, Activation act, std::uint64_t seed) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer l;
    l.W.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index i = 0; i < l.W.rows(); ++i) {
        for (Eigen::Index j = 0; j < l.W.cols(); ++j) l.W(i, j) = dist(rng);
    }
    l.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
    l.activation = act;
    return l;
}

void validate(const TrainConfig& cfg) {
    if (cfg.l1_activity < 0.0 || cfg.l2_weight < 0.0) throw ParameterError("autoencoder penalties must be >= 0");
    if (!(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0)) {
        throw ParameterError("validation_fraction must be in [0, 1)");
    }
    if (cfg.batch_size == 0) throw ParameterError("batch_size must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw ParameterError("learning_rate must be > 0");
}

StackedAutoencoder make_autoencoder(std::size_t input_dim, const TrainConfig& cfg, std::size_t hidden) {
    if (input_dim == 0 || hidden == 0) throw ParameterError("autoencoder dimensions must be >= 1");
    StackedAutoencoder m;
    m.encode1 = DenseLayer::init(hidden, input_dim, Activation::kSigmoid, stage_seed(cfg.seed, "ae.init.encode1"));
    m.decode1 = DenseLayer::init(input_dim, hidden, Activation::kLinear, stage_seed(cfg.seed, "ae.init.decode1"));
    m.encode2 = DenseLayer::init(hidden, hidden, Activation::kSigmoid, stage_seed(cfg.seed, "ae.init.encode2"));
    m.decode2 = DenseLayer::init(input_dim, hidden, Activation::kLinear, stage_seed(cfg.seed, "ae.init.decode2"));
    m.config = cfg;
    return m;
}

// ---------------------------------------------------------------------------

PatchMatrix sample_patches(std::span<const gpr::InterpolatedSeries> series, std::size_t patch_len,
                           std::size_t n_patches, std::uint64_t seed) {
    if (patch_len == 0) throw ParameterError("sample_patches: patch_len must be >= 1");
    if (n_patches == 0) throw ParameterError("sample_patches: n_patches must be >= 1");

    std::vector<std::size_t> usable;
    std::vector<std::uint64_t> cumulative;  // windows in usable[0..i]
    std::uint64_t total = 0;
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto n = series[i].means.size();
        if (n < patch_len) {
            ++skipped;
            continue;
        }
        usable.push_back(i);
        total += n - patch_len + 1;
        cumulative.push_back(total);
    }
    if (skipped > 0) {
        log_warn("sample_patches: skipped " + std::to_string(skipped) + " series shorter than " +
                 std::to_string(patch_len) + " samples");
    }
    if (total == 0) throw PreconditionError("sample_patches: no series has at least patch_len samples");

    PatchMatrix p;
    p.patch_len = patch_len;
    p.info.reserve(n_patches);
    p.data.resize(static_cast<Eigen::Index>(n_patches), static_cast<Eigen::Index>(2 * patch_len));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> dist(0, total - 1);
    for (std::size_t k = 0; k < n_patches; ++k) {
        const std::uint64_t w = dist(rng);
        const auto pos = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), w) - cumulative.begin());
        const std::uint64_t before = pos == 0 ? 0 : cumulative[pos - 1];
        const auto& s = series[usable[pos]];
        const auto offset = static_cast<std::size_t>(w - before);
        p.info.push_back({s.hadm_id, s.label, offset});
        for (std::size_t j = 0; j < patch_len; ++j) {
            p.data(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = s.means[offset + j];
            p.data(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(patch_len + j)) = s.variances[offset + j];
        }
    }
    return p;
}

PatchScaler PatchScaler::fit(const PatchMatrix& p) {
    const auto len = static_cast<Eigen::Index>(p.patch_len);
    auto stats = [](const Eigen::MatrixXd& block, double& center, double& scale) {
        const double n = static_cast<double>(block.size());
        center = block.sum() / n;
        const double var = (block.array() - center).square().sum() / n;
        scale = var > 0.0 ? std::sqrt(var) : 1.0;
    };
    PatchScaler s;
    if (p.size() == 0) return s;
    stats(p.data.leftCols(len), s.mean_center, s.mean_scale);
    stats(p.data.rightCols(len), s.var_center, s.var_scale);
    return s;
}

Eigen::MatrixXd PatchScaler::apply(const PatchMatrix& p) const {
    const auto len = static_cast<Eigen::Index>(p.patch_len);
    Eigen::MatrixXd out = p.data;
    out.leftCols(len) = (out.leftCols(len).array() - mean_center) / mean_scale;
    out.rightCols(len) = (out.rightCols(len).array() - var_center) / var_scale;
    return out;
}

void PatchScaler::save(const std::filesystem::path& path) const {
    KeyValues kv;
    kv.set("mean_center", csv::format_double(mean_center));
    kv.set("mean_scale", csv::format_double(mean_scale));
    kv.set("var_center", csv::format_double(var_center));
    kv.set("var_scale", csv::format_double(var_scale));
    kv.save(path);
}

PatchScaler PatchScaler::load(const std::filesystem::path& path) {
    const auto kv = KeyValues::load(path);
    return {kv.get_double("mean_center"), kv.get_double("mean_scale"), kv.get_double("var_center"),
            kv.get_double("var_scale")};
}

// ---------------------------------------------------------------------------

DenseLayer& layer(StackedAutoencoder& m, LayerId id) {
    switch (id) {
        case LayerId::kEncode1: return m.encode1;
        case LayerId::kDecode1: return m.decode1;
        case LayerId::kEncode2: return m.encode2;
        case LayerId::kDecode2: return m.decode2;
    }
    throw ParameterError("unknown layer id");
}

const DenseLayer& layer(const StackedAutoencoder& m, LayerId id) {
    return layer(const_cast<StackedAutoencoder&>(m), id);
}

std::vector<LayerId> trainable_layers(Phase phase) {
    switch (phase) {
        case Phase::kLayer1: return {LayerId::kEncode1, LayerId::kDecode1};
        case Phase::kLayer2: return {LayerId::kEncode2, LayerId::kDecode2};
        case Phase::kFineTune: return {LayerId::kEncode1, LayerId::kEncode2, LayerId::kDecode2};
    }
    return {};
}

double phase_objective(const StackedAutoencoder& m, Phase phase, const Eigen::MatrixXd& x, const TrainConfig& cfg,
                       Gradients* grad) {
    const double n = static_cast<double>(x.cols());
    const double dim = static_cast<double>(x.rows());
    const double l1 = cfg.l1_activity;
    const double l2 = cfg.l2_weight;

    const Eigen::MatrixXd h1 = m.encode1.forward(x);

    if (phase == Phase::kLayer1) {
        const Eigen::MatrixXd recon = m.decode1.forward(h1);
        const Eigen::MatrixXd r = recon - x;
        const double loss = r.squaredNorm() / (n * dim) + l1 * h1.cwiseAbs().sum() / n + l2_term(m.encode1, l2) +
                            l2_term(m.decode1, l2);
        if (grad != nullptr) {
            for (auto& g : *grad) g = {};
            const Eigen::MatrixXd d_out = (2.0 / (n * dim)) * r;
            auto& gd = (*grad)[static_cast<std::size_t>(LayerId::kDecode1)];
            gd.W = d_out * h1.transpose();
            gd.b = d_out.rowwise().sum();
            add_l2(gd, m.decode1, l2);

            Eigen::MatrixXd d_h1 = m.decode1.W.transpose() * d_out;
            if (l1 != 0.0) d_h1 += (l1 / n) * sign_of(h1);
            const Eigen::MatrixXd d_z1 = d_h1.cwiseProduct(h1.cwiseProduct((1.0 - h1.array()).matrix()));
            auto& ge = (*grad)[static_cast<std::size_t>(LayerId::kEncode1)];
            ge.W = d_z1 * x.transpose();
            ge.b = d_z1.rowwise().sum();
            add_l2(ge, m.encode1, l2);
        }
        return loss;
    }

    const bool joint = phase == Phase::kFineTune;
    const Eigen::MatrixXd h2 = m.encode2.forward(h1);
    const Eigen::MatrixXd recon = m.decode2.forward(h2);
    const Eigen::MatrixXd r = recon - x;
    double loss = r.squaredNorm() / (n * dim) + l1 * h2.cwiseAbs().sum() / n + l2_term(m.encode2, l2) +
                  l2_term(m.decode2, l2);
    if (joint) loss += l1 * h1.cwiseAbs().sum() / n + l2_term(m.encode1, l2);

    if (grad != nullptr) {
        for (auto& g : *grad) g = {};
        const Eigen::MatrixXd d_out = (2.0 / (n * dim)) * r;
        auto& gd = (*grad)[static_cast<std::size_t>(LayerId::kDecode2)];
        gd.W = d_out * h2.transpose();
        gd.b = d_out.rowwise().sum();
        add_l2(gd, m.decode2, l2);

        Eigen::MatrixXd d_h2 = m.decode2.W.transpose() * d_out;
        if (l1 != 0.0) d_h2 += (l1 / n) * sign_of(h2);
        const Eigen::MatrixXd d_z2 = d_h2.cwiseProduct(h2.cwiseProduct((1.0 - h2.array()).matrix()));
        auto& ge2 = (*grad)[static_cast<std::size_t>(LayerId::kEncode2)];
        ge2.W = d_z2 * h1.transpose();
        ge2.b = d_z2.rowwise().sum();
        add_l2(ge2, m.encode2, l2);

        if (joint) {
            Eigen::MatrixXd d_h1 = m.encode2.W.transpose() * d_z2;
            if (l1 != 0.0) d_h1 += (l1 / n) * sign_of(h1);
            const Eigen::MatrixXd d_z1 = d_h1.cwiseProduct(h1.cwiseProduct((1.0 - h1.array()).matrix()));
            auto& ge1 = (*grad)[static_cast<std::size_t>(LayerId::kEncode1)];
            ge1.W = d_z1 * x.transpose();
            ge1.b = d_z1.rowwise().sum();
            add_l2(ge1, m.encode1, l2);
        }
    }
    return loss;
}

LayerPair train_layer1(const Eigen::MatrixXd& patches, const TrainConfig& cfg, std::size_t hidden) {
    validate(cfg);
    StackedAutoencoder m = make_autoencoder(static_cast<std::size_t>(patches.cols()), cfg, hidden);
    check_patches(patches, m.input_dim());
    const Split data = split_validation(patches, cfg);
    TrainReport report = run_sgd(m, Phase::kLayer1, data, cfg, false);
    return {std::move(m.encode1), std::move(m.decode1), std::move(report)};
}

LayerPair train_layer2(const Eigen::MatrixXd& patches, const DenseLayer& encode1, const TrainConfig& cfg,
                       std::size_t hidden) {
    validate(cfg);
    StackedAutoencoder m = make_autoencoder(encode1.inputs(), cfg, hidden);
    if (encode1.outputs() != hidden) throw PreconditionError("train_layer2: encode1 width does not match hidden size");
    m.encode1 = encode1;
    check_patches(patches, m.input_dim());
    const Split data = split_validation(patches, cfg);
    TrainReport report = run_sgd(m, Phase::kLayer2, data, cfg, false);
    return {std::move(m.encode2), std::move(m.decode2), std::move(report)};
}

FineTuneResult fine_tune(const Eigen::MatrixXd& patches, StackedAutoencoder model, const TrainConfig& cfg) {
    validate(cfg);
    check_patches(patches, model.input_dim());
    const Split data = split_validation(patches, cfg);
    TrainReport report = run_sgd(model, Phase::kFineTune, data, cfg, true);
    return {std::move(model), std::move(report)};
}

StackedTraining train_stacked(const Eigen::MatrixXd& patches, const TrainConfig& cfg, std::size_t hidden) {
    StackedTraining t;
    t.model = make_autoencoder(static_cast<std::size_t>(patches.cols()), cfg, hidden);
    auto first = train_layer1(patches, cfg, hidden);
    t.model.encode1 = std::move(first.encode);
    t.model.decode1 = std::move(first.decode);
    t.layer1 = std::move(first.report);

    auto second = train_layer2(patches, t.model.encode1, cfg, hidden);
    t.model.encode2 = std::move(second.encode);
    t.model.decode2 = std::move(second.decode);
    t.layer2 = std::move(second.report);

    auto tuned = fine_tune(patches, std::move(t.model), cfg);
    t.model = std::move(tuned.model);
    t.fine_tune = std::move(tuned.report);
    return t;
}

Eigen::MatrixXd encode(const StackedAutoencoder& m, const Eigen::MatrixXd& patches, int layer_index) {
    if (layer_index != 1 && layer_index != 2) throw ParameterError("encode: layer must be 1 or 2");
    if (static_cast<std::size_t>(patches.cols()) != m.input_dim()) {
        throw PreconditionError("encode: patch width does not match network input");
    }
    Eigen::MatrixXd h = m.encode1.forward(patches.transpose());
    if (layer_index == 2) h = m.encode2.forward(h);
    return h.transpose();
}

Eigen::MatrixXd first_layer_signatures(const StackedAutoencoder& m) { return m.encode1.W; }

// ---------------------------------------------------------------------------

void save_model(const std::filesystem::path& path, const StackedAutoencoder& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    const auto& c = m.config;
    out << "pheno-stacked-autoencoder 1\n";
    out << "input_dim " << m.input_dim() << "\n";
    out << "hidden_dim " << m.hidden_dim() << "\n";
    out << "seed " << c.seed << "\n";
    out << "l1_activity " << hex(c.l1_activity) << "\n";
    out << "l2_weight " << hex(c.l2_weight) << "\n";
    out << "epochs " << c.epochs << "\n";
    out << "learning_rate " << hex(c.learning_rate) << "\n";
    out << "batch_size " << c.batch_size << "\n";
    out << "validation_fraction " << hex(c.validation_fraction) << "\n";
    const std::pair<const char*, const DenseLayer*> layers[] = {
        {"encode1", &m.encode1}, {"decode1", &m.decode1}, {"encode2", &m.encode2}, {"decode2", &m.decode2}};
    for (const auto& [name, l] : layers) {
        out << "layer " << name << ' ' << l->outputs() << ' ' << l->inputs() << ' ' << activation_name(l->activation)
            << "\n";
        for (Eigen::Index i = 0; i < l->W.rows(); ++i) {
            for (Eigen::Index j = 0; j < l->W.cols(); ++j) out << (j ? " " : "") << hex(l->W(i, j));
            out << "\n";
        }
        for (Eigen::Index i = 0; i < l->b.size(); ++i) out << (i ? " " : "") << hex(l->b(i));
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

StackedAutoencoder load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path.string());
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "pheno-stacked-autoencoder" || version != 1) {
        throw SchemaError("not a stacked autoencoder model file: " + path.string());
    }
    StackedAutoencoder m;
    auto expect = [&](const char* key) {
        std::string k;
        in >> k;
        if (k != key) throw SchemaError("expected '" + std::string(key) + "' in " + path.string());
        std::string v;
        in >> v;
        return v;
    };
    const auto input_dim = std::stoul(expect("input_dim"));
    const auto hidden_dim = std::stoul(expect("hidden_dim"));
    m.config.seed = std::stoull(expect("seed"));
    m.config.l1_activity = unhex(expect("l1_activity"), path);
    m.config.l2_weight = unhex(expect("l2_weight"), path);
    m.config.epochs = std::stoul(expect("epochs"));
    m.config.learning_rate = unhex(expect("learning_rate"), path);
    m.config.batch_size = std::stoul(expect("batch_size"));
    m.config.validation_fraction = unhex(expect("validation_fraction"), path);

    auto read_layer = [&](const char* name, std::size_t out_dim, std::size_t in_dim) {
        std::string tag, n, act;
        std::size_t rows = 0, cols = 0;
        in >> tag >> n >> rows >> cols >> act;
        if (tag != "layer" || n != name || rows != out_dim || cols != in_dim) {
            throw SchemaError("unexpected layer header for " + std::string(name) + " in " + path.string());
        }
        DenseLayer l;
        l.activation = act == "sigmoid" ? Activation::kSigmoid : Activation::kLinear;
        l.W.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        l.b.resize(static_cast<Eigen::Index>(rows));
        std::string tok;
        for (Eigen::Index i = 0; i < l.W.rows(); ++i) {
            for (Eigen::Index j = 0; j < l.W.cols(); ++j) {
                if (!(in >> tok)) throw SchemaError("truncated model file: " + path.string());
                l.W(i, j) = unhex(tok, path);
            }
        }
        for (Eigen::Index i = 0; i < l.b.size(); ++i) {
            if (!(in >> tok)) throw SchemaError("truncated model file: " + path.string());
            l.b(i) = unhex(tok, path);
        }
        return l;
    };
    m.encode1 = read_layer("encode1", hidden_dim, input_dim);
    m.decode1 = read_layer("decode1", input_dim, hidden_dim);
    m.encode2 = read_layer("encode2", hidden_dim, hidden_dim);
    m.decode2 = read_layer("decode2", input_dim, hidden_dim);
    return m;
}

void write_patches_csv(const std::filesystem::path& path, const PatchMatrix& p) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "patch_id,hadm_id,label,offset";
    for (Eigen::Index j = 0; j < p.data.cols(); ++j) out << ",x" << (j + 1);
    out << "\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
        out << i << ',' << p.info[i].hadm_id << ',' << p.info[i].label << ',' << p.info[i].offset;
        for (Eigen::Index j = 0; j < p.data.cols(); ++j) {
            out << ',' << csv::format_double(p.data(static_cast<Eigen::Index>(i), j));
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

PatchMatrix read_patches_csv(const std::filesystem::path& path) {
    csv::Reader r(path);
    const auto i_hadm = r.require("hadm_id");
    const auto i_label = r.require("label");
    const auto i_offset = r.require("offset");
    const auto first = r.require("x1");
    const std::size_t width = r.header().size() - first;
    if (width == 0 || width % 2 != 0) throw SchemaError("patch width must be even in " + path.string());

    PatchMatrix p;
    p.patch_len = width / 2;
    std::vector<double> values;
    std::vector<std::string> f;
    while (r.next(f)) {
        if (f.size() != r.header().size()) throw SchemaError("ragged row at " + path.string() + ":" + std::to_string(r.line()));
        PatchInfo info;
        info.hadm_id = csv::parse_int(f[i_hadm]).value_or(0);
        info.label = static_cast<int>(csv::parse_int(f[i_label]).value_or(0));
        info.offset = static_cast<std::size_t>(csv::parse_int(f[i_offset]).value_or(0));
        p.info.push_back(info);
        for (std::size_t j = 0; j < width; ++j) {
            auto v = csv::parse_double(f[first + j]);
            if (!v) throw SchemaError("bad value at " + path.string() + ":" + std::to_string(r.line()));
            values.push_back(*v);
        }
    }
    p.data = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), static_cast<Eigen::Index>(p.info.size()), static_cast<Eigen::Index>(width));
    return p;
}

void write_features_csv(const std::filesystem::path& path, const PatchMatrix& p, const Eigen::MatrixXd& features) {
    if (static_cast<std::size_t>(features.rows()) != p.size()) throw PreconditionError("feature/patch row mismatch");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "patch_id,hadm_id,label";
    for (Eigen::Index j = 0; j < features.cols(); ++j) out << ",f" << (j + 1);
    out << "\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
        out << i << ',' << p.info[i].hadm_id << ',' << p.info[i].label;
        for (Eigen::Index j = 0; j < features.cols(); ++j) {
            out << ',' << csv::format_double(features(static_cast<Eigen::Index>(i), j));
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

FeatureTable read_features_csv(const std::filesystem::path& path) {
    csv::Reader r(path);
    const auto i_patch = r.require("patch_id");
    const auto i_hadm = r.require("hadm_id");
    const auto i_label = r.require("label");
    const auto first = r.require("f1");
    const std::size_t width = r.header().size() - first;
    FeatureTable t;
    std::vector<double> values;
    std::vector<std::string> f;
    while (r.next(f)) {
        if (f.size() != r.header().size()) throw SchemaError("ragged row at " + path.string() + ":" + std::to_string(r.line()));
        t.patch_id.push_back(static_cast<std::size_t>(csv::parse_int(f[i_patch]).value_or(0)));
        t.hadm_id.push_back(csv::parse_int(f[i_hadm]).value_or(0));
        t.label.push_back(static_cast<int>(csv::parse_int(f[i_label]).value_or(0)));
        for (std::size_t j = 0; j < width; ++j) {
            auto v = csv::parse_double(f[first + j]);
            if (!v) throw SchemaError("bad value at " + path.string() + ":" + std::to_string(r.line()));
            values.push_back(*v);
        }
    }
    t.features = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), static_cast<Eigen::Index>(t.label.size()), static_cast<Eigen::Index>(width));
    return t;
}

void write_training_log(const std::filesystem::path& path, const StackedTraining& t) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "phase,epoch,train_loss,validation_loss\n";
    const std::pair<const char*, const TrainReport*> phases[] = {
        {"layer1", &t.layer1}, {"layer2", &t.layer2}, {"finetune", &t.fine_tune}};
    for (const auto& [name, r] : phases) {
        for (std::size_t e = 0; e < r->train_loss.size(); ++e) {
            out << name << ',' << e << ',' << csv::format_double(r->train_loss[e]) << ','
                << csv::format_double(r->validation_loss[e]) << "\n";
        }
    }
}

}  // namespace pheno::ae
