#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pheno/gpr.hpp"

namespace pheno::ae {

inline constexpr std::size_t kHiddenUnits = 100;

enum class Activation { kSigmoid, kLinear };

struct DenseLayer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;  // out
    Activation activation = Activation::kSigmoid;

    std::size_t inputs() const { return static_cast<std::size_t>(W.cols()); }
    std::size_t outputs() const { return static_cast<std::size_t>(W.rows()); }

    /// Column-per-sample forward pass: x is in x N, result is out x N.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

    /// Uniform in +-sqrt(6 / (in + out)); zero bias.
    static DenseLayer init(std::size_t out, std::size_t in, Activation act, std::uint64_t seed);
};

struct TrainConfig {
    double l1_activity = 1e-4;
    double l2_weight = 1e-3;
    std::size_t epochs = 200;
    double learning_rate = 0.01;
    std::size_t batch_size = 64;
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

/// encode1/encode2 are the feature layers; decode1/decode2 exist for training.
struct StackedAutoencoder {
    DenseLayer encode1;
    DenseLayer decode1;
    DenseLayer encode2;
    DenseLayer decode2;
    TrainConfig config;

    std::size_t input_dim() const { return encode1.inputs(); }
    std::size_t hidden_dim() const { return encode1.outputs(); }
};

/// Freshly initialized network (width `hidden` for both encoders).
StackedAutoencoder make_autoencoder(std::size_t input_dim, const TrainConfig& cfg, std::size_t hidden = kHiddenUnits);

// ---------------------------------------------------------------------------
// Patches

struct PatchInfo {
    std::int64_t hadm_id = 0;
    int label = 0;
    std::size_t offset = 0;  // starting grid index
};

/// One patch per row: patch_len means followed by patch_len variances.
struct PatchMatrix {
    std::size_t patch_len = 0;
    std::vector<PatchInfo> info;
    Eigen::MatrixXd data;

    std::size_t size() const { return info.size(); }
};

/// Draws `n_patches` windows uniformly over every (series, offset) pair.
/// Series shorter than patch_len are skipped.
PatchMatrix sample_patches(std::span<const gpr::InterpolatedSeries> series, std::size_t patch_len,
                           std::size_t n_patches, std::uint64_t seed);

/// Per-channel z-scoring of patches, fitted on training patches.
struct PatchScaler {
    double mean_center = 0.0;
    double mean_scale = 1.0;
    double var_center = 0.0;
    double var_scale = 1.0;

    static PatchScaler fit(const PatchMatrix& p);
    Eigen::MatrixXd apply(const PatchMatrix& p) const;
    void save(const std::filesystem::path& path) const;
    static PatchScaler load(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------
// Training

enum class Phase { kLayer1, kLayer2, kFineTune };

enum class LayerId : std::size_t { kEncode1 = 0, kDecode1 = 1, kEncode2 = 2, kDecode2 = 3 };

DenseLayer& layer(StackedAutoencoder& m, LayerId id);
const DenseLayer& layer(const StackedAutoencoder& m, LayerId id);

/// Layers updated by a phase.
std::vector<LayerId> trainable_layers(Phase phase);

struct LayerGrad {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;
};
using Gradients = std::array<LayerGrad, 4>;  // indexed by LayerId; empty for frozen layers

/// Phase objective on samples `x` (one per column):
///   mean_n [ |x_n - recon_n|^2 / D + l1 * sum|active encoder units| ]
///   + l2 * sum of squared trainable weights (biases excluded).
/// Phase kLayer1 reconstructs through encode1/decode1; the other phases go
/// through encode1, encode2 and decode2. When `grad` is given it receives
/// the gradient with respect to the trainable layers.
double phase_objective(const StackedAutoencoder& m, Phase phase, const Eigen::MatrixXd& x, const TrainConfig& cfg,
                       Gradients* grad = nullptr);

/// Objective values per epoch; entry 0 is before any update.
struct TrainReport {
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    std::size_t best_epoch = 0;
    std::size_t n_train = 0;
    std::size_t n_validation = 0;
};

struct LayerPair {
    DenseLayer encode;
    DenseLayer decode;
    TrainReport report;
};

/// `patches` holds one sample per row.
LayerPair train_layer1(const Eigen::MatrixXd& patches, const TrainConfig& cfg, std::size_t hidden = kHiddenUnits);

/// Trains encode2/decode2 on input -> encode1 (frozen) -> encode2 -> decode2.
LayerPair train_layer2(const Eigen::MatrixXd& patches, const DenseLayer& encode1, const TrainConfig& cfg,
                       std::size_t hidden = kHiddenUnits);

struct FineTuneResult {
    StackedAutoencoder model;
    TrainReport report;
};

/// Joint update of encode1, encode2 and decode2. Returns the parameters of
/// the epoch with the lowest training objective (epoch 0 included).
FineTuneResult fine_tune(const Eigen::MatrixXd& patches, StackedAutoencoder model, const TrainConfig& cfg);

struct StackedTraining {
    StackedAutoencoder model;
    TrainReport layer1;
    TrainReport layer2;
    TrainReport fine_tune;
};

/// Greedy layerwise training followed by fine-tuning.
StackedTraining train_stacked(const Eigen::MatrixXd& patches, const TrainConfig& cfg,
                              std::size_t hidden = kHiddenUnits);

/// Activations of encode1 (layer 1) or encode2(encode1(x)) (layer 2); one row per sample.
Eigen::MatrixXd encode(const StackedAutoencoder& m, const Eigen::MatrixXd& patches, int layer);

/// Rows of encode1.W; each is a signature over the mean/variance patch layout.
Eigen::MatrixXd first_layer_signatures(const StackedAutoencoder& m);

// ---------------------------------------------------------------------------
// Persistence

/// Self-describing text file; weights are written as hexadecimal floats so a
/// reload is bit-exact.
void save_model(const std::filesystem::path& path, const StackedAutoencoder& m);
StackedAutoencoder load_model(const std::filesystem::path& path);

/// patch_id,hadm_id,label,offset,x1..xD
void write_patches_csv(const std::filesystem::path& path, const PatchMatrix& p);
PatchMatrix read_patches_csv(const std::filesystem::path& path);

/// patch_id,hadm_id,label,f1..fH
void write_features_csv(const std::filesystem::path& path, const PatchMatrix& p, const Eigen::MatrixXd& features);

struct FeatureTable {
    std::vector<std::size_t> patch_id;
    std::vector<std::int64_t> hadm_id;
    std::vector<int> label;
    Eigen::MatrixXd features;
};
FeatureTable read_features_csv(const std::filesystem::path& path);

/// epoch,phase,train_loss,validation_loss
void write_training_log(const std::filesystem::path& path, const StackedTraining& t);

}  // namespace pheno::ae
