#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pheno::analysis {

struct TsneParams {
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    std::size_t exaggeration_iterations = 250;
    std::uint64_t seed = 0;
};

struct Embedding {
    Eigen::MatrixXd coords;  // n x 2
    double perplexity = 0.0;
    std::uint64_t seed = 0;
    double kl_divergence = 0.0;
    std::vector<double> kl_history;  // KL(P||Q), unexaggerated: every 25 iterations, every iteration of the last 50, and at exit
};

/// Exact O(n^2) t-SNE into two dimensions.
Embedding tsne(const Eigen::MatrixXd& features, const TsneParams& params);

/// Symmetric joint probabilities P (n x n, zero diagonal, sums to 1) with
/// per-point bandwidths found by bisection to match the perplexity.
Eigen::MatrixXd joint_probabilities(const Eigen::MatrixXd& features, double perplexity);

struct LogisticModel {
    Eigen::VectorXd weights;
    double bias = 0.0;
    double l2 = 0.0;
    double gradient_norm = 0.0;  // at exit
    std::size_t iterations = 0;

    /// P(label = 1 | x) for each row.
    Eigen::VectorXd predict_proba(const Eigen::MatrixXd& features) const;
    /// Linear score w.x + b for each row.
    Eigen::VectorXd decision(const Eigen::MatrixXd& features) const;
};

/// Mean negative log-likelihood plus (l2 / 2) |w|^2 (bias unpenalized).
double logistic_objective(const LogisticModel& m, const Eigen::MatrixXd& features, std::span<const int> labels,
                          Eigen::VectorXd* grad_w = nullptr, double* grad_b = nullptr);

/// Gradient descent from zero with step 1/L, L a bound on the objective's
/// curvature.
LogisticModel fit_logistic(const Eigen::MatrixXd& features, std::span<const int> labels, double l2,
                           std::size_t iterations);

/// Mann-Whitney AUC of scores; ties count 1/2.
double auc(std::span<const double> scores, std::span<const int> labels);
double auc(const LogisticModel& m, const Eigen::MatrixXd& features, std::span<const int> labels);

struct AdmissionScores {
    std::vector<std::int64_t> hadm_id;
    std::vector<double> score;
    std::vector<int> label;
};

/// Mean patch score per admission, in ascending hadm_id order.
AdmissionScores aggregate_by_admission(std::span<const double> scores, std::span<const std::int64_t> hadm_ids,
                                       std::span<const int> labels);

/// Fraction of points whose nearest other point shares their label.
double nearest_neighbor_accuracy(const Eigen::MatrixXd& points, std::span<const int> labels);

/// patch_id,label,x,y
void write_embedding_csv(const std::filesystem::path& path, const Embedding& e, std::span<const std::size_t> patch_ids,
                         std::span<const int> labels);

}  // namespace pheno::analysis
