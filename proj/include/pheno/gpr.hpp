#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pheno/cohort.hpp"
#include "pheno/preprocess.hpp"

namespace pheno::gpr {

/// Rational-quadratic covariance hyperparameters plus observation noise.
struct RqHyperparams {
    double amplitude2 = 1.0;  // signal variance
    double alpha = 1.0;       // scale-mixture exponent
    double tau = 1.0;         // time scale (warped days)
    double noise2 = 0.1;      // observation noise variance
};

void validate(const RqHyperparams& h);

/// amplitude2 * (1 + (t - t')^2 / (2 alpha tau^2))^(-alpha)
double rq_kernel(double t, double t_prime, const RqHyperparams& h);

/// Dense covariance matrix K(a, b).
Eigen::MatrixXd kernel_matrix(std::span<const double> a, std::span<const double> b, const RqHyperparams& h);

/// Fitted posterior for one series. Immutable after fit.
struct GpModel {
    Eigen::VectorXd train_times;
    Eigen::MatrixXd chol;     // lower triangular, chol * chol^T = K + (noise2 + jitter) I
    Eigen::VectorXd weights;  // (K + noise2 I)^{-1} y
    RqHyperparams hyper;
    preprocess::Standardization standardization;
    double jitter = 0.0;  // extra diagonal added to reach a successful factorization
};

struct Prediction {
    std::vector<double> means;
    std::vector<double> variances;
};

/// Factorizes K + noise2 I. If that fails the diagonal is raised by
/// 1e-10, 1e-8, then 1e-6 times amplitude2 before giving up.
GpModel fit(std::span<const double> x, std::span<const double> y, const RqHyperparams& h,
            const std::string& series_name = "");

/// Latent predictive mean and variance (noise-free) at each query point.
Prediction predict(const GpModel& m, std::span<const double> x_star);

double log_marginal_likelihood(const GpModel& m, std::span<const double> y);

/// Axis values of the hyperparameter grid. Points are visited with
/// amplitude2 outermost, then alpha, tau and noise2 innermost.
struct GridSpec {
    std::vector<double> amplitude2{0.25, 0.5, 1.0, 2.0};
    std::vector<double> tau = default_tau_axis();
    std::vector<double> alpha{0.5, 1.0, 2.0, 5.0};
    std::vector<double> noise2{0.01, 0.05, 0.1, 0.25};

    std::size_t size() const { return amplitude2.size() * tau.size() * alpha.size() * noise2.size(); }
    RqHyperparams at(std::size_t index) const;

    /// Seven log-spaced values from 0.1 to 30.
    static std::vector<double> default_tau_axis();
};

/// A training series already warped and standardized.
struct TrainingSeries {
    std::vector<double> x;
    std::vector<double> y;
};

struct GridSearchResult {
    RqHyperparams best;
    std::size_t best_index = 0;
    double best_lml = 0.0;
    std::vector<double> objective;  // summed LML per grid point; NaN where a series failed
};

/// Exhaustive search for the grid point maximizing the summed LML. Series
/// are summed in input order inside each point; points run on `threads`
/// workers (0 = PHENO_THREADS / hardware default).
GridSearchResult grid_search(std::span<const TrainingSeries> train, const GridSpec& grid, unsigned threads = 0);

/// Warped, standardized view of a cohort series, as used for the search.
TrainingSeries prepare(const cohort::LabSeries& s, const preprocess::WarpParams& warp);

struct InterpolatedSeries {
    std::int64_t hadm_id = 0;
    int label = 0;
    std::vector<double> grid_times;  // original (unwarped) days
    std::vector<double> means;
    std::vector<double> variances;
};

/// Number of grid points for a series spanning `span` days.
std::size_t grid_length(double span, double interval_days, std::size_t pad_samples);

/// Regular grid from -pad*interval to span + pad*interval on the original
/// time axis; predictions are returned in original value units.
InterpolatedSeries interpolate(const cohort::LabSeries& s, const RqHyperparams& h, const preprocess::WarpParams& warp,
                               double interval_days, std::size_t pad_samples);

/// Interpolates every series on `threads` workers; output order follows input.
std::vector<InterpolatedSeries> interpolate_all(std::span<const cohort::LabSeries> series, const RqHyperparams& h,
                                                const preprocess::WarpParams& warp, double interval_days,
                                                std::size_t pad_samples, unsigned threads = 0);

/// hadm_id,label,grid_index,t_days,mean,variance
void write_interpolated_csv(const std::filesystem::path& path, std::span<const InterpolatedSeries> series);
std::vector<InterpolatedSeries> read_interpolated_csv(const std::filesystem::path& path);

/// Flat "key = value" report of the selected hyperparameters.
void write_hyperparams(const std::filesystem::path& path, const RqHyperparams& h, double total_lml,
                       std::size_t n_series);
RqHyperparams read_hyperparams(const std::filesystem::path& path);

}  // namespace pheno::gpr
