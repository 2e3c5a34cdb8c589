#pragma once

#include <span>
#include <utility>
#include <vector>

namespace pheno::preprocess {

/// Gap warp: a gap of d days becomes d^(1/a) + b.
struct WarpParams {
    double a = 3.0;
    double b = 0.0;
};

struct Standardization {
    double mean = 0.0;
    double std = 1.0;
};

void validate(const WarpParams& p);

/// Warps the gaps of an ascending series that starts at 0. Output starts at 0.
std::vector<double> warp_times(std::span<const double> times, const WarpParams& params);

/// Monotone map from the original time axis to the warped axis, anchored on a
/// series' sample times. Between samples the warped gap is spread linearly;
/// outside the sampled span a distance d from the nearest end maps to d^(1/a),
/// which keeps the map continuous and strictly increasing.
class TimeWarp {
public:
    TimeWarp(std::span<const double> times, const WarpParams& params);

    double operator()(double t) const;
    std::vector<double> map(std::span<const double> ts) const;

    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& warped_knots() const { return warped_; }

private:
    std::vector<double> knots_;
    std::vector<double> warped_;
    WarpParams params_;
};

/// Population (1/n) standardization. All-equal input stores std = 1.
std::pair<std::vector<double>, Standardization> standardize(std::span<const double> values);

std::vector<double> unstandardize(std::span<const double> values, const Standardization& s);

/// Maps predictive means and variances back to original units:
/// mean * std + mean0 and var * std^2.
std::pair<std::vector<double>, std::vector<double>> unstandardize_mean_var(std::span<const double> means,
                                                                           std::span<const double> variances,
                                                                           const Standardization& s);

}  // namespace pheno::preprocess
