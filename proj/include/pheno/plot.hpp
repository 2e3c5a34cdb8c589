#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>

#include "pheno/cohort.hpp"
#include "pheno/gpr.hpp"

namespace pheno::plot {

/// Original samples, the same values at warped times, and the GPR mean with
/// a one-standard-deviation band.
std::string series_overlay_svg(const cohort::LabSeries& original, std::span<const double> warped_times,
                               const gpr::InterpolatedSeries& interpolated);

/// One small panel per row of `signatures` (ten per grid row). Each panel
/// draws the mean half and the variance half of the weight vector.
std::string signature_grid_svg(const Eigen::MatrixXd& signatures, std::size_t patch_len);

/// 2-D scatter colored by binary label.
std::string scatter_svg(const Eigen::MatrixXd& coords, std::span<const int> labels, const std::string& title);

void write_svg(const std::filesystem::path& path, const std::string& svg);

}  // namespace pheno::plot
