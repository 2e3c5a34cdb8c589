#include "pheno/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pheno/common.hpp"

namespace pheno::preprocess {

namespace {

void check_ascending(std::span<const double> times) {
    if (times.empty()) throw PreconditionError("warp: empty time series");
    if (times.front() != 0.0) throw PreconditionError("warp: series must start at t = 0");
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            throw PreconditionError("warp: times not strictly ascending at index " + std::to_string(i));
        }
    }
}

double warp_gap(double d, const WarpParams& p) {
    if (p.a == 1.0) return d + p.b;
    if (p.a == 2.0) return std::sqrt(d) + p.b;
    if (p.a == 3.0) return std::cbrt(d) + p.b;
    return std::pow(d, 1.0 / p.a) + p.b;
}

double warp_tail(double d, const WarpParams& p) { return warp_gap(d, {p.a, 0.0}); }

}  // namespace

void validate(const WarpParams& p) {
    if (!(p.a >= 1.0) || !(p.b >= 0.0) || !std::isfinite(p.a) || !std::isfinite(p.b)) {
        throw ParameterError("warp parameters require a >= 1 and b >= 0");
    }
}

std::vector<double> warp_times(std::span<const double> times, const WarpParams& params) {
    validate(params);
    check_ascending(times);
    std::vector<double> out(times.size());
    out[0] = 0.0;
    for (std::size_t i = 1; i < times.size(); ++i) {
        out[i] = out[i - 1] + warp_gap(times[i] - times[i - 1], params);
    }
    return out;
}

TimeWarp::TimeWarp(std::span<const double> times, const WarpParams& params)
    : knots_(times.begin(), times.end()), warped_(warp_times(times, params)), params_(params) {}

double TimeWarp::operator()(double t) const {
    if (t <= knots_.front()) return warped_.front() - warp_tail(knots_.front() - t, params_);
    if (t >= knots_.back()) return warped_.back() + warp_tail(t - knots_.back(), params_);
    auto hi = static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), t) - knots_.begin());
    const std::size_t lo = hi - 1;
    const double frac = (t - knots_[lo]) / (knots_[hi] - knots_[lo]);
    return warped_[lo] + frac * (warped_[hi] - warped_[lo]);
}

std::vector<double> TimeWarp::map(std::span<const double> ts) const {
    std::vector<double> out;
    out.reserve(ts.size());
    for (double t : ts) out.push_back((*this)(t));
    return out;
}

std::pair<std::vector<double>, Standardization> standardize(std::span<const double> values) {
    if (values.empty()) throw PreconditionError("standardize: empty input");
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / n);
    if (!(sd > 0.0)) sd = 1.0;
    Standardization s{mean, sd};
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) out.push_back((v - mean) / sd);
    return {std::move(out), s};
}

std::vector<double> unstandardize(std::span<const double> values, const Standardization& s) {
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(v * s.std + s.mean);
    return out;
}

std::pair<std::vector<double>, std::vector<double>> unstandardize_mean_var(std::span<const double> means,
                                                                           std::span<const double> variances,
                                                                           const Standardization& s) {
    if (means.size() != variances.size()) throw PreconditionError("unstandardize: length mismatch");
    std::vector<double> m, v;
    m.reserve(means.size());
    v.reserve(variances.size());
    const double s2 = s.std * s.std;
    for (std::size_t i = 0; i < means.size(); ++i) {
        if (variances[i] < 0.0) throw PreconditionError("unstandardize: negative variance");
        m.push_back(means[i] * s.std + s.mean);
        v.push_back(variances[i] * s2);
    }
    return {std::move(m), std::move(v)};
}

}  // namespace pheno::preprocess
