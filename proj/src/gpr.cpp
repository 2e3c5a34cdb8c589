#include "pheno/gpr.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "pheno/common.hpp"
#include "pheno/csv.hpp"
#include "pheno/kv.hpp"

namespace pheno::gpr {

namespace {

void check_inputs(std::span<const double> x, std::span<const double> y, const std::string& name) {
    const std::string who = name.empty() ? std::string("fit") : "fit(" + name + ")";
    if (x.empty()) throw PreconditionError(who + ": no training points");
    if (x.size() != y.size()) throw PreconditionError(who + ": x and y differ in length");
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (!(x[i] > x[i - 1])) throw PreconditionError(who + ": training inputs must be strictly ascending");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw PreconditionError(who + ": non-finite input");
    }
}

}  // namespace

void validate(const RqHyperparams& h) {
    if (!(h.amplitude2 > 0.0 && h.alpha > 0.0 && h.tau > 0.0 && h.noise2 > 0.0)) {
        throw ParameterError("RQ hyperparameters must all be strictly positive");
    }
}

double rq_kernel(double t, double t_prime, const RqHyperparams& h) {
    const double d = t - t_prime;
    const double base = 1.0 + d * d / (2.0 * h.alpha * h.tau * h.tau);
    if (h.alpha == 1.0) return h.amplitude2 / base;
    return h.amplitude2 * std::pow(base, -h.alpha);
}

Eigen::MatrixXd kernel_matrix(std::span<const double> a, std::span<const double> b, const RqHyperparams& h) {
    Eigen::MatrixXd k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
        for (Eigen::Index i = 0; i < k.rows(); ++i) {
            k(i, j) = rq_kernel(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(j)], h);
        }
    }
    return k;
}

GpModel fit(std::span<const double> x, std::span<const double> y, const RqHyperparams& h,
            const std::string& series_name) {
    validate(h);
    check_inputs(x, y, series_name);

    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd k = kernel_matrix(x, x, h);
    k.diagonal().array() += h.noise2;

    GpModel m;
    m.hyper = h;
    m.train_times = Eigen::Map<const Eigen::VectorXd>(x.data(), n);

    constexpr double kJitter[] = {0.0, 1e-10, 1e-8, 1e-6};
    bool ok = false;
    for (double rel : kJitter) {
        Eigen::MatrixXd a = k;
        a.diagonal().array() += rel * h.amplitude2;
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() != Eigen::Success) continue;
        Eigen::MatrixXd l = llt.matrixL();
        if (!(l.diagonal().array() > 0.0).all() || !l.allFinite()) continue;
        m.chol = std::move(l);
        m.jitter = rel * h.amplitude2;
        ok = true;
        break;
    }
    if (!ok) {
        throw NumericalError("Cholesky factorization failed" +
                             (series_name.empty() ? std::string() : " for " + series_name) +
                             " after jitter escalation");
    }

    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
    const Eigen::VectorXd z = m.chol.triangularView<Eigen::Lower>().solve(yv);
    m.weights = m.chol.transpose().triangularView<Eigen::Upper>().solve(z);
    return m;
}

Prediction predict(const GpModel& m, std::span<const double> x_star) {
    const std::span<const double> train(m.train_times.data(), static_cast<std::size_t>(m.train_times.size()));
    const Eigen::MatrixXd k_star = kernel_matrix(train, x_star, m.hyper);
    const Eigen::VectorXd mean = k_star.transpose() * m.weights;
    const Eigen::MatrixXd v = m.chol.triangularView<Eigen::Lower>().solve(k_star);

    Prediction p;
    p.means.assign(mean.data(), mean.data() + mean.size());
    p.variances.resize(x_star.size());
    for (std::size_t i = 0; i < x_star.size(); ++i) {
        double var = m.hyper.amplitude2 - v.col(static_cast<Eigen::Index>(i)).squaredNorm();
        if (var < -1e-10) throw NumericalError("negative predictive variance " + csv::format_double(var));
        p.variances[i] = var < 0.0 ? 0.0 : var;
    }
    return p;
}

double log_marginal_likelihood(const GpModel& m, std::span<const double> y) {
    const auto n = m.weights.size();
    if (static_cast<Eigen::Index>(y.size()) != n) throw PreconditionError("log_marginal_likelihood: length mismatch");
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
    return -0.5 * yv.dot(m.weights) - m.chol.diagonal().array().log().sum() -
           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

std::vector<double> GridSpec::default_tau_axis() {
    std::vector<double> out;
    for (int k = 0; k < 7; ++k) out.push_back(0.1 * std::pow(300.0, k / 6.0));
    return out;
}

RqHyperparams GridSpec::at(std::size_t index) const {
    if (index >= size()) throw ParameterError("grid index out of range");
    const std::size_t i_noise = index % noise2.size();
    index /= noise2.size();
    const std::size_t i_tau = index % tau.size();
    index /= tau.size();
    const std::size_t i_alpha = index % alpha.size();
    index /= alpha.size();
    return RqHyperparams{amplitude2[index], alpha[i_alpha], tau[i_tau], noise2[i_noise]};
}

GridSearchResult grid_search(std::span<const TrainingSeries> train, const GridSpec& grid, unsigned threads) {
    if (grid.size() == 0) throw ParameterError("grid_search: empty grid");
    if (train.empty()) throw PreconditionError("grid_search: no training series");

    const double nan = std::numeric_limits<double>::quiet_NaN();
    GridSearchResult r;
    r.objective.assign(grid.size(), nan);
    parallel_for(grid.size(), threads, [&](std::size_t p) {
        const RqHyperparams h = grid.at(p);
        validate(h);
        double total = 0.0;
        for (const auto& s : train) {
            try {
                const GpModel m = fit(s.x, s.y, h);
                total += log_marginal_likelihood(m, s.y);
            } catch (const NumericalError&) {
                return;  // disqualifies this grid point
            }
        }
        if (std::isfinite(total)) r.objective[p] = total;
    });

    bool found = false;
    for (std::size_t p = 0; p < r.objective.size(); ++p) {
        if (std::isnan(r.objective[p])) continue;
        if (!found || r.objective[p] > r.best_lml) {
            r.best_lml = r.objective[p];
            r.best_index = p;
            found = true;
        }
    }
    if (!found) throw NumericalError("grid_search: every grid point failed numerically");
    r.best = grid.at(r.best_index);
    return r;
}

TrainingSeries prepare(const cohort::LabSeries& s, const preprocess::WarpParams& warp) {
    TrainingSeries t;
    t.x = preprocess::warp_times(s.times, warp);
    t.y = preprocess::standardize(s.values).first;
    return t;
}

std::size_t grid_length(double span, double interval_days, std::size_t pad_samples) {
    if (!(interval_days > 0.0)) throw ParameterError("interpolate: interval_days must be > 0");
    if (!(span >= 0.0)) throw PreconditionError("interpolate: negative span");
    const auto steps = static_cast<std::size_t>(std::floor(span / interval_days + 1e-9));
    return steps + 1 + 2 * pad_samples;
}

InterpolatedSeries interpolate(const cohort::LabSeries& s, const RqHyperparams& h, const preprocess::WarpParams& warp,
                               double interval_days, std::size_t pad_samples) {
    const std::string name = "admission " + std::to_string(s.hadm_id);
    cohort::validate(s, 1);
    const std::size_t count = grid_length(s.times.back(), interval_days, pad_samples);

    const preprocess::TimeWarp warp_map(s.times, warp);
    auto [y, st] = preprocess::standardize(s.values);
    GpModel model = fit(warp_map.warped_knots(), y, h, name);
    model.standardization = st;

    InterpolatedSeries out;
    out.hadm_id = s.hadm_id;
    out.label = s.label;
    out.grid_times.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        out.grid_times[k] = (static_cast<double>(k) - static_cast<double>(pad_samples)) * interval_days;
    }
    const auto pred = predict(model, warp_map.map(out.grid_times));
    auto [means, vars] = preprocess::unstandardize_mean_var(pred.means, pred.variances, st);
    out.means = std::move(means);
    out.variances = std::move(vars);
    return out;
}

std::vector<InterpolatedSeries> interpolate_all(std::span<const cohort::LabSeries> series, const RqHyperparams& h,
                                                const preprocess::WarpParams& warp, double interval_days,
                                                std::size_t pad_samples, unsigned threads) {
    std::vector<InterpolatedSeries> out(series.size());
    parallel_for(series.size(), threads,
                 [&](std::size_t i) { out[i] = interpolate(series[i], h, warp, interval_days, pad_samples); });
    return out;
}

void write_interpolated_csv(const std::filesystem::path& path, std::span<const InterpolatedSeries> series) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "hadm_id,label,grid_index,t_days,mean,variance\n";
    for (const auto& s : series) {
        for (std::size_t k = 0; k < s.grid_times.size(); ++k) {
            out << s.hadm_id << ',' << s.label << ',' << k << ',' << csv::format_double(s.grid_times[k]) << ','
                << csv::format_double(s.means[k]) << ',' << csv::format_double(s.variances[k]) << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<InterpolatedSeries> read_interpolated_csv(const std::filesystem::path& path) {
    csv::Reader r(path);
    const std::size_t cols[] = {r.require("hadm_id"), r.require("label"), r.require("grid_index"),
                                r.require("t_days"), r.require("mean"), r.require("variance")};
    std::size_t width = 0;
    for (auto c : cols) width = std::max(width, c);
    std::vector<InterpolatedSeries> out;
    std::vector<std::string> f;
    while (r.next(f)) {
        const auto bad = [&] { return SchemaError("malformed row at " + path.string() + ":" + std::to_string(r.line())); };
        if (f.size() <= width) throw bad();
        auto hadm = csv::parse_int(f[cols[0]]);
        auto label = csv::parse_int(f[cols[1]]);
        auto t = csv::parse_double(f[cols[3]]);
        auto mean = csv::parse_double(f[cols[4]]);
        auto var = csv::parse_double(f[cols[5]]);
        if (!hadm || !label || !t || !mean || !var) throw bad();
        if (out.empty() || out.back().hadm_id != *hadm) {
            InterpolatedSeries s;
            s.hadm_id = *hadm;
            s.label = static_cast<int>(*label);
            out.push_back(std::move(s));
        }
        out.back().grid_times.push_back(*t);
        out.back().means.push_back(*mean);
        out.back().variances.push_back(*var);
    }
    return out;
}

void write_hyperparams(const std::filesystem::path& path, const RqHyperparams& h, double total_lml,
                       std::size_t n_series) {
    KeyValues kv;
    kv.set("amplitude2", csv::format_double(h.amplitude2));
    kv.set("alpha", csv::format_double(h.alpha));
    kv.set("tau", csv::format_double(h.tau));
    kv.set("noise2", csv::format_double(h.noise2));
    kv.set("total_lml", csv::format_double(total_lml));
    kv.set("n_series", std::to_string(n_series));
    kv.save(path);
}

RqHyperparams read_hyperparams(const std::filesystem::path& path) {
    const auto kv = KeyValues::load(path);
    RqHyperparams h{kv.get_double("amplitude2"), kv.get_double("alpha"), kv.get_double("tau"), kv.get_double("noise2")};
    validate(h);
    return h;
}

}  // namespace pheno::gpr
