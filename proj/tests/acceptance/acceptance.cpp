// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fail.
#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "pheno/analysis.hpp"
#include "pheno/autoencoder.hpp"
#include "pheno/common.hpp"
#include "pheno/csv.hpp"
#include "pheno/gpr.hpp"
#include "pheno/kv.hpp"
#include "pheno/pipeline.hpp"
#include "pheno/plot.hpp"
#include "pheno/preprocess.hpp"

using namespace pheno;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2e", v);
    return buf;
}

std::string fixed(double v, int digits = 3) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch() {
    static const fs::path dir = fs::temp_directory_path() / ("pheno-acceptance-" + std::to_string(::getpid()));
    return dir;
}

// ---------------------------------------------------------------------------

Outcome gpr_oracle() {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nd;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 12;
        std::vector<double> x{0.0}, y;
        for (std::size_t i = 1; i < n; ++i) x.push_back(x.back() + 0.05 + 2.0 * u(rng));
        for (std::size_t i = 0; i < n; ++i) y.push_back(nd(rng));
        const gpr::RqHyperparams h{0.25 + 2 * u(rng), 0.5 + 4.5 * u(rng), 0.1 + 5 * u(rng), 0.01 + 0.3 * u(rng)};

        // dense oracle from the kernel formula
        const auto ni = static_cast<Eigen::Index>(n);
        Eigen::MatrixXd k(ni, ni);
        auto kern = [&](double a, double b) {
            const double d = a - b;
            return h.amplitude2 * std::pow(1.0 + d * d / (2 * h.alpha * h.tau * h.tau), -h.alpha);
        };
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) k(i, j) = kern(x[i], x[j]) + (i == j ? h.noise2 : 0.0);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
        const Eigen::MatrixXd inv = lu.inverse();
        const Eigen::Map<const Eigen::VectorXd> yv(y.data(), ni);

        const auto m = gpr::fit(x, y, h);
        std::vector<double> xs;
        for (int j = 0; j < 5; ++j) xs.push_back(-2.0 + (x.back() + 4.0) * u(rng));
        const auto p = gpr::predict(m, xs);
        auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
        for (std::size_t j = 0; j < xs.size(); ++j) {
            Eigen::VectorXd ks(ni);
            for (std::size_t i = 0; i < n; ++i) ks(i) = kern(x[i], xs[j]);
            worst = std::max(worst, rel(p.means[j], ks.dot(inv * yv)));
            worst = std::max(worst, rel(p.variances[j], h.amplitude2 - ks.dot(inv * ks)));
        }
        const double lml = -0.5 * yv.dot(inv * yv) - 0.5 * std::log(lu.determinant()) -
                           0.5 * static_cast<double>(n) * std::log(2 * std::numbers::pi);
        worst = std::max(worst, rel(gpr::log_marginal_likelihood(m, y), lml));
    }
    return {worst <= 1e-8, "100 series, max relative error " + sci(worst)};
}

Outcome gpr_sanity() {
    std::mt19937_64 rng(202);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u(0.2, 1.5);
    double mean_err = 0, var_max = 0, far_mean = 0, far_var = 0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x{0.0}, y;
        for (int i = 1; i < 8; ++i) x.push_back(x.back() + u(rng));
        for (int i = 0; i < 8; ++i) y.push_back(nd(rng));
        const auto [z, st] = preprocess::standardize(y);
        const gpr::RqHyperparams h{1.0 + trial * 0.05, 2.0, 1.0, 1e-12};
        const auto m = gpr::fit(x, z, h);
        const auto at = gpr::predict(m, x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            mean_err = std::max(mean_err, std::abs(at.means[i] - z[i]));
            var_max = std::max(var_max, at.variances[i]);
        }
        const auto far = gpr::predict(m, std::vector<double>{x.back() + 1e4});
        far_mean = std::max(far_mean, std::abs(far.means[0]));
        far_var = std::max(far_var, std::abs(far.variances[0] - h.amplitude2));
    }
    const bool ok = mean_err < 1e-4 && var_max < 1e-4 && far_mean < 1e-3 && far_var < 1e-3;
    return {ok, "at data: |mean-y| " + sci(mean_err) + ", var " + sci(var_max) + "; far: |mean| " + sci(far_mean) +
                    ", |var-amp2| " + sci(far_var)};
}

Outcome warp_identities() {
    bool ok = true;
    std::mt19937_64 rng(303);
    std::exponential_distribution<double> gap(0.5);
    std::vector<double> t{0.0};
    for (int i = 0; i < 30; ++i) t.push_back(t.back() + gap(rng) + 1e-3);
    ok = ok && preprocess::warp_times(t, {1, 0}) == t;

    const auto w = preprocess::warp_times(std::vector<double>{0, 8, 9, 9.125}, {3, 0});
    ok = ok && w[1] - w[0] == 2.0 && w[2] - w[1] == 1.0 && w[3] - w[2] == 0.5;

    std::uniform_real_distribution<double> ua(1, 6), ub(0, 1);
    int monotone = 0;
    for (int s = 0; s < 1000; ++s) {
        std::vector<double> r{0.0};
        const int n = 3 + static_cast<int>(rng() % 40);
        for (int i = 1; i < n; ++i) r.push_back(r.back() + gap(rng) + 1e-9);
        const auto out = preprocess::warp_times(r, {ua(rng), ub(rng)});
        bool m = out[0] == 0.0;
        for (std::size_t i = 1; i < out.size(); ++i) m = m && out[i] > out[i - 1];
        monotone += m;
    }
    ok = ok && monotone == 1000;
    return {ok, "identity exact, {8,1,0.125} -> {" + csv::format_double(w[1] - w[0]) + "," +
                    csv::format_double(w[2] - w[1]) + "," + csv::format_double(w[3] - w[2]) + "}, monotone " +
                    std::to_string(monotone) + "/1000"};
}

Outcome hyper_recovery() {
    const gpr::GridSpec grid;
    // truth sits on the grid: amplitude2 1, alpha 2, tau index 3, noise2 0.05
    const gpr::RqHyperparams truth{grid.amplitude2[2], grid.alpha[2], grid.tau[3], grid.noise2[1]};
    std::mt19937_64 rng(404);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u(0.0, 20.0);
    std::vector<gpr::TrainingSeries> train;
    for (int s = 0; s < 50; ++s) {
        std::vector<double> x;
        for (int i = 0; i < 30; ++i) x.push_back(u(rng));
        std::sort(x.begin(), x.end());
        Eigen::MatrixXd k = gpr::kernel_matrix(x, x, truth);
        k.diagonal().array() += truth.noise2;
        const Eigen::MatrixXd l = k.llt().matrixL();
        Eigen::VectorXd e(30);
        for (auto& v : e) v = nd(rng);
        const Eigen::VectorXd y = l * e;
        train.push_back({x, std::vector<double>(y.data(), y.data() + y.size())});
    }
    const auto r = gpr::grid_search(train, grid, 1);
    auto idx = [](const std::vector<double>& axis, double v) {
        return static_cast<long>(std::find(axis.begin(), axis.end(), v) - axis.begin());
    };
    const long d_amp = std::labs(idx(grid.amplitude2, r.best.amplitude2) - 2);
    const long d_alpha = std::labs(idx(grid.alpha, r.best.alpha) - 2);
    const long d_tau = std::labs(idx(grid.tau, r.best.tau) - 3);
    const long d_noise = std::labs(idx(grid.noise2, r.best.noise2) - 1);
    const bool ok = d_amp <= 1 && d_alpha <= 1 && d_tau <= 1 && d_noise <= 1;
    return {ok, "selected amplitude2 " + csv::format_double(r.best.amplitude2) + ", alpha " +
                    csv::format_double(r.best.alpha) + ", tau " + fixed(r.best.tau) + ", noise2 " +
                    csv::format_double(r.best.noise2) + " (grid steps from truth: " + std::to_string(d_amp) + "," +
                    std::to_string(d_alpha) + "," + std::to_string(d_tau) + "," + std::to_string(d_noise) + ")"};
}

Outcome gradient_checks() {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ae::TrainConfig cfg;
        cfg.seed = seed;
        cfg.l1_activity = 0.02;
        cfg.l2_weight = 0.01;
        auto m = ae::make_autoencoder(4 + seed, cfg, 2 + seed % 3);
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> nd;
        for (auto id : {ae::LayerId::kEncode1, ae::LayerId::kDecode1, ae::LayerId::kEncode2, ae::LayerId::kDecode2}) {
            for (auto& b : ae::layer(m, id).b) b = 0.3 * nd(rng);
        }
        Eigen::MatrixXd x(static_cast<Eigen::Index>(4 + seed), 3);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);

        for (ae::Phase phase : {ae::Phase::kLayer1, ae::Phase::kLayer2, ae::Phase::kFineTune}) {
            ae::Gradients g;
            ae::phase_objective(m, phase, x, cfg, &g);
            for (auto id : ae::trainable_layers(phase)) {
                auto& l = ae::layer(m, id);
                const auto& lg = g[static_cast<std::size_t>(id)];
                auto check = [&](double* p, const double* analytic, Eigen::Index count) {
                    for (Eigen::Index i = 0; i < count; ++i) {
                        const double saved = p[i];
                        p[i] = saved + 1e-5;
                        const double up = ae::phase_objective(m, phase, x, cfg);
                        p[i] = saved - 1e-5;
                        const double down = ae::phase_objective(m, phase, x, cfg);
                        p[i] = saved;
                        const double numeric = (up - down) / 2e-5;
                        const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
                        worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
                    }
                };
                check(l.W.data(), lg.W.data(), l.W.size());
                check(l.b.data(), lg.b.data(), l.b.size());
            }
        }
    }
    return {worst < 1e-4, "3 phases x 5 toy nets, max relative error " + sci(worst)};
}

Outcome layer_freezing() {
    std::mt19937_64 rng(606);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd x(256, 40);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
    ae::TrainConfig cfg;
    cfg.epochs = 20;
    cfg.seed = 6;
    const auto l1 = ae::train_layer1(x, cfg);
    const ae::DenseLayer snapshot = l1.encode;
    const auto l2 = ae::train_layer2(x, l1.encode, cfg);
    const bool same = std::memcmp(snapshot.W.data(), l1.encode.W.data(), sizeof(double) * snapshot.W.size()) == 0 &&
                      std::memcmp(snapshot.b.data(), l1.encode.b.data(), sizeof(double) * snapshot.b.size()) == 0;
    const bool trained = l2.report.train_loss.back() < l2.report.train_loss.front();
    return {same && trained, std::string("encode1 ") + (same ? "bit-identical" : "CHANGED") +
                                 " after 20 epochs of layer-2 training (layer-2 loss " +
                                 fixed(l2.report.train_loss.front()) + " -> " + fixed(l2.report.train_loss.back()) + ")"};
}

int run_cli(const fs::path& out, const std::string& extra = "") {
    const std::string cmd = std::string(PHENO_CLI_PATH) + " --log-level=warn run --synthetic=true --output_dir=" +
                            out.string() + " --seed=42 " + extra + " > " + (out.string() + ".log") + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome end_to_end() {
    const fs::path out = scratch() / "run_a";
    const int rc = run_cli(out);
    if (rc != 0) return {false, "pipeline exited with " + std::to_string(rc) + "; see " + out.string() + ".log"};
    const auto m = KeyValues::load(out / "metrics.txt");
    const double a1 = m.get_double_or("auc_layer1", 0), a2 = m.get_double_or("auc_layer2", 0);
    const long n = m.get_int_or("n_train", 0) + m.get_int_or("n_test", 0);

    // blob fixture: 20 points per class in 10 dimensions
    std::mt19937_64 rng(707);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd x(40, 10);
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
        labels.push_back(i < 20 ? 0 : 1);
        for (int d = 0; d < 10; ++d) x(i, d) = nd(rng) + (i < 20 ? 0.0 : 10.0);
    }
    analysis::TsneParams p;
    p.perplexity = 10;
    p.seed = 7;
    const double nn = analysis::nearest_neighbor_accuracy(analysis::tsne(x, p).coords, labels);
    const bool ok = n == 200 && a1 >= 0.9 && a2 >= 0.9 && nn >= 0.95;
    return {ok, std::to_string(n) + " admissions, AUC layer1 " + fixed(a1, 4) + ", layer2 " + fixed(a2, 4) +
                    "; blob t-SNE NN accuracy " + fixed(nn, 3)};
}

Outcome auc_correctness() {
    const double four = analysis::auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1});
    const double ties = analysis::auc(std::vector<double>(10, 0.3), std::vector<int>{0, 1, 0, 1, 0, 1, 1, 0, 0, 1});
    std::mt19937_64 rng(808);
    std::uniform_int_distribution<int> coarse(0, 20);
    double worst = 0;
    for (int t = 0; t < 500; ++t) {
        std::vector<double> s(30), neg(30);
        std::vector<int> y(30);
        for (int i = 0; i < 30; ++i) {
            s[i] = coarse(rng) * 0.1;
            neg[i] = -s[i];
            y[i] = i % 3 == 0;
        }
        worst = std::max(worst, std::abs(analysis::auc(s, y) + analysis::auc(neg, y) - 1.0));
    }
    return {four == 0.75 && ties == 0.5 && worst < 1e-12, "4-point " + csv::format_double(four) + ", all-ties " +
                                                             csv::format_double(ties) +
                                                             ", complement symmetry error " + sci(worst)};
}

Outcome determinism() {
    const fs::path a = scratch() / "run_a";
    const fs::path b = scratch() / "run_b";
    if (!fs::exists(a / "metrics.txt") && run_cli(a) != 0) return {false, "first run failed"};
    const int rc = run_cli(b);
    if (rc != 0) return {false, "second run exited with " + std::to_string(rc)};
    const std::string ma = slurp(a / "metrics.txt"), mb = slurp(b / "metrics.txt");
    int same_files = 0, files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
        ++files;
        same_files += slurp(e.path()) == slurp(b / e.path().filename());
    }
    const bool ok = !ma.empty() && ma == mb && same_files == files;
    return {ok, std::string("metrics ") + (ma == mb ? "byte-identical" : "DIFFER") + ", " +
                    std::to_string(same_files) + "/" + std::to_string(files) + " CSV intermediates identical"};
}

Outcome dimensions() {
    const PipelineConfig cfg;  // defaults: patch_len 20, pad 10, interval 0.25
    gpr::InterpolatedSeries s;
    for (int i = 0; i < 30; ++i) {
        s.grid_times.push_back(0.25 * i);
        s.means.push_back(i);
        s.variances.push_back(1);
    }
    const auto patches = ae::sample_patches(std::vector<gpr::InterpolatedSeries>{s}, cfg.patch_len, 8, 1);
    const auto model = ae::make_autoencoder(static_cast<std::size_t>(patches.data.cols()), cfg.train);
    const auto width_out = model.decode2.W.rows();

    cohort::LabSeries series{1, 0, {0, 0.7, 3.0}, {10, 20, 15}, 0};
    const auto interp = gpr::interpolate(series, {1, 1, 1, 0.1}, cfg.warp, cfg.interval_days, cfg.pad_samples);
    const double pad_before = 0.0 - interp.grid_times.front();
    const double pad_after = interp.grid_times.back() - 3.0;

    const std::string grid = plot::signature_grid_svg(ae::first_layer_signatures(model), cfg.patch_len);
    std::size_t panels = 0;
    for (auto p = grid.find("<g class=\"panel\">"); p != std::string::npos; p = grid.find("<g class=\"panel\">", p + 1)) {
        ++panels;
    }
    const bool ok = patches.data.cols() == 40 && model.input_dim() == 40 && width_out == 40 &&
                    std::abs(pad_before - 2.5) < 1e-12 && std::abs(pad_after - 2.5) < 1e-12 && panels == 100;
    return {ok, "network I/O " + std::to_string(model.input_dim()) + "/" + std::to_string(width_out) + ", padding " +
                    csv::format_double(pad_before) + " / " + csv::format_double(pad_after) + " days, " +
                    std::to_string(panels) + " signature panels"};
}

}  // namespace

int main() {
    set_log_level(LogLevel::kError);
    fs::remove_all(scratch());
    fs::create_directories(scratch());

    struct Criterion {
        const char* id;
        const char* name;
        double budget_s;  // 0: no runtime bound
        std::function<Outcome()> run;
    };
    const Criterion criteria[] = {
        {"AC1", "GPR oracle equivalence", 10, gpr_oracle},
        {"AC2", "GPR interpolation sanity", 0, gpr_sanity},
        {"AC3", "time-warp identities", 0, warp_identities},
        {"AC4", "hyperparameter recovery", 120, hyper_recovery},
        {"AC5", "autoencoder gradient checks", 30, gradient_checks},
        {"AC6", "layer freezing", 0, layer_freezing},
        {"AC7", "end-to-end synthetic separability", 600, end_to_end},
        {"AC8", "AUC correctness", 0, auc_correctness},
        {"AC9", "determinism", 0, determinism},
        {"AC10", "dimensional checks", 0, dimensions},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_s > 0 && secs > c.budget_s) {
            o.pass = false;
            o.detail += "; over the " + fixed(c.budget_s, 0) + " s budget";
        }
        failed += !o.pass;
        std::printf("%s %-4s %-36s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
    if (failed == 0) fs::remove_all(scratch());
    return failed == 0 ? 0 : 1;
}
