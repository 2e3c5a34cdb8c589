#include "pheno/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>

#include "pheno/cohort.hpp"
#include "pheno/common.hpp"
#include "pheno/csv.hpp"
#include "pheno/plot.hpp"

namespace pheno {

namespace {

void require_file(const std::filesystem::path& p) {
    if (!std::filesystem::is_regular_file(p)) throw IoError("missing input file: " + p.string());
}

struct Tables {
    cohort::LabEventTable labs;
    std::vector<cohort::Diagnosis> diagnoses;
};

Tables load_tables(const PipelineConfig& cfg) {
    for (const auto& p : {cfg.labevents_path(), cfg.diagnoses_path(), cfg.d_labitems_path()}) require_file(p);
    Tables t;
    t.labs = cohort::load_lab_events(cfg.labevents_path(), cfg.d_labitems_path());
    t.diagnoses = cohort::load_diagnoses(cfg.diagnoses_path());
    log_info("loaded " + std::to_string(t.labs.events.size()) + " lab events (" +
             std::to_string(t.labs.dropped_missing) + " dropped missing, " + std::to_string(t.labs.dropped_unmapped) +
             " unmapped), " + std::to_string(t.diagnoses.size()) + " diagnoses");
    return t;
}

std::size_t test_patch_count(const PipelineConfig& cfg) {
    if (cfg.n_test_patches > 0) return cfg.n_test_patches;
    const double f = cfg.train_fraction;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(cfg.n_patches) * (1.0 - f) / f)));
}

std::size_t distinct(const std::vector<std::int64_t>& ids) { return std::set<std::int64_t>(ids.begin(), ids.end()).size(); }

struct EmbeddingRows {
    Eigen::MatrixXd coords;
    std::vector<int> labels;
};

EmbeddingRows read_embedding(const std::filesystem::path& path) {
    csv::Reader r(path);
    const auto i_label = r.require("label");
    const auto i_x = r.require("x");
    const auto i_y = r.require("y");
    std::vector<double> xs, ys;
    EmbeddingRows e;
    std::vector<std::string> f;
    while (r.next(f)) {
        auto l = csv::parse_int(f.at(i_label));
        auto x = csv::parse_double(f.at(i_x));
        auto y = csv::parse_double(f.at(i_y));
        if (!l || !x || !y) throw SchemaError("malformed row at " + path.string() + ":" + std::to_string(r.line()));
        e.labels.push_back(static_cast<int>(*l));
        xs.push_back(*x);
        ys.push_back(*y);
    }
    e.coords.resize(static_cast<Eigen::Index>(xs.size()), 2);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        e.coords(static_cast<Eigen::Index>(i), 0) = xs[i];
        e.coords(static_cast<Eigen::Index>(i), 1) = ys[i];
    }
    return e;
}

}  // namespace

void stage_synth(const PipelineConfig& cfg) {
    const auto dir = cfg.synthetic || cfg.data_dir.empty() ? cfg.output_dir / "synthetic" : cfg.data_dir;
    const auto t = generate_synthetic(cfg.synth, dir);
    log_info("wrote synthetic tables to " + dir.string());
}

void stage_cooccur(const PipelineConfig& cfg) {
    const auto t = load_tables(cfg);
    const auto m = cohort::cooccurrence(t.labs.events, t.diagnoses, cfg.cooccur_top_icd9, cfg.cooccur_top_loinc);
    cohort::write_cooccurrence_csv(cfg.out("cooccurrence.csv"), m);
}

void stage_cohort(const PipelineConfig& cfg) {
    const auto t = load_tables(cfg);
    const auto c = cohort::select_cohort(t.labs.events, t.diagnoses, cfg.loinc, cfg.cat_a, cfg.cat_b, cfg.min_samples);
    const auto& s = c.summary;
    log_info("cohort: " + std::to_string(s.selected_a) + " x " + cfg.cat_a + ", " + std::to_string(s.selected_b) +
             " x " + cfg.cat_b + "; excluded " + std::to_string(s.excluded_both) + " both, " +
             std::to_string(s.excluded_neither) + " neither, " + std::to_string(s.excluded_too_short) + " too short");
    auto [train, test] = cohort::split_cohort(c.series, cfg.train_fraction, stage_seed(cfg.seed, "split"));
    cohort::write_cohort_csv(cfg.out("cohort_train.csv"), train);
    cohort::write_cohort_csv(cfg.out("cohort_test.csv"), test);

    KeyValues kv;
    kv.set("selected_a", std::to_string(s.selected_a));
    kv.set("selected_b", std::to_string(s.selected_b));
    kv.set("excluded_both", std::to_string(s.excluded_both));
    kv.set("excluded_neither", std::to_string(s.excluded_neither));
    kv.set("excluded_too_short", std::to_string(s.excluded_too_short));
    kv.set("dropped_missing", std::to_string(t.labs.dropped_missing));
    kv.set("dropped_unmapped", std::to_string(t.labs.dropped_unmapped));
    kv.set("n_train", std::to_string(train.size()));
    kv.set("n_test", std::to_string(test.size()));
    kv.save(cfg.out("cohort_summary.txt"));
}

void stage_gpr_fit(const PipelineConfig& cfg) {
    require_file(cfg.out("cohort_train.csv"));
    const auto train = cohort::read_cohort_csv(cfg.out("cohort_train.csv"));
    std::vector<gpr::TrainingSeries> prepared;
    prepared.reserve(train.size());
    for (const auto& s : train) prepared.push_back(gpr::prepare(s, cfg.warp));
    const auto r = gpr::grid_search(prepared, cfg.grid, cfg.threads);
    gpr::write_hyperparams(cfg.out("hyperparams.txt"), r.best, r.best_lml, prepared.size());

    std::ofstream out(cfg.out("grid_objective.csv"));
    out << "grid_index,amplitude2,alpha,tau,noise2,total_lml\n";
    for (std::size_t p = 0; p < r.objective.size(); ++p) {
        const auto h = cfg.grid.at(p);
        out << p << ',' << csv::format_double(h.amplitude2) << ',' << csv::format_double(h.alpha) << ','
            << csv::format_double(h.tau) << ',' << csv::format_double(h.noise2) << ','
            << (std::isnan(r.objective[p]) ? std::string("nan") : csv::format_double(r.objective[p])) << '\n';
    }
}

void stage_interpolate(const PipelineConfig& cfg) {
    for (const char* f : {"hyperparams.txt", "cohort_train.csv", "cohort_test.csv"}) require_file(cfg.out(f));
    const auto h = gpr::read_hyperparams(cfg.out("hyperparams.txt"));
    for (const char* split : {"train", "test"}) {
        const auto series = cohort::read_cohort_csv(cfg.out(std::string("cohort_") + split + ".csv"));
        const auto interp = gpr::interpolate_all(series, h, cfg.warp, cfg.interval_days, cfg.pad_samples, cfg.threads);
        gpr::write_interpolated_csv(cfg.out(std::string("interp_") + split + ".csv"), interp);
    }
}

void stage_train_ae(const PipelineConfig& cfg) {
    for (const char* f : {"interp_train.csv", "interp_test.csv"}) require_file(cfg.out(f));
    const auto train = gpr::read_interpolated_csv(cfg.out("interp_train.csv"));
    const auto test = gpr::read_interpolated_csv(cfg.out("interp_test.csv"));
    const auto p_train = ae::sample_patches(train, cfg.patch_len, cfg.n_patches, stage_seed(cfg.seed, "patches.train"));
    const auto p_test =
        ae::sample_patches(test, cfg.patch_len, test_patch_count(cfg), stage_seed(cfg.seed, "patches.test"));
    ae::write_patches_csv(cfg.out("patches_train.csv"), p_train);
    ae::write_patches_csv(cfg.out("patches_test.csv"), p_test);

    const auto scaler = ae::PatchScaler::fit(p_train);
    scaler.save(cfg.out("patch_scaler.txt"));
    const auto t = ae::train_stacked(scaler.apply(p_train), cfg.train, cfg.hidden_units);
    ae::save_model(cfg.out("model.sae"), t.model);
    ae::write_training_log(cfg.out("ae_training_log.csv"), t);
    log_info("autoencoder: layer1 loss " + csv::format_double(t.layer1.train_loss.front()) + " -> " +
             csv::format_double(t.layer1.train_loss.back()) + ", fine-tune best epoch " +
             std::to_string(t.fine_tune.best_epoch));
}

void stage_features(const PipelineConfig& cfg) {
    for (const char* f : {"patches_train.csv", "patches_test.csv", "patch_scaler.txt", "model.sae"}) {
        require_file(cfg.out(f));
    }
    const auto model = ae::load_model(cfg.out("model.sae"));
    const auto scaler = ae::PatchScaler::load(cfg.out("patch_scaler.txt"));
    for (const char* split : {"train", "test"}) {
        const auto p = ae::read_patches_csv(cfg.out(std::string("patches_") + split + ".csv"));
        const Eigen::MatrixXd x = scaler.apply(p);
        for (int layer : {1, 2}) {
            ae::write_features_csv(cfg.out("features_layer" + std::to_string(layer) + "_" + split + ".csv"), p,
                                   ae::encode(model, x, layer));
        }
    }
}

void stage_analyze(const PipelineConfig& cfg) {
    for (const char* f : {"cohort_train.csv", "cohort_test.csv"}) require_file(cfg.out(f));
    const std::size_t n_train = cohort::read_cohort_csv(cfg.out("cohort_train.csv")).size();
    const std::size_t n_test = cohort::read_cohort_csv(cfg.out("cohort_test.csv")).size();

    KeyValues metrics;
    std::map<std::string, std::string> extra;
    for (int layer : {1, 2}) {
        const std::string tag = "layer" + std::to_string(layer);
        for (const char* split : {"train", "test"}) require_file(cfg.out("features_" + tag + "_" + split + ".csv"));
        const auto train = ae::read_features_csv(cfg.out("features_" + tag + "_train.csv"));
        const auto test = ae::read_features_csv(cfg.out("features_" + tag + "_test.csv"));

        const auto model = analysis::fit_logistic(train.features, train.label, cfg.logistic_l2, cfg.logistic_iterations);
        const Eigen::VectorXd scores = model.decision(test.features);
        const std::span<const double> s(scores.data(), static_cast<std::size_t>(scores.size()));
        metrics.set("auc_" + tag, csv::format_double(analysis::auc(s, test.label)));
        extra["logistic_gradient_norm_" + tag] = csv::format_double(model.gradient_norm);
        if (cfg.auc_per_admission) {
            const auto agg = analysis::aggregate_by_admission(s, test.hadm_id, test.label);
            extra["auc_" + tag + "_admission"] = csv::format_double(analysis::auc(agg.score, agg.label));
        }

        // Embed a seeded subsample of the test features.
        std::vector<std::size_t> rows(test.label.size());
        std::iota(rows.begin(), rows.end(), 0);
        if (rows.size() > cfg.tsne_max_points) {
            std::mt19937_64 rng(stage_seed(cfg.seed, "tsne.subsample"));
            std::shuffle(rows.begin(), rows.end(), rng);
            rows.resize(cfg.tsne_max_points);
            std::sort(rows.begin(), rows.end());
        }
        Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), test.features.cols());
        std::vector<int> labels;
        std::vector<std::size_t> ids;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            x.row(static_cast<Eigen::Index>(i)) = test.features.row(static_cast<Eigen::Index>(rows[i]));
            labels.push_back(test.label[rows[i]]);
            ids.push_back(test.patch_id[rows[i]]);
        }
        auto params = cfg.tsne;
        const double max_perplexity = (static_cast<double>(rows.size()) - 1.0) / 3.0;
        if (params.perplexity >= max_perplexity) {
            params.perplexity = 0.9 * max_perplexity;
            log_warn("tsne: perplexity lowered to " + csv::format_double(params.perplexity) + " for " +
                     std::to_string(rows.size()) + " points");
        }
        const auto emb = analysis::tsne(x, params);
        analysis::write_embedding_csv(cfg.out("embedding_" + tag + ".csv"), emb, ids, labels);
        extra["tsne_kl_" + tag] = csv::format_double(emb.kl_divergence);
        extra["tsne_nn_accuracy_" + tag] = csv::format_double(analysis::nearest_neighbor_accuracy(emb.coords, labels));
        if (layer == 2) {
            metrics.set("tsne_kl", csv::format_double(emb.kl_divergence));
            metrics.set("n_train", std::to_string(n_train));
            metrics.set("n_test", std::to_string(n_test));
            metrics.set("n_train_patches", std::to_string(train.label.size()));
            metrics.set("n_test_patches", std::to_string(test.label.size()));
            extra["n_train_admissions_sampled"] = std::to_string(distinct(train.hadm_id));
            extra["n_test_admissions_sampled"] = std::to_string(distinct(test.hadm_id));
        }
    }
    for (const auto& [k, v] : extra) metrics.set(k, v);
    metrics.save(cfg.out("metrics.txt"));
}

void stage_plot(const PipelineConfig& cfg) {
    for (const char* f : {"cohort_train.csv", "interp_train.csv", "model.sae", "embedding_layer1.csv",
                          "embedding_layer2.csv"}) {
        if (!std::filesystem::is_regular_file(cfg.out(f))) throw IoError("missing stage output: " + cfg.out(f).string());
    }
    const auto dir = cfg.out("plots");
    std::filesystem::create_directories(dir);

    const auto cohort_rows = cohort::read_cohort_csv(cfg.out("cohort_train.csv"));
    const auto interp = gpr::read_interpolated_csv(cfg.out("interp_train.csv"));
    const std::size_t n = std::min({cfg.plot_series, cohort_rows.size(), interp.size()});
    for (std::size_t i = 0; i < n; ++i) {
        if (interp[i].hadm_id != cohort_rows[i].hadm_id) throw SchemaError("cohort and interpolation files disagree");
        const auto warped = preprocess::warp_times(cohort_rows[i].times, cfg.warp);
        plot::write_svg(dir / ("series_" + std::to_string(cohort_rows[i].hadm_id) + ".svg"),
                        plot::series_overlay_svg(cohort_rows[i], warped, interp[i]));
    }

    const auto model = ae::load_model(cfg.out("model.sae"));
    plot::write_svg(dir / "signatures_layer1.svg",
                    plot::signature_grid_svg(ae::first_layer_signatures(model), model.input_dim() / 2));
    for (int layer : {1, 2}) {
        const std::string tag = "layer" + std::to_string(layer);
        const auto e = read_embedding(cfg.out("embedding_" + tag + ".csv"));
        plot::write_svg(dir / ("tsne_" + tag + ".svg"), plot::scatter_svg(e.coords, e.labels, "t-SNE, " + tag + " features"));
    }
}

std::vector<std::string> stage_outputs(const std::string& stage) {
    if (stage == "synth") return {"synthetic/LABEVENTS.csv", "synthetic/DIAGNOSES_ICD.csv", "synthetic/D_LABITEMS.csv",
                                  "synthetic/D_ICD_DIAGNOSES.csv"};
    if (stage == "cooccur") return {"cooccurrence.csv"};
    if (stage == "cohort") return {"cohort_train.csv", "cohort_test.csv", "cohort_summary.txt"};
    if (stage == "gpr-fit") return {"hyperparams.txt", "grid_objective.csv"};
    if (stage == "interpolate") return {"interp_train.csv", "interp_test.csv"};
    if (stage == "train-ae") return {"patches_train.csv", "patches_test.csv", "patch_scaler.txt", "model.sae",
                                     "ae_training_log.csv"};
    if (stage == "features") return {"features_layer1_train.csv", "features_layer1_test.csv",
                                     "features_layer2_train.csv", "features_layer2_test.csv"};
    if (stage == "analyze") return {"embedding_layer1.csv", "embedding_layer2.csv", "metrics.txt"};
    if (stage == "plot") return {"plots/signatures_layer1.svg", "plots/tsne_layer1.svg", "plots/tsne_layer2.svg"};
    throw ParameterError("unknown stage '" + stage + "'");
}

void run_pipeline(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.output_dir);
    RunLock lock(cfg.output_dir);
    cfg.to_kv().save(cfg.out("config.resolved.txt"));

    const std::pair<const char*, std::function<void(const PipelineConfig&)>> stages[] = {
        {"synth", stage_synth},       {"cooccur", stage_cooccur},   {"cohort", stage_cohort},
        {"gpr-fit", stage_gpr_fit},   {"interpolate", stage_interpolate}, {"train-ae", stage_train_ae},
        {"features", stage_features}, {"analyze", stage_analyze},   {"plot", stage_plot}};

    for (const auto& [name, fn] : stages) {
        if (std::string(name) == "synth" && !cfg.synthetic) continue;
        if (cfg.resume) {
            const auto outs = stage_outputs(name);
            const bool done = std::all_of(outs.begin(), outs.end(),
                                          [&](const std::string& f) { return std::filesystem::exists(cfg.out(f)); });
            if (done) {
                log_info(std::string("stage ") + name + ": outputs present, skipping");
                continue;
            }
        }
        log_info(std::string("stage ") + name);
        const auto start = std::chrono::steady_clock::now();
        try {
            fn(cfg);
        } catch (const Error& e) {
            throw Error(e.code(), std::string("stage '") + name + "': " + e.what());
        } catch (const std::exception& e) {
            throw Error(ExitCode::kData, std::string("stage '") + name + "': " + e.what());
        }
        const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
        log_info(std::string("stage ") + name + " done in " + csv::format_double(std::round(took.count() * 100) / 100) + " s");
    }
}

RunLock::RunLock(const std::filesystem::path& dir) : path_(dir / ".pheno.lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        throw ParameterError("output directory is in use (lock file " + path_.string() +
                             " exists; remove it if no other run is active)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

RunLock::~RunLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
}

}  // namespace pheno
