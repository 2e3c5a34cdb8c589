#include <set>
#include <sstream>

#include "pheno/common.hpp"
#include "pheno/csv.hpp"
#include "pheno/pipeline.hpp"

namespace pheno {

namespace {

std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + csv::format_double(v[i]);
    return out;
}

std::size_t count(const KeyValues& kv, const std::string& key, std::size_t fallback) {
    const long long v = kv.get_int_or(key, static_cast<long long>(fallback));
    if (v < 0) throw ParameterError("key '" + key + "' must be >= 0");
    return static_cast<std::size_t>(v);
}

std::uint64_t seed_value(const KeyValues& kv, const std::string& key, std::uint64_t fallback) {
    if (!kv.has(key)) return fallback;
    const std::string text = kv.get(key);
    if (text.empty() || text[0] == '-' || text[0] == '+') {
        throw ParameterError("key '" + key + "' is not an unsigned integer: '" + text + "'");
    }
    try {
        std::size_t pos = 0;
        const auto v = std::stoull(text, &pos);
        if (pos == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw ParameterError("key '" + key + "' is not an unsigned integer: '" + text + "'");
}

}  // namespace

std::vector<std::string> config_keys() {
    return {"data_dir", "labevents", "diagnoses", "d_labitems", "d_icd_diagnoses", "output_dir", "synthetic",
            "synth_n_per_class", "synth_min_samples", "synth_max_samples", "synth_mean_gap_days", "synth_noise",
            "loinc", "cat_a", "cat_b", "min_samples", "train_fraction", "cooccur_top_icd9", "cooccur_top_loinc",
            "warp_a", "warp_b", "grid_amplitude2", "grid_tau", "grid_alpha", "grid_noise2", "interval_days",
            "pad_samples", "patch_len", "n_patches", "n_test_patches", "hidden_units", "ae_l1_activity",
            "ae_l2_weight", "ae_epochs", "ae_learning_rate", "ae_batch_size", "ae_validation_fraction",
            "tsne_perplexity", "tsne_iterations", "tsne_learning_rate", "tsne_early_exaggeration",
            "tsne_exaggeration_iterations", "tsne_max_points", "logistic_l2", "logistic_iterations",
            "auc_per_admission", "plot_series", "seed", "resume", "threads"};
}

PipelineConfig PipelineConfig::from(const KeyValues& kv) {
    const auto keys = config_keys();
    const std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [key, value] : kv.entries()) {
        if (known.count(key) == 0) throw ParameterError("unknown config key '" + key + "'");
    }

    PipelineConfig c;
    c.data_dir = kv.get_or("data_dir", "");
    c.labevents = kv.get_or("labevents", "");
    c.diagnoses = kv.get_or("diagnoses", "");
    c.d_labitems = kv.get_or("d_labitems", "");
    c.d_icd_diagnoses = kv.get_or("d_icd_diagnoses", "");
    c.output_dir = kv.get_or("output_dir", c.output_dir.string());
    c.synthetic = kv.get_bool_or("synthetic", c.synthetic);
    c.synth.n_per_class = count(kv, "synth_n_per_class", c.synth.n_per_class);
    c.synth.min_samples = count(kv, "synth_min_samples", c.synth.min_samples);
    c.synth.max_samples = count(kv, "synth_max_samples", c.synth.max_samples);
    c.synth.mean_gap_days = kv.get_double_or("synth_mean_gap_days", c.synth.mean_gap_days);
    c.synth.noise = kv.get_double_or("synth_noise", c.synth.noise);

    c.loinc = kv.get_or("loinc", c.loinc);
    c.cat_a = kv.get_or("cat_a", c.cat_a);
    c.cat_b = kv.get_or("cat_b", c.cat_b);
    c.min_samples = count(kv, "min_samples", c.min_samples);
    c.train_fraction = kv.get_double_or("train_fraction", c.train_fraction);
    c.cooccur_top_icd9 = count(kv, "cooccur_top_icd9", c.cooccur_top_icd9);
    c.cooccur_top_loinc = count(kv, "cooccur_top_loinc", c.cooccur_top_loinc);

    c.warp.a = kv.get_double_or("warp_a", c.warp.a);
    c.warp.b = kv.get_double_or("warp_b", c.warp.b);
    c.grid.amplitude2 = kv.get_doubles_or("grid_amplitude2", c.grid.amplitude2);
    c.grid.tau = kv.get_doubles_or("grid_tau", c.grid.tau);
    c.grid.alpha = kv.get_doubles_or("grid_alpha", c.grid.alpha);
    c.grid.noise2 = kv.get_doubles_or("grid_noise2", c.grid.noise2);
    c.interval_days = kv.get_double_or("interval_days", c.interval_days);
    c.pad_samples = count(kv, "pad_samples", c.pad_samples);

    c.patch_len = count(kv, "patch_len", c.patch_len);
    c.n_patches = count(kv, "n_patches", c.n_patches);
    c.n_test_patches = count(kv, "n_test_patches", c.n_test_patches);
    c.hidden_units = count(kv, "hidden_units", c.hidden_units);
    c.train.l1_activity = kv.get_double_or("ae_l1_activity", c.train.l1_activity);
    c.train.l2_weight = kv.get_double_or("ae_l2_weight", c.train.l2_weight);
    c.train.epochs = count(kv, "ae_epochs", c.train.epochs);
    c.train.learning_rate = kv.get_double_or("ae_learning_rate", c.train.learning_rate);
    c.train.batch_size = count(kv, "ae_batch_size", c.train.batch_size);
    c.train.validation_fraction = kv.get_double_or("ae_validation_fraction", c.train.validation_fraction);

    c.tsne.perplexity = kv.get_double_or("tsne_perplexity", c.tsne.perplexity);
    c.tsne.iterations = count(kv, "tsne_iterations", c.tsne.iterations);
    c.tsne.learning_rate = kv.get_double_or("tsne_learning_rate", c.tsne.learning_rate);
    c.tsne.early_exaggeration = kv.get_double_or("tsne_early_exaggeration", c.tsne.early_exaggeration);
    c.tsne.exaggeration_iterations = count(kv, "tsne_exaggeration_iterations", c.tsne.exaggeration_iterations);
    c.tsne_max_points = count(kv, "tsne_max_points", c.tsne_max_points);
    c.logistic_l2 = kv.get_double_or("logistic_l2", c.logistic_l2);
    c.logistic_iterations = count(kv, "logistic_iterations", c.logistic_iterations);
    c.auc_per_admission = kv.get_bool_or("auc_per_admission", c.auc_per_admission);

    c.plot_series = count(kv, "plot_series", c.plot_series);
    c.seed = seed_value(kv, "seed", c.seed);
    c.resume = kv.get_bool_or("resume", c.resume);
    c.threads = static_cast<unsigned>(count(kv, "threads", c.threads));

    // Stage seeds fan out from the master seed.
    c.synth.seed = stage_seed(c.seed, "synth");
    c.train.seed = stage_seed(c.seed, "autoencoder");
    c.tsne.seed = stage_seed(c.seed, "tsne");

    preprocess::validate(c.warp);
    ae::validate(c.train);
    if (!(c.interval_days > 0.0)) throw ParameterError("interval_days must be > 0");
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw ParameterError("train_fraction must be in (0, 1)");
    if (c.patch_len == 0 || c.n_patches == 0) throw ParameterError("patch_len and n_patches must be >= 1");
    if (c.hidden_units == 0) throw ParameterError("hidden_units must be >= 1");
    if (c.cat_a == c.cat_b) throw ParameterError("cat_a and cat_b must differ");
    for (const auto* axis : {&c.grid.amplitude2, &c.grid.tau, &c.grid.alpha, &c.grid.noise2}) {
        for (double v : *axis) {
            if (!(v > 0.0)) throw ParameterError("grid values must be > 0");
        }
    }
    return c;
}

KeyValues PipelineConfig::to_kv() const {
    KeyValues kv;
    kv.set("data_dir", data_dir.string());
    kv.set("labevents", labevents.string());
    kv.set("diagnoses", diagnoses.string());
    kv.set("d_labitems", d_labitems.string());
    kv.set("d_icd_diagnoses", d_icd_diagnoses.string());
    kv.set("output_dir", output_dir.string());
    kv.set("synthetic", synthetic ? "true" : "false");
    kv.set("synth_n_per_class", std::to_string(synth.n_per_class));
    kv.set("synth_min_samples", std::to_string(synth.min_samples));
    kv.set("synth_max_samples", std::to_string(synth.max_samples));
    kv.set("synth_mean_gap_days", csv::format_double(synth.mean_gap_days));
    kv.set("synth_noise", csv::format_double(synth.noise));
    kv.set("loinc", loinc);
    kv.set("cat_a", cat_a);
    kv.set("cat_b", cat_b);
    kv.set("min_samples", std::to_string(min_samples));
    kv.set("train_fraction", csv::format_double(train_fraction));
    kv.set("cooccur_top_icd9", std::to_string(cooccur_top_icd9));
    kv.set("cooccur_top_loinc", std::to_string(cooccur_top_loinc));
    kv.set("warp_a", csv::format_double(warp.a));
    kv.set("warp_b", csv::format_double(warp.b));
    kv.set("grid_amplitude2", join(grid.amplitude2));
    kv.set("grid_tau", join(grid.tau));
    kv.set("grid_alpha", join(grid.alpha));
    kv.set("grid_noise2", join(grid.noise2));
    kv.set("interval_days", csv::format_double(interval_days));
    kv.set("pad_samples", std::to_string(pad_samples));
    kv.set("patch_len", std::to_string(patch_len));
    kv.set("n_patches", std::to_string(n_patches));
    kv.set("n_test_patches", std::to_string(n_test_patches));
    kv.set("hidden_units", std::to_string(hidden_units));
    kv.set("ae_l1_activity", csv::format_double(train.l1_activity));
    kv.set("ae_l2_weight", csv::format_double(train.l2_weight));
    kv.set("ae_epochs", std::to_string(train.epochs));
    kv.set("ae_learning_rate", csv::format_double(train.learning_rate));
    kv.set("ae_batch_size", std::to_string(train.batch_size));
    kv.set("ae_validation_fraction", csv::format_double(train.validation_fraction));
    kv.set("tsne_perplexity", csv::format_double(tsne.perplexity));
    kv.set("tsne_iterations", std::to_string(tsne.iterations));
    kv.set("tsne_learning_rate", csv::format_double(tsne.learning_rate));
    kv.set("tsne_early_exaggeration", csv::format_double(tsne.early_exaggeration));
    kv.set("tsne_exaggeration_iterations", std::to_string(tsne.exaggeration_iterations));
    kv.set("tsne_max_points", std::to_string(tsne_max_points));
    kv.set("logistic_l2", csv::format_double(logistic_l2));
    kv.set("logistic_iterations", std::to_string(logistic_iterations));
    kv.set("auc_per_admission", auc_per_admission ? "true" : "false");
    kv.set("plot_series", std::to_string(plot_series));
    kv.set("seed", std::to_string(seed));
    kv.set("resume", resume ? "true" : "false");
    kv.set("threads", std::to_string(threads));
    return kv;
}

std::filesystem::path PipelineConfig::table(const std::filesystem::path& explicit_path,
                                            const char* default_name) const {
    if (!explicit_path.empty()) return explicit_path;
    if (synthetic) return output_dir / "synthetic" / default_name;
    std::filesystem::path p = data_dir / default_name;
    // Accept the gzip-compressed variant when only that exists.
    if (!std::filesystem::exists(p)) {
        std::filesystem::path gz = p;
        gz += ".gz";
        if (std::filesystem::exists(gz)) return gz;
    }
    return p;
}

}  // namespace pheno
