// pheno: command-line front end for the phenotyping pipeline.
#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "pheno/common.hpp"
#include "pheno/pipeline.hpp"

namespace {

using StageFn = void (*)(const pheno::PipelineConfig&);

const std::map<std::string, std::pair<StageFn, const char*>>& stages() {
    static const std::map<std::string, std::pair<StageFn, const char*>> m = {
        {"synth", {pheno::stage_synth, "write a synthetic two-class cohort (MIMIC-shaped tables)"}},
        {"cooccur", {pheno::stage_cooccur, "ICD-9 category by LOINC co-occurrence counts"}},
        {"cohort", {pheno::stage_cohort, "select the two-category cohort and split train/test"}},
        {"gpr-fit", {pheno::stage_gpr_fit, "grid-search GPR hyperparameters on the training split"}},
        {"interpolate", {pheno::stage_interpolate, "GPR-interpolate both splits onto a regular grid"}},
        {"train-ae", {pheno::stage_train_ae, "sample patches and train the stacked autoencoder"}},
        {"features", {pheno::stage_features, "encode patches with layer 1 and layer 2"}},
        {"analyze", {pheno::stage_analyze, "t-SNE embeddings, logistic regression and AUC"}},
        {"plot", {pheno::stage_plot, "write SVG figures from a run directory"}},
    };
    return m;
}

// Turns leftover "--key=value" / "--key value" arguments into overrides.
void apply_overrides(const std::vector<std::string>& extras, pheno::KeyValues& kv) {
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& a = extras[i];
        if (a.rfind("--", 0) != 0 || a.size() < 3) throw pheno::ParameterError("unexpected argument '" + a + "'");
        std::string body = a.substr(2);
        const auto eq = body.find('=');
        std::string key, value;
        if (eq != std::string::npos) {
            key = body.substr(0, eq);
            value = body.substr(eq + 1);
        } else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
            key = body;
            value = extras[++i];
        } else {
            key = body;
            value = "true";
        }
        for (auto& c : key) {
            if (c == '-') c = '_';
        }
        kv.set(key, value);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Computational phenotyping from irregular lab time series"};
    app.require_subcommand(1);
    std::string config_path;
    std::string log_level = "info";
    app.add_option("-c,--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--log-level", log_level, "quiet, warn, info or debug");

    std::map<CLI::App*, std::string> subs;
    for (const auto& [name, entry] : stages()) {
        auto* s = app.add_subcommand(name, entry.second);
        s->allow_extras();
        subs[s] = name;
    }
    auto* run = app.add_subcommand("run", "run every stage in order");
    run->allow_extras();
    auto* keys = app.add_subcommand("keys", "list config keys with their defaults");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(pheno::ExitCode::kUsage);
    }

    try {
        if (log_level == "quiet") pheno::set_log_level(pheno::LogLevel::kSilent);
        else if (log_level == "warn") pheno::set_log_level(pheno::LogLevel::kWarn);
        else if (log_level == "debug") pheno::set_log_level(pheno::LogLevel::kDebug);
        else if (log_level != "info") throw pheno::ParameterError("unknown log level '" + log_level + "'");

        if (keys->parsed()) {
            std::cout << pheno::PipelineConfig{}.to_kv().str();
            return 0;
        }

        pheno::KeyValues kv;
        if (!config_path.empty()) kv = pheno::KeyValues::load(config_path);
        CLI::App* chosen = app.get_subcommands().front();
        apply_overrides(chosen->remaining(), kv);
        const auto cfg = pheno::PipelineConfig::from(kv);

        if (chosen == run) {
            pheno::run_pipeline(cfg);
        } else {
            const auto& name = subs.at(chosen);
            std::filesystem::create_directories(cfg.output_dir);
            pheno::RunLock lock(cfg.output_dir);
            stages().at(name).first(cfg);
        }
        return 0;
    } catch (const pheno::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(pheno::ExitCode::kData);
    }
}
