#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pheno/analysis.hpp"
#include "pheno/autoencoder.hpp"
#include "pheno/gpr.hpp"
#include "pheno/kv.hpp"
#include "pheno/preprocess.hpp"

namespace pheno {

// ---------------------------------------------------------------------------
// Synthetic cohorts

struct SyntheticSpec {
    std::size_t n_per_class = 100;
    std::size_t min_samples = 4;
    std::size_t max_samples = 12;
    double mean_gap_days = 1.0;  // mean of the exponential gap distribution
    double noise = 2.0;          // std of additive Gaussian noise (IU/L)
    std::uint64_t seed = 0;
};

void validate(const SyntheticSpec& spec);

/// Class signature in IU/L at `t_days` after the first sample: class 0 is a
/// rising ramp, class 1 a decaying spike.
double synthetic_class_mean(int label, double t_days);

struct SyntheticTables {
    std::filesystem::path labevents;
    std::filesystem::path diagnoses;
    std::filesystem::path d_labitems;
    std::filesystem::path d_icd_diagnoses;
};

inline constexpr std::int64_t kSyntheticItemId = 50861;
inline constexpr const char* kSyntheticLoinc = "1742-6";
inline constexpr const char* kSyntheticCategoryA = "428";
inline constexpr const char* kSyntheticCategoryB = "571";

/// Writes MIMIC-shaped LABEVENTS, DIAGNOSES_ICD, D_LABITEMS and
/// D_ICD_DIAGNOSES tables into `dir`. Class 0 admissions carry category 428,
/// class 1 carry 571.
SyntheticTables generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Configuration

struct PipelineConfig {
    // inputs
    std::filesystem::path data_dir;  // default location of the four tables
    std::filesystem::path labevents;
    std::filesystem::path diagnoses;
    std::filesystem::path d_labitems;
    std::filesystem::path d_icd_diagnoses;
    std::filesystem::path output_dir = "run";
    bool synthetic = false;  // generate tables into output_dir/synthetic first
    SyntheticSpec synth;

    // cohort
    std::string loinc = "1742-6";
    std::string cat_a = "428";
    std::string cat_b = "571";
    std::size_t min_samples = 3;
    double train_fraction = 0.7;
    std::size_t cooccur_top_icd9 = 12;
    std::size_t cooccur_top_loinc = 4;

    // preprocessing and regression
    preprocess::WarpParams warp;
    gpr::GridSpec grid;
    double interval_days = 0.25;
    std::size_t pad_samples = 10;

    // feature learning
    std::size_t patch_len = 20;
    std::size_t n_patches = 2000;
    std::size_t n_test_patches = 0;  // 0: scale n_patches by the split ratio
    std::size_t hidden_units = ae::kHiddenUnits;
    ae::TrainConfig train;

    // analysis
    analysis::TsneParams tsne;
    std::size_t tsne_max_points = 1000;
    double logistic_l2 = 0.01;
    std::size_t logistic_iterations = 2000;
    bool auc_per_admission = false;

    std::size_t plot_series = 4;
    std::uint64_t seed = 42;
    bool resume = false;
    unsigned threads = 0;

    /// Builds a config from key/value pairs; unknown keys are rejected.
    static PipelineConfig from(const KeyValues& kv);
    KeyValues to_kv() const;

    std::filesystem::path table(const std::filesystem::path& explicit_path, const char* default_name) const;
    std::filesystem::path labevents_path() const { return table(labevents, "LABEVENTS.csv"); }
    std::filesystem::path diagnoses_path() const { return table(diagnoses, "DIAGNOSES_ICD.csv"); }
    std::filesystem::path d_labitems_path() const { return table(d_labitems, "D_LABITEMS.csv"); }
    std::filesystem::path d_icd_diagnoses_path() const { return table(d_icd_diagnoses, "D_ICD_DIAGNOSES.csv"); }
    std::filesystem::path out(const std::string& name) const { return output_dir / name; }
};

/// Keys accepted by PipelineConfig::from, with defaults.
std::vector<std::string> config_keys();

// ---------------------------------------------------------------------------
// Stages. Each reads its inputs from and writes its outputs to output_dir.

void stage_synth(const PipelineConfig& cfg);
void stage_cooccur(const PipelineConfig& cfg);
void stage_cohort(const PipelineConfig& cfg);
void stage_gpr_fit(const PipelineConfig& cfg);
void stage_interpolate(const PipelineConfig& cfg);
void stage_train_ae(const PipelineConfig& cfg);
void stage_features(const PipelineConfig& cfg);
void stage_analyze(const PipelineConfig& cfg);
void stage_plot(const PipelineConfig& cfg);

/// Output files of a named stage, relative to output_dir.
std::vector<std::string> stage_outputs(const std::string& stage);

/// Full pipeline. With cfg.resume, stages whose outputs all exist are skipped.
/// Errors are rethrown with the failing stage named.
void run_pipeline(const PipelineConfig& cfg);

/// Exclusive lock on an output directory for the lifetime of the object.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path path_;
};

}  // namespace pheno
