#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace pheno::cohort {

struct LabEvent {
    std::int64_t subject_id = 0;
    std::int64_t hadm_id = 0;
    std::int64_t item_id = 0;
    std::string loinc_code;
    std::int64_t charttime = 0;  // seconds since 1970-01-01 (proleptic UTC)
    double value = 0.0;
};

struct Diagnosis {
    std::int64_t subject_id = 0;
    std::int64_t hadm_id = 0;
    std::string icd9_code;
    std::string icd9_category;
};

/// One admission's lab series. Times are days since the first sample.
struct LabSeries {
    std::int64_t hadm_id = 0;
    std::int64_t subject_id = 0;
    std::vector<double> times;
    std::vector<double> values;
    int label = 0;  // 0 = first category, 1 = second
};

struct CooccurrenceMatrix {
    std::vector<std::string> icd9_categories;
    std::vector<std::string> loinc_codes;
    std::vector<std::vector<std::int64_t>> counts;  // [category][code]

    bool empty() const { return icd9_categories.empty() || loinc_codes.empty(); }
};

struct LabEventTable {
    std::vector<LabEvent> events;
    std::size_t dropped_missing = 0;   // empty/non-numeric value or missing admission
    std::size_t dropped_unmapped = 0;  // item without a LOINC code
};

struct CohortSummary {
    std::size_t selected_a = 0;
    std::size_t selected_b = 0;
    std::size_t excluded_both = 0;       // diagnoses in both categories
    std::size_t excluded_neither = 0;    // has the lab, neither category
    std::size_t excluded_too_short = 0;  // qualifying category, too few samples
};

struct Cohort {
    std::vector<LabSeries> series;  // ascending hadm_id
    CohortSummary summary;
};

/// Parses "YYYY-MM-DD HH:MM:SS" (a bare date is accepted as midnight).
/// Throws PreconditionError on malformed text.
std::int64_t parse_timestamp(const std::string& text);
std::string format_timestamp(std::int64_t seconds);

/// Three-character ICD-9 category, keeping any V/E prefix ("V4581" -> "V45").
std::string icd9_category(const std::string& code);

/// Reads D_LABITEMS (ITEMID, LOINC_CODE). Items with empty codes are omitted.
std::map<std::int64_t, std::string> load_loinc_map(const std::filesystem::path& path);

/// Reads LABEVENTS and joins each row to its LOINC code.
LabEventTable load_lab_events(const std::filesystem::path& path, const std::filesystem::path& loinc_map_path);

std::vector<Diagnosis> load_diagnoses(const std::filesystem::path& path);

/// Reads D_ICD_DIAGNOSES (ICD9_CODE, SHORT_TITLE).
std::map<std::string, std::string> load_icd9_titles(const std::filesystem::path& path);

/// Admission counts for every (ICD-9 category, LOINC code) pair, truncated to
/// the top categories and codes by distinct-admission count.
CooccurrenceMatrix cooccurrence(const std::vector<LabEvent>& events, const std::vector<Diagnosis>& diagnoses,
                                std::size_t top_icd9, std::size_t top_loinc);

/// Two-class cohort: admissions with at least `min_samples` distinct-time
/// samples of `loinc` and diagnoses in exactly one of the two categories.
Cohort select_cohort(const std::vector<LabEvent>& events, const std::vector<Diagnosis>& diagnoses,
                     const std::string& loinc, const std::string& cat_a, const std::string& cat_b,
                     std::size_t min_samples = 3);

/// Random disjoint split; |train| = round(train_fraction * n). Each part is
/// returned in ascending hadm_id order.
std::pair<std::vector<LabSeries>, std::vector<LabSeries>> split_cohort(const std::vector<LabSeries>& cohort,
                                                                       double train_fraction, std::uint64_t seed);

/// Long-format CSV: hadm_id,label,t_days,value.
void write_cohort_csv(const std::filesystem::path& path, const std::vector<LabSeries>& series);
std::vector<LabSeries> read_cohort_csv(const std::filesystem::path& path);

void write_cooccurrence_csv(const std::filesystem::path& path, const CooccurrenceMatrix& m);

/// Checks LabSeries invariants; throws PreconditionError naming the admission.
void validate(const LabSeries& s, std::size_t min_samples = 3);

}  // namespace pheno::cohort
