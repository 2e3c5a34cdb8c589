#include <cmath>
#include <fstream>
#include <random>

#include "pheno/cohort.hpp"
#include "pheno/common.hpp"
#include "pheno/csv.hpp"
#include "pheno/pipeline.hpp"

namespace pheno {

namespace {

constexpr std::int64_t kAlbuminItem = 50862;
constexpr const char* kAlbuminLoinc = "1751-7";
constexpr std::int64_t kFirstHadm = 100000;
constexpr std::int64_t kFirstSubject = 10000;

std::ofstream open_table(const std::filesystem::path& path, const char* header) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << header << '\n';
    return out;
}

}  // namespace

void validate(const SyntheticSpec& spec) {
    if (spec.n_per_class < 2) throw ParameterError("synthetic: n_per_class must be >= 2");
    if (spec.min_samples < 3 || spec.max_samples < spec.min_samples) {
        throw ParameterError("synthetic: need 3 <= min_samples <= max_samples");
    }
    if (!(spec.noise >= 0.0)) throw ParameterError("synthetic: noise must be >= 0");
    if (!(spec.mean_gap_days > 0.0)) throw ParameterError("synthetic: mean_gap_days must be > 0");
}

double synthetic_class_mean(int label, double t_days) {
    if (label == 0) return 30.0 + 8.0 * t_days;
    return 40.0 + 160.0 * std::exp(-t_days / 1.5);
}

SyntheticTables generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir) {
    validate(spec);
    std::filesystem::create_directories(dir);
    SyntheticTables t{dir / "LABEVENTS.csv", dir / "DIAGNOSES_ICD.csv", dir / "D_LABITEMS.csv",
                      dir / "D_ICD_DIAGNOSES.csv"};

    {
        auto out = open_table(t.d_labitems, "ROW_ID,ITEMID,LABEL,FLUID,CATEGORY,LOINC_CODE");
        out << "1," << kSyntheticItemId << ",Alanine Aminotransferase (ALT),Blood,Chemistry," << kSyntheticLoinc
            << '\n';
        out << "2," << kAlbuminItem << ",Albumin,Blood,Chemistry," << kAlbuminLoinc << '\n';
    }
    {
        auto out = open_table(t.d_icd_diagnoses, "ROW_ID,ICD9_CODE,SHORT_TITLE,LONG_TITLE");
        out << "1,4280,CHF NOS,\"Congestive heart failure, unspecified\"\n";
        out << "2,5715,Cirrhosis of liver NOS,Cirrhosis of liver without mention of alcohol\n";
        out << "3,4019,Hypertension NOS,Unspecified essential hypertension\n";
    }

    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<std::size_t> n_samples(spec.min_samples, spec.max_samples);
    std::exponential_distribution<double> gap(1.0 / spec.mean_gap_days);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_int_distribution<std::int64_t> start_offset(0, 365 * 86400);
    std::bernoulli_distribution coin(0.5);
    const std::int64_t epoch = cohort::parse_timestamp("2130-01-01 00:00:00");

    auto labs = open_table(t.labevents, "ROW_ID,SUBJECT_ID,HADM_ID,ITEMID,CHARTTIME,VALUE,VALUENUM,VALUEUOM,FLAG");
    auto diags = open_table(t.diagnoses, "ROW_ID,SUBJECT_ID,HADM_ID,SEQ_NUM,ICD9_CODE");
    std::size_t lab_row = 0;
    std::size_t diag_row = 0;

    const std::size_t n = 2 * spec.n_per_class;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const std::int64_t hadm = kFirstHadm + static_cast<std::int64_t>(i);
        const std::int64_t subject = kFirstSubject + static_cast<std::int64_t>(i);
        const std::int64_t start = epoch + start_offset(rng);

        const std::size_t count = n_samples(rng);
        std::int64_t offset = 0;  // seconds since the first sample
        for (std::size_t k = 0; k < count; ++k) {
            if (k > 0) offset += std::max<std::int64_t>(60, std::llround(gap(rng) * 86400.0));
            const double t_days = static_cast<double>(offset) / 86400.0;
            double value = synthetic_class_mean(label, t_days);
            if (spec.noise > 0.0) value += spec.noise * noise(rng);
            const std::string v = csv::format_double(value);
            labs << ++lab_row << ',' << subject << ',' << hadm << ',' << kSyntheticItemId << ','
                 << cohort::format_timestamp(start + offset) << ',' << v << ',' << v << ",IU/L,\n";
        }
        // A second lab per admission so the co-occurrence table has two columns.
        for (int k = 0; k < 2; ++k) {
            labs << ++lab_row << ',' << subject << ',' << hadm << ',' << kAlbuminItem << ','
                 << cohort::format_timestamp(start + k * 43200) << ",3.5,3.5,g/dL,\n";
        }

        diags << ++diag_row << ',' << subject << ',' << hadm << ",1," << (label == 0 ? "4280" : "5715") << '\n';
        if (coin(rng)) diags << ++diag_row << ',' << subject << ',' << hadm << ",2,4019\n";
    }
    if (!labs || !diags) throw IoError("failed writing synthetic tables in " + dir.string());
    return t;
}

}  // namespace pheno
