#include "pheno/cohort.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "pheno/common.hpp"
#include "pheno/csv.hpp"

namespace pheno::cohort {

namespace {

constexpr double kSecondsPerDay = 86400.0;

int digits(const std::string& s, std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (i >= s.size() || s[i] < '0' || s[i] > '9') return -1;
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

// Descending count, then ascending key.
std::vector<std::string> top_keys(const std::unordered_map<std::string, std::unordered_set<std::int64_t>>& sets,
                                  std::size_t limit) {
    std::vector<std::pair<std::string, std::size_t>> items;
    items.reserve(sets.size());
    for (const auto& [key, hadms] : sets) items.emplace_back(key, hadms.size());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (items.size() > limit) items.resize(limit);
    std::vector<std::string> out;
    out.reserve(items.size());
    for (auto& [key, n] : items) out.push_back(key);
    return out;
}

}  // namespace

std::int64_t parse_timestamp(const std::string& text) {
    // YYYY-MM-DD[ HH:MM:SS]
    const int y = digits(text, 0, 4);
    const int mo = digits(text, 5, 2);
    const int d = digits(text, 8, 2);
    int h = 0, mi = 0, s = 0;
    bool ok = y >= 0 && mo >= 1 && d >= 1 && text.size() >= 10 && text[4] == '-' && text[7] == '-';
    if (ok && text.size() > 10) {
        h = digits(text, 11, 2);
        mi = digits(text, 14, 2);
        s = digits(text, 17, 2);
        ok = text.size() >= 19 && (text[10] == ' ' || text[10] == 'T') && text[13] == ':' && text[16] == ':' &&
             h >= 0 && h < 24 && mi >= 0 && mi < 60 && s >= 0 && s < 61;
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ok || !ymd.ok()) throw PreconditionError("invalid timestamp: '" + text + "'");
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_timestamp(std::int64_t seconds) {
    using namespace std::chrono;
    std::int64_t days = seconds / 86400;
    std::int64_t rem = seconds % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                  static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
    return buf;
}

std::string icd9_category(const std::string& code) {
    std::string c;
    for (char ch : code) {
        if (ch != '.' && ch != ' ') c += ch;
    }
    return c.substr(0, 3);
}

std::map<std::int64_t, std::string> load_loinc_map(const std::filesystem::path& path) {
    csv::Reader r(path);
    const auto i_item = r.require("ITEMID");
    const auto i_loinc = r.require("LOINC_CODE");
    std::map<std::int64_t, std::string> out;
    std::vector<std::string> f;
    while (r.next(f)) {
        if (f.size() <= std::max(i_item, i_loinc)) continue;
        auto item = csv::parse_int(f[i_item]);
        if (!item || f[i_loinc].empty()) continue;
        out[*item] = f[i_loinc];
    }
    return out;
}

LabEventTable load_lab_events(const std::filesystem::path& path, const std::filesystem::path& loinc_map_path) {
    const auto loinc = load_loinc_map(loinc_map_path);
    csv::Reader r(path);
    const auto i_subject = r.require("SUBJECT_ID");
    const auto i_hadm = r.require("HADM_ID");
    const auto i_item = r.require("ITEMID");
    const auto i_time = r.require("CHARTTIME");
    const auto i_value = r.require("VALUENUM");
    const auto width = std::max({i_subject, i_hadm, i_item, i_time, i_value});

    LabEventTable table;
    std::vector<std::string> f;
    while (r.next(f)) {
        if (f.size() <= width) {
            ++table.dropped_missing;
            continue;
        }
        auto hadm = csv::parse_int(f[i_hadm]);
        auto value = csv::parse_double(f[i_value]);
        auto item = csv::parse_int(f[i_item]);
        if (!hadm || !value || !item || !std::isfinite(*value)) {
            ++table.dropped_missing;
            continue;
        }
        auto it = loinc.find(*item);
        if (it == loinc.end()) {
            ++table.dropped_unmapped;
            continue;
        }
        LabEvent e;
        e.subject_id = csv::parse_int(f[i_subject]).value_or(0);
        e.hadm_id = *hadm;
        e.item_id = *item;
        e.loinc_code = it->second;
        try {
            e.charttime = parse_timestamp(f[i_time]);
        } catch (const PreconditionError&) {
            ++table.dropped_missing;
            continue;
        }
        e.value = *value;
        table.events.push_back(std::move(e));
    }
    return table;
}

std::vector<Diagnosis> load_diagnoses(const std::filesystem::path& path) {
    csv::Reader r(path);
    const auto i_subject = r.require("SUBJECT_ID");
    const auto i_hadm = r.require("HADM_ID");
    const auto i_code = r.require("ICD9_CODE");
    const auto width = std::max({i_subject, i_hadm, i_code});
    std::vector<Diagnosis> out;
    std::vector<std::string> f;
    while (r.next(f)) {
        if (f.size() <= width) continue;
        auto hadm = csv::parse_int(f[i_hadm]);
        if (!hadm || f[i_code].empty()) continue;
        Diagnosis d;
        d.subject_id = csv::parse_int(f[i_subject]).value_or(0);
        d.hadm_id = *hadm;
        d.icd9_code = f[i_code];
        d.icd9_category = icd9_category(d.icd9_code);
        if (d.icd9_category.empty()) continue;
        out.push_back(std::move(d));
    }
    return out;
}

std::map<std::string, std::string> load_icd9_titles(const std::filesystem::path& path) {
    csv::Reader r(path);
    const auto i_code = r.require("ICD9_CODE");
    const auto i_title = r.require("SHORT_TITLE");
    std::map<std::string, std::string> out;
    std::vector<std::string> f;
    while (r.next(f)) {
        if (f.size() <= std::max(i_code, i_title)) continue;
        out[f[i_code]] = f[i_title];
    }
    return out;
}

CooccurrenceMatrix cooccurrence(const std::vector<LabEvent>& events, const std::vector<Diagnosis>& diagnoses,
                                std::size_t top_icd9, std::size_t top_loinc) {
    if (top_icd9 == 0 || top_loinc == 0) throw ParameterError("cooccurrence: top_icd9 and top_loinc must be >= 1");
    CooccurrenceMatrix m;
    if (events.empty() || diagnoses.empty()) return m;

    std::unordered_map<std::string, std::unordered_set<std::int64_t>> by_cat, by_code;
    std::unordered_map<std::int64_t, std::set<std::string>> cats_of, codes_of;
    for (const auto& d : diagnoses) {
        by_cat[d.icd9_category].insert(d.hadm_id);
        cats_of[d.hadm_id].insert(d.icd9_category);
    }
    for (const auto& e : events) {
        by_code[e.loinc_code].insert(e.hadm_id);
        codes_of[e.hadm_id].insert(e.loinc_code);
    }
    m.icd9_categories = top_keys(by_cat, top_icd9);
    m.loinc_codes = top_keys(by_code, top_loinc);

    std::unordered_map<std::string, std::size_t> row, col;
    for (std::size_t i = 0; i < m.icd9_categories.size(); ++i) row[m.icd9_categories[i]] = i;
    for (std::size_t j = 0; j < m.loinc_codes.size(); ++j) col[m.loinc_codes[j]] = j;
    m.counts.assign(m.icd9_categories.size(), std::vector<std::int64_t>(m.loinc_codes.size(), 0));

    for (const auto& [hadm, cats] : cats_of) {
        auto it = codes_of.find(hadm);
        if (it == codes_of.end()) continue;
        for (const auto& c : cats) {
            auto r = row.find(c);
            if (r == row.end()) continue;
            for (const auto& code : it->second) {
                auto k = col.find(code);
                if (k != col.end()) ++m.counts[r->second][k->second];
            }
        }
    }
    return m;
}

Cohort select_cohort(const std::vector<LabEvent>& events, const std::vector<Diagnosis>& diagnoses,
                     const std::string& loinc, const std::string& cat_a, const std::string& cat_b,
                     std::size_t min_samples) {
    if (cat_a == cat_b) throw ParameterError("select_cohort: categories must differ (got '" + cat_a + "' twice)");
    if (min_samples < 1) throw ParameterError("select_cohort: min_samples must be >= 1");

    struct Flags {
        bool a = false;
        bool b = false;
    };
    std::unordered_map<std::int64_t, Flags> flags;
    for (const auto& d : diagnoses) {
        if (d.icd9_category == cat_a) flags[d.hadm_id].a = true;
        if (d.icd9_category == cat_b) flags[d.hadm_id].b = true;
    }

    // Ordered by admission so output order is deterministic.
    std::map<std::int64_t, std::vector<const LabEvent*>> by_hadm;
    for (const auto& e : events) {
        if (e.loinc_code == loinc) by_hadm[e.hadm_id].push_back(&e);
    }

    Cohort cohort;
    for (auto& [hadm, evs] : by_hadm) {
        auto fl = flags.find(hadm);
        const bool a = fl != flags.end() && fl->second.a;
        const bool b = fl != flags.end() && fl->second.b;
        if (a && b) {
            ++cohort.summary.excluded_both;
            continue;
        }
        if (!a && !b) {
            ++cohort.summary.excluded_neither;
            continue;
        }
        std::stable_sort(evs.begin(), evs.end(),
                         [](const LabEvent* x, const LabEvent* y) { return x->charttime < y->charttime; });

        LabSeries s;
        s.hadm_id = hadm;
        s.subject_id = evs.front()->subject_id;
        s.label = a ? 0 : 1;
        const std::int64_t t0 = evs.front()->charttime;
        for (std::size_t i = 0; i < evs.size();) {
            std::size_t j = i;
            double sum = 0.0;
            while (j < evs.size() && evs[j]->charttime == evs[i]->charttime) sum += evs[j++]->value;
            s.times.push_back(static_cast<double>(evs[i]->charttime - t0) / kSecondsPerDay);
            s.values.push_back(sum / static_cast<double>(j - i));
            i = j;
        }
        if (s.times.size() < min_samples) {
            ++cohort.summary.excluded_too_short;
            continue;
        }
        (a ? cohort.summary.selected_a : cohort.summary.selected_b)++;
        cohort.series.push_back(std::move(s));
    }
    if (cohort.series.empty()) {
        log_warn("select_cohort: no admissions qualify for LOINC " + loinc + " with categories " + cat_a + "/" +
                 cat_b);
    }
    return cohort;
}

std::pair<std::vector<LabSeries>, std::vector<LabSeries>> split_cohort(const std::vector<LabSeries>& cohort,
                                                                       double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ParameterError("split_cohort: train_fraction must be in (0, 1)");
    }
    if (cohort.empty()) throw PreconditionError("split_cohort: cohort is empty");

    std::vector<std::size_t> idx(cohort.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(cohort.size())));
    std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test_idx(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    auto by_hadm = [&](std::size_t x, std::size_t y) { return cohort[x].hadm_id < cohort[y].hadm_id; };
    std::sort(train_idx.begin(), train_idx.end(), by_hadm);
    std::sort(test_idx.begin(), test_idx.end(), by_hadm);

    std::pair<std::vector<LabSeries>, std::vector<LabSeries>> out;
    for (auto i : train_idx) out.first.push_back(cohort[i]);
    for (auto i : test_idx) out.second.push_back(cohort[i]);
    return out;
}

void write_cohort_csv(const std::filesystem::path& path, const std::vector<LabSeries>& series) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "hadm_id,label,t_days,value\n";
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.times.size(); ++i) {
            out << s.hadm_id << ',' << s.label << ',' << csv::format_double(s.times[i]) << ','
                << csv::format_double(s.values[i]) << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<LabSeries> read_cohort_csv(const std::filesystem::path& path) {
    csv::Reader r(path);
    const auto i_hadm = r.require("hadm_id");
    const auto i_label = r.require("label");
    const auto i_t = r.require("t_days");
    const auto i_v = r.require("value");
    const auto width = std::max({i_hadm, i_label, i_t, i_v});
    std::vector<LabSeries> out;
    std::vector<std::string> f;
    while (r.next(f)) {
        auto hadm = f.size() > width ? csv::parse_int(f[i_hadm]) : std::nullopt;
        auto label = hadm ? csv::parse_int(f[i_label]) : std::nullopt;
        auto t = hadm ? csv::parse_double(f[i_t]) : std::nullopt;
        auto v = hadm ? csv::parse_double(f[i_v]) : std::nullopt;
        if (!hadm || !label || !t || !v) {
            throw SchemaError("malformed row at " + path.string() + ":" + std::to_string(r.line()));
        }
        if (out.empty() || out.back().hadm_id != *hadm) {
            LabSeries s;
            s.hadm_id = *hadm;
            s.label = static_cast<int>(*label);
            out.push_back(std::move(s));
        }
        out.back().times.push_back(*t);
        out.back().values.push_back(*v);
    }
    return out;
}

void write_cooccurrence_csv(const std::filesystem::path& path, const CooccurrenceMatrix& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "icd9_category";
    for (const auto& c : m.loinc_codes) out << ',' << c;
    out << '\n';
    for (std::size_t i = 0; i < m.icd9_categories.size(); ++i) {
        out << m.icd9_categories[i];
        for (auto v : m.counts[i]) out << ',' << v;
        out << '\n';
    }
}

void validate(const LabSeries& s, std::size_t min_samples) {
    const std::string who = "admission " + std::to_string(s.hadm_id);
    if (s.times.size() != s.values.size()) throw PreconditionError(who + ": times/values length mismatch");
    if (s.times.size() < min_samples) throw PreconditionError(who + ": fewer than " + std::to_string(min_samples) + " samples");
    if (s.times.empty() || s.times.front() != 0.0) throw PreconditionError(who + ": first time must be 0");
    for (std::size_t i = 1; i < s.times.size(); ++i) {
        if (!(s.times[i] > s.times[i - 1])) throw PreconditionError(who + ": times not strictly ascending");
    }
    for (double v : s.values) {
        if (!std::isfinite(v)) throw PreconditionError(who + ": non-finite value");
    }
}

}  // namespace pheno::cohort
