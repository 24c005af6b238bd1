#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hbndb/db/query.hpp"
#include "hbndb/db/record.hpp"
#include "hbndb/db/schema.hpp"
#include "hbndb/db/store.hpp"
#include "hbndb/elements.hpp"
#include "hbndb/errors.hpp"

namespace hbndb::analysis {

/// Mid-ranks (1-based); tied values share the mean of the ranks they span.
inline std::vector<double> mid_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = mid;
        i = j + 1;
    }
    return r;
}

/// Pearson correlation; nullopt when either series has zero variance.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Spearman ρ with pairwise deletion of NaN entries. nullopt when fewer than two pairs remain
/// or either series is constant.
inline std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw Error(ErrorKind::validation, "series lengths differ: " + std::to_string(x.size()) + " vs " +
                                               std::to_string(y.size()));
    std::vector<double> a, b;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isnan(x[i]) && !std::isnan(y[i])) {
            a.push_back(x[i]);
            b.push_back(y[i]);
        }
    if (a.size() < 2) return std::nullopt;
    auto ra = mid_ranks(a);
    auto rb = mid_ranks(b);
    return pearson(ra, rb);
}

struct CorrelationMatrix {
    std::vector<std::string> labels;  // option keys
    std::vector<std::vector<std::optional<double>>> rho;
};

/// Default property set: every numeric column of the table.
inline std::vector<std::string> default_properties() {
    std::vector<std::string> keys;
    for (std::size_t c = db::first_real_column; c < db::first_blob_column; ++c)
        keys.emplace_back(db::columns[c].key);
    return keys;
}

inline std::vector<double> column_values(const db::Snapshot& snap, std::string_view key) {
    auto idx = db::DefectRecord::real_index(key);
    std::vector<double> v;
    v.reserve(snap.size());
    for (const auto& r : snap.rows()) v.push_back(r.record.reals[idx].value_or(std::nan("")));
    return v;
}

/// Pairwise Spearman over the chosen numeric columns. Undefined entries (all-missing or constant
/// columns) are nullopt; the diagonal of a defined column is 1.
inline CorrelationMatrix correlation_matrix(const db::Snapshot& snap,
                                            std::vector<std::string> properties = default_properties()) {
    if (snap.size() < 2) throw Error(ErrorKind::validation, "correlation matrix needs at least 2 records", "records");
    std::vector<std::vector<double>> cols;
    for (const auto& p : properties) cols.push_back(column_values(snap, p));
    const std::size_t n = properties.size();
    CorrelationMatrix m{std::move(properties), std::vector(n, std::vector<std::optional<double>>(n))};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            auto r = spearman(cols[i], cols[j]);
            if (i == j && r) r = 1.0;
            m.rho[i][j] = m.rho[j][i] = r;
        }
    return m;
}

namespace detail {
inline std::string format_cell(const std::optional<double>& v) { return v ? db::format_double(*v) : std::string(); }
}  // namespace detail

/// Square CSV: header row "property,<labels...>", one row per label; undefined cells empty.
inline std::string to_csv(const CorrelationMatrix& m) {
    std::string out = "property";
    for (const auto& l : m.labels) out += "," + l;
    out += "\n";
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        out += m.labels[i];
        for (const auto& v : m.rho[i]) out += "," + detail::format_cell(v);
        out += "\n";
    }
    return out;
}

inline nlohmann::json to_json(const CorrelationMatrix& m) {
    nlohmann::json j;
    j["labels"] = m.labels;
    j["rho"] = nlohmann::json::array();
    for (const auto& row : m.rho) {
        auto r = nlohmann::json::array();
        for (const auto& v : row) r.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
        j["rho"].push_back(std::move(r));
    }
    return j;
}

// Vacancy classes ------------------------------------------------------------

enum class VacancyClass { no_vacancy_single_impurity, no_vacancy_complex, one_vacancy, two_vacancy };

inline constexpr std::array<VacancyClass, 4> all_vacancy_classes{
    VacancyClass::no_vacancy_single_impurity, VacancyClass::no_vacancy_complex, VacancyClass::one_vacancy,
    VacancyClass::two_vacancy};

inline std::string_view to_string(VacancyClass c) {
    switch (c) {
        case VacancyClass::no_vacancy_single_impurity: return "no-vacancy-single-impurity";
        case VacancyClass::no_vacancy_complex: return "no-vacancy-complex";
        case VacancyClass::one_vacancy: return "one-vacancy";
        case VacancyClass::two_vacancy: return "two-vacancy";
    }
    return "";
}

struct DefectToken {
    std::string element;  // "V" for a vacancy
    char site;            // 'B', 'N' or 'i'
    std::size_t column;   // 1-based position in the formula
};

/// Tokenizes a defect formula such as "C_B V_N", "O_NV_B^{-1}" or "C_i". Grammar:
///   formula := token (ws* token)* charge?
///   token   := Element '_' ('B' | 'N' | 'i')
///   charge  := '^' ( '{' sign? digits '}' | sign? digits )
inline std::vector<DefectToken> parse_defect_formula(std::string_view s) {
    auto fail = [&](std::size_t pos, const std::string& what) -> void {
        throw ParseError("defect formula", 1, pos + 1, what + " in '" + std::string(s) + "'");
    };
    std::vector<DefectToken> tokens;
    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    };
    skip_ws();
    while (i < s.size() && s[i] != '^') {
        std::size_t start = i;
        if (!std::isupper(static_cast<unsigned char>(s[i]))) fail(i, "expected element symbol");
        std::string el(1, s[i++]);
        if (i < s.size() && std::islower(static_cast<unsigned char>(s[i])) && s[i] != 'i') el += s[i++];
        // "Xi" can be a two-letter symbol only if '_' follows; otherwise 'i' would be a site without '_'.
        if (i < s.size() && s[i] == 'i' && i + 1 < s.size() && s[i + 1] == '_' && el.size() == 1 &&
            is_element(el + "i")) el += s[i++];
        if (el != "V" && !is_element(el)) fail(start, "unknown element '" + el + "'");
        if (i >= s.size() || s[i] != '_') fail(i, "expected '_' after '" + el + "'");
        ++i;
        if (i >= s.size() || (s[i] != 'B' && s[i] != 'N' && s[i] != 'i')) fail(i, "expected site B, N or i");
        char site = s[i++];
        if (el == "V" && site == 'i') fail(start, "interstitial vacancy is meaningless");
        tokens.push_back({el, site, start + 1});
        skip_ws();
    }
    if (tokens.empty()) fail(i, "empty formula");
    if (i < s.size()) {
        ++i;  // '^'
        bool brace = i < s.size() && s[i] == '{';
        if (brace) ++i;
        if (i < s.size() && (s[i] == '-' || s[i] == '+')) ++i;
        std::size_t digits = i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        if (i == digits) fail(i, "expected charge digits");
        if (brace) {
            if (i >= s.size() || s[i] != '}') fail(i, "expected '}'");
            ++i;
        }
        skip_ws();
        if (i < s.size()) fail(i, "unexpected trailing text");
    }
    return tokens;
}

inline VacancyClass classify_vacancy(std::string_view formula) {
    auto tokens = parse_defect_formula(formula);
    auto vacancies = std::count_if(tokens.begin(), tokens.end(), [](const DefectToken& t) { return t.element == "V"; });
    if (vacancies >= 2) return VacancyClass::two_vacancy;
    if (vacancies == 1) return VacancyClass::one_vacancy;
    return tokens.size() == 1 ? VacancyClass::no_vacancy_single_impurity : VacancyClass::no_vacancy_complex;
}

// Histograms -----------------------------------------------------------------

struct Histogram {
    std::string property;
    std::vector<double> edges;  // bins + 1
    std::array<std::vector<std::size_t>, 4> counts;  // indexed by VacancyClass
    std::size_t missing = 0;       // records without a value
    std::size_t unclassified = 0;  // values whose defect formula did not parse (not binned)

    std::size_t total() const {
        std::size_t t = 0;
        for (const auto& c : counts) t += std::accumulate(c.begin(), c.end(), std::size_t{0});
        return t;
    }
};

/// Bins a numeric column per vacancy class. Without an explicit range the bins span [min, max]
/// of the present values; the last bin is closed so the maximum is counted. Values outside an
/// explicit range are clamped into the edge bins so totals are conserved.
inline Histogram histogram(const db::Snapshot& snap, std::string_view property, std::size_t bins,
                           std::optional<std::pair<double, double>> range = std::nullopt) {
    if (bins < 1) throw Error(ErrorKind::validation, "bins must be >= 1", "bins");
    auto values = column_values(snap, property);
    Histogram h;
    h.property = std::string(property);
    double lo = 0, hi = 1;
    if (range) {
        std::tie(lo, hi) = *range;
        if (!(lo < hi)) throw Error(ErrorKind::validation, "histogram range must satisfy lo < hi", "range");
    } else {
        bool any = false;
        for (double v : values)
            if (!std::isnan(v)) {
                lo = any ? std::min(lo, v) : v;
                hi = any ? std::max(hi, v) : v;
                any = true;
            }
        if (any && lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
    h.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
    for (auto& c : h.counts) c.assign(bins, 0);
    std::size_t i = 0;
    for (const auto& r : snap.rows()) {
        double v = values[i++];
        if (std::isnan(v)) {
            ++h.missing;
            continue;
        }
        VacancyClass cls;
        try {
            cls = classify_vacancy(r.record.defect);
        } catch (const ParseError&) {
            ++h.unclassified;
            continue;
        }
        auto b = static_cast<std::ptrdiff_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
        b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
        ++h.counts[static_cast<std::size_t>(cls)][static_cast<std::size_t>(b)];
    }
    return h;
}

/// Plot-ready CSV: bin_lo,bin_hi,<class counts...>,total
inline std::string to_csv(const Histogram& h) {
    std::string out = "bin_lo,bin_hi";
    for (auto c : all_vacancy_classes) out += "," + std::string(to_string(c));
    out += ",total\n";
    for (std::size_t b = 0; b + 1 < h.edges.size(); ++b) {
        out += db::format_double(h.edges[b]) + "," + db::format_double(h.edges[b + 1]);
        std::size_t t = 0;
        for (const auto& c : h.counts) {
            out += "," + std::to_string(c[b]);
            t += c[b];
        }
        out += "," + std::to_string(t) + "\n";
    }
    return out;
}

inline nlohmann::json to_json(const Histogram& h) {
    nlohmann::json j;
    j["property"] = h.property;
    j["edges"] = h.edges;
    j["counts"] = nlohmann::json::object();
    for (auto c : all_vacancy_classes) j["counts"][std::string(to_string(c))] = h.counts[static_cast<std::size_t>(c)];
    j["missing"] = h.missing;
    j["unclassified"] = h.unclassified;
    return j;
}

}  // namespace hbndb::analysis
