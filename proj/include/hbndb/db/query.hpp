#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hbndb/db/schema.hpp"
#include "hbndb/db/sqlite_io.hpp"
#include "hbndb/db/store.hpp"
#include "hbndb/errors.hpp"

namespace hbndb::db {

/// Mirrors get_database(option, host, spin_multiplicity, charge_state, optical_spin_transition,
/// value_range). An unset filter admits every value; an empty `option` returns identity columns only.
struct QueryFilters {
    std::vector<std::string> option;
    std::optional<std::vector<std::string>> host;
    std::optional<std::vector<std::string>> spin_multiplicity;
    std::optional<std::vector<int>> charge_state;
    std::optional<std::vector<std::string>> optical_spin_transition;
    std::optional<std::pair<double, double>> value_range;
};

struct QueryResult {
    std::vector<std::size_t> columns;  // schema indices, schema order
    std::vector<TableRow> rows;
};

struct ResolvedQuery {
    std::vector<std::size_t> columns;
    std::optional<std::size_t> range_column;
};

/// Checks every filter and works out the output columns and the column value_range binds to.
inline ResolvedQuery resolve(const QueryFilters& f) {
    std::set<std::size_t> chosen;
    for (std::size_t i = 0; i < identity_column_count; ++i) chosen.insert(i);
    bool all = false;
    for (const auto& key : f.option) {
        if (key == option_all) {
            all = true;
            continue;
        }
        if (!is_option_key(key)) throw Error(ErrorKind::validation, "unknown option key '" + key + "'", "option");
        chosen.insert(*column_by_key(key));
    }
    if (all)
        for (std::size_t i = 0; i < columns.size(); ++i) chosen.insert(i);

    auto check_set = [](const auto& values, auto valid, const char* field) {
        if (!values) return;
        for (const auto& v : *values)
            if (!valid(v)) throw Error(ErrorKind::validation, std::string("invalid ") + field + " '" + v + "'", field);
    };
    check_set(f.host, valid_host, "host");
    check_set(f.spin_multiplicity, valid_spin, "spin_multiplicity");
    check_set(f.optical_spin_transition, valid_transition, "optical_spin_transition");
    if (f.charge_state)
        for (int q : *f.charge_state)
            if (q < -2 || q > 2)
                throw Error(ErrorKind::validation, "invalid charge_state " + std::to_string(q), "charge_state");

    ResolvedQuery r;
    r.columns.assign(chosen.begin(), chosen.end());
    if (f.value_range) {
        auto [lo, hi] = *f.value_range;
        if (std::isnan(lo) || std::isnan(hi) || lo > hi)
            throw Error(ErrorKind::validation, "value_range must satisfy lo <= hi", "value_range");
        std::vector<std::size_t> numeric;
        for (auto c : r.columns)
            if (columns[c].type == ColumnType::real) numeric.push_back(c);
        if (numeric.size() != 1)
            throw Error(ErrorKind::ambiguous_range,
                        "value_range needs exactly one numeric option, " + std::to_string(numeric.size()) + " selected",
                        "value_range");
        r.range_column = numeric.front();
    }
    return r;
}

namespace detail {
template <typename T>
bool admits(const std::optional<std::vector<T>>& filter, const T& v) {
    return !filter || std::find(filter->begin(), filter->end(), v) != filter->end();
}
}  // namespace detail

/// Runs the filter over a snapshot. Rows keep the snapshot's identity order.
inline QueryResult query(const Snapshot& snap, const QueryFilters& f) {
    auto resolved = resolve(f);
    QueryResult out;
    out.columns = resolved.columns;
    for (const auto& sr : snap.rows()) {
        const auto& r = sr.record;
        if (!detail::admits(f.host, r.host) || !detail::admits(f.spin_multiplicity, r.spin_multiplicity) ||
            !detail::admits(f.charge_state, r.charge_state) ||
            !detail::admits(f.optical_spin_transition, r.optical_spin_transition))
            continue;
        if (resolved.range_column) {
            const auto& v = r.reals[*resolved.range_column - first_real_column];
            if (!v || *v < f.value_range->first || *v > f.value_range->second) continue;
        }
        TableRow row{sr.id, {}};
        row.values.reserve(out.columns.size());
        for (auto c : out.columns) row.values.push_back(r.get(c));
        out.rows.push_back(std::move(row));
    }
    return out;
}

/// hbn_defects_<options>.db
inline std::string download_filename(const QueryFilters& f) {
    std::string name = "hbn_defects";
    if (f.option.empty()) return name + "_identity.db";
    for (const auto& o : f.option) name += "_" + o;
    return name + ".db";
}

inline std::string to_sqlite_bytes(const QueryResult& r) { return write_table(r.columns, r.rows); }

inline std::string base64(const std::string& bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                            reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline nlohmann::json value_to_json(const Value& v) {
    if (is_null(v)) return nullptr;
    if (auto i = std::get_if<std::int64_t>(&v)) return *i;
    if (auto d = std::get_if<double>(&v)) return *d;
    if (auto s = std::get_if<std::string>(&v)) return *s;
    return base64(std::get<Blob>(v).bytes);
}

/// {"columns": [...names], "keys": [...], "ids": [...], "rows": [[...], ...]}; blobs are base64.
inline nlohmann::json to_json(const QueryResult& r) {
    nlohmann::json j;
    j["columns"] = nlohmann::json::array();
    j["keys"] = nlohmann::json::array();
    for (auto c : r.columns) {
        j["columns"].push_back(std::string(columns[c].name));
        j["keys"].push_back(std::string(columns[c].key));
    }
    j["ids"] = nlohmann::json::array();
    j["rows"] = nlohmann::json::array();
    for (const auto& row : r.rows) {
        j["ids"].push_back(row.id);
        auto arr = nlohmann::json::array();
        for (const auto& v : row.values) arr.push_back(value_to_json(v));
        j["rows"].push_back(std::move(arr));
    }
    return j;
}

namespace detail {
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}
}  // namespace detail

/// Header row is the column names in schema order; doubles use shortest round-trip form.
inline std::string to_csv(const QueryResult& r) {
    std::string out;
    for (std::size_t i = 0; i < r.columns.size(); ++i) {
        if (i) out += ',';
        out += detail::csv_field(std::string(columns[r.columns[i]].name));
    }
    out += "\r\n";
    for (const auto& row : r.rows) {
        for (std::size_t i = 0; i < row.values.size(); ++i) {
            if (i) out += ',';
            const auto& v = row.values[i];
            if (is_null(v)) continue;
            if (auto n = std::get_if<std::int64_t>(&v)) out += std::to_string(*n);
            else if (auto d = std::get_if<double>(&v)) out += format_double(*d);
            else if (auto s = std::get_if<std::string>(&v)) out += detail::csv_field(*s);
            else out += base64(std::get<Blob>(v).bytes);
        }
        out += "\r\n";
    }
    return out;
}

}  // namespace hbndb::db
