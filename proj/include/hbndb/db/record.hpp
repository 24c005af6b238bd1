#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>

#include "hbndb/constants.hpp"
#include "hbndb/db/schema.hpp"
#include "hbndb/errors.hpp"

namespace hbndb::db {

/// One row of `updated_data`. Numeric and blob columns are nullable.
struct DefectRecord {
    std::string host;
    std::string defect;
    std::string defect_name;
    int charge_state = 0;
    std::string spin_multiplicity;
    std::string optical_spin_transition;
    std::array<std::optional<double>, real_column_count> reals{};
    std::array<std::optional<Blob>, blob_column_count> blobs{};

    std::optional<double>& real(std::string_view key) { return reals[real_index(key)]; }
    const std::optional<double>& real(std::string_view key) const { return reals[real_index(key)]; }
    std::optional<Blob>& blob(std::string_view key) { return blobs[blob_index(key)]; }
    const std::optional<Blob>& blob(std::string_view key) const { return blobs[blob_index(key)]; }

    /// Column value by schema index.
    Value get(std::size_t col) const {
        switch (col) {
            case 0: return host;
            case 1: return defect;
            case 2: return defect_name;
            case 3: return static_cast<std::int64_t>(charge_state);
            case 4: return spin_multiplicity;
            case 5: return optical_spin_transition;
            default: break;
        }
        if (col < first_blob_column) {
            const auto& r = reals[col - first_real_column];
            return r ? Value{*r} : Value{};
        }
        const auto& b = blobs[col - first_blob_column];
        return b ? Value{*b} : Value{};
    }

    void set(std::size_t col, const Value& v);

    /// Uniqueness and ordering key.
    auto identity() const {
        return std::tie(host, defect, charge_state, spin_multiplicity, optical_spin_transition);
    }

    bool operator==(const DefectRecord&) const = default;

    static std::size_t real_index(std::string_view key) {
        auto c = column_by_key(key);
        if (!c || columns[*c].type != ColumnType::real)
            throw Error(ErrorKind::validation, "unknown numeric column '" + std::string(key) + "'", std::string(key));
        return *c - first_real_column;
    }

    static std::size_t blob_index(std::string_view key) {
        auto c = column_by_key(key);
        if (!c || columns[*c].type != ColumnType::blob)
            throw Error(ErrorKind::validation, "unknown blob column '" + std::string(key) + "'", std::string(key));
        return *c - first_blob_column;
    }
};

inline void DefectRecord::set(std::size_t col, const Value& v) {
    const auto& spec = columns.at(col);
    auto text = [&]() -> std::string {
        if (auto s = std::get_if<std::string>(&v)) return *s;
        if (auto b = std::get_if<Blob>(&v)) return b->bytes;
        if (is_null(v)) return {};
        throw Error(ErrorKind::validation, "column '" + std::string(spec.name) + "' expects text", std::string(spec.key));
    };
    switch (col) {
        case 0: host = text(); return;
        case 1: defect = text(); return;
        case 2: defect_name = text(); return;
        case 3:
            if (auto i = std::get_if<std::int64_t>(&v)) charge_state = static_cast<int>(*i);
            else if (auto d = std::get_if<double>(&v)) charge_state = static_cast<int>(std::lround(*d));
            else if (auto s = std::get_if<std::string>(&v)) charge_state = std::stoi(*s);
            else throw Error(ErrorKind::validation, "charge state must be an integer", "charge_state");
            return;
        case 4: spin_multiplicity = text(); return;
        case 5: optical_spin_transition = text(); return;
        default: break;
    }
    if (col < first_blob_column) {
        auto& r = reals[col - first_real_column];
        if (is_null(v)) r.reset();
        else if (auto d = std::get_if<double>(&v)) r = *d;
        else if (auto i = std::get_if<std::int64_t>(&v)) r = static_cast<double>(*i);
        else throw Error(ErrorKind::validation, "column '" + std::string(spec.name) + "' expects a number",
                         std::string(spec.key));
        return;
    }
    auto& b = blobs[col - first_blob_column];
    if (is_null(v)) b.reset();
    else if (auto p = std::get_if<Blob>(&v)) b = *p;
    else if (auto s = std::get_if<std::string>(&v)) b = Blob{*s};
    else throw Error(ErrorKind::validation, "column '" + std::string(spec.name) + "' expects a blob",
                     std::string(spec.key));
}

inline bool valid_host(std::string_view s) { return s == "monolayer" || s == "bulk"; }
inline bool valid_spin(std::string_view s) { return s == "singlet" || s == "doublet" || s == "triplet"; }
inline bool valid_transition(std::string_view s) { return s == "up" || s == "down"; }

inline constexpr double dw_hr_tolerance = 1e-6;
inline constexpr double zpl_product_tolerance = 0.01;

/// Throws a validation error naming the offending field(s).
inline void validate(const DefectRecord& r) {
    if (!valid_host(r.host)) throw Error(ErrorKind::validation, "host must be monolayer or bulk, got '" + r.host + "'", "host");
    if (r.defect.empty()) throw Error(ErrorKind::validation, "defect formula is empty", "defect");
    if (r.charge_state < -2 || r.charge_state > 2)
        throw Error(ErrorKind::validation, "charge state " + std::to_string(r.charge_state) + " outside [-2, 2]",
                    "charge_state");
    if (!valid_spin(r.spin_multiplicity))
        throw Error(ErrorKind::validation, "spin multiplicity must be singlet, doublet or triplet, got '" +
                                               r.spin_multiplicity + "'",
                    "spin_multiplicity");
    if (!valid_transition(r.optical_spin_transition))
        throw Error(ErrorKind::validation,
                    "optical spin transition must be up or down, got '" + r.optical_spin_transition + "'",
                    "optical_spin_transition");
    for (std::size_t i = 0; i < real_column_count; ++i)
        if (r.reals[i] && !std::isfinite(*r.reals[i])) {
            auto key = std::string(columns[first_real_column + i].key);
            throw Error(ErrorKind::validation, key + " is not finite", key);
        }
    const auto& dw = r.real("DW");
    const auto& hr = r.real("HR");
    if (dw && hr && std::abs(*dw - std::exp(-*hr)) > dw_hr_tolerance)
        throw Error(ErrorKind::validation,
                    "DW (" + std::to_string(*dw) + ") does not equal exp(-HR) (HR = " + std::to_string(*hr) + ")",
                    "DW,HR");
    const auto& ev = r.real("ZPL");
    const auto& nm = r.real("ZPL_nm");
    if (ev && nm && std::abs(*ev * *nm - constants::hc_ev_nm) > zpl_product_tolerance)
        throw Error(ErrorKind::validation,
                    "ZPL (" + std::to_string(*ev) + " eV) and ZPL_nm (" + std::to_string(*nm) +
                        " nm) are inconsistent",
                    "ZPL,ZPL_nm");
}

}  // namespace hbndb::db
