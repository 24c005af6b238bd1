#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace hbndb::db {

enum class ColumnType { text, integer, real, blob };

inline std::string_view sql_type(ColumnType t) {
    switch (t) {
        case ColumnType::text: return "TEXT";
        case ColumnType::integer: return "INTEGER";
        case ColumnType::real: return "REAL";
        case ColumnType::blob: return "BLOB";
    }
    return "";
}

struct ColumnSpec {
    std::string_view name;  // column name in `updated_data`
    std::string_view key;   // retrieval option key (identity columns use a snake_case key)
    ColumnType type;
    bool identity;
};

inline constexpr std::string_view table_name = "updated_data";
inline constexpr std::string_view default_db_filename = "hbn_defects_database.db";
/// Filename used by the public raw-download URL for the same file.
inline constexpr std::string_view db_filename_alias = "hbn_defects_structure.db";

// Column order is the published table order.
inline constexpr std::array<ColumnSpec, 34> columns{{
    {"Host", "host", ColumnType::text, true},
    {"Defect", "defect", ColumnType::text, true},
    {"Defect name", "defect_name", ColumnType::text, true},
    {"Charge state", "charge_state", ColumnType::integer, true},
    {"Spin multiplicity", "spin_multiplicity", ColumnType::text, true},
    {"Optical spin transition", "optical_spin_transition", ColumnType::text, true},
    {"Excitation properties: dipole_x (Debye)", "abs_dipole_x", ColumnType::real, false},
    {"Excitation properties: dipole_y (Debye)", "abs_dipole_y", ColumnType::real, false},
    {"Excitation properties: dipole_z (Debye)", "abs_dipole_z", ColumnType::real, false},
    {"Excitation properties: linear In-plane Polarization Visibility", "abs_visibility", ColumnType::real, false},
    {"Excitation properties: Intensity (Debye)", "abs_tdm", ColumnType::real, false},
    {"Excitation properties: Characteristic time (ns)", "abs_lifetime", ColumnType::real, false},
    {"Excitation properties: Angle of excitation wrt the crystal axis", "abs_angle", ColumnType::real, false},
    {"Emission properties: dipole_x (Debye)", "ems_dipole_x", ColumnType::real, false},
    {"Emission properties: dipole_y (Debye)", "ems_dipole_y", ColumnType::real, false},
    {"Emission properties: dipole_z (Debye)", "ems_dipole_z", ColumnType::real, false},
    {"Emission properties: linear In-plane Polarization Visibility", "ems_visibility", ColumnType::real, false},
    {"Emission properties: Intensity (Debye)", "ems_tdm", ColumnType::real, false},
    {"Emission properties: ZPL (eV)", "ZPL", ColumnType::real, false},
    {"Emission properties: ZPL (nm)", "ZPL_nm", ColumnType::real, false},
    {"Emission properties: lifetime (ns)", "lifetime", ColumnType::real, false},
    {"Emission properties: Angle of emission wrt the crystal axis", "ems_angle", ColumnType::real, false},
    {"Emission properties: Polarization misalignment (degree)", "misalignment", ColumnType::real, false},
    {"Emission properties: Configuration coordinate (amu^(1/2)/Å)", "Q", ColumnType::real, false},
    {"Emission properties: HR factor", "HR", ColumnType::real, false},
    {"Emission properties: DW factor", "DW", ColumnType::real, false},
    {"Emission properties: Ground-state total energy (eV)", "E_ground", ColumnType::real, false},
    {"Emission properties: Excited-state total energy (eV)", "E_excited", ColumnType::real, false},
    {"Ground-state structure", "structure_ground", ColumnType::blob, false},
    {"Excited-state structure", "structure_excited", ColumnType::blob, false},
    {"Ground-state electronic structure", "band_ground", ColumnType::blob, false},
    {"Excited-state electronic structure", "band_excited", ColumnType::blob, false},
    {"PL lineshape", "PL", ColumnType::blob, false},
    {"Raman spectrum", "raman", ColumnType::blob, false},
}};

inline constexpr std::size_t identity_column_count = 6;
inline constexpr std::size_t first_real_column = 6;
inline constexpr std::size_t real_column_count = 22;
inline constexpr std::size_t first_blob_column = first_real_column + real_column_count;
inline constexpr std::size_t blob_column_count = 6;

static_assert(first_blob_column + blob_column_count == columns.size());

inline std::optional<std::size_t> column_by_key(std::string_view key) {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].key == key) return i;
    return std::nullopt;
}

inline std::optional<std::size_t> column_by_name(std::string_view name) {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == name) return i;
    return std::nullopt;
}

/// Option keys are every non-identity column key.
inline bool is_option_key(std::string_view key) {
    auto c = column_by_key(key);
    return c && !columns[*c].identity;
}

inline constexpr std::string_view option_all = "all";

/// Opaque byte payload; kept distinct from TEXT.
struct Blob {
    std::string bytes;
    bool operator==(const Blob&) const = default;
};

using Value = std::variant<std::monostate, std::int64_t, double, std::string, Blob>;

inline bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }

}  // namespace hbndb::db
