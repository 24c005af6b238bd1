#pragma once

#include <sqlite3.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hbndb/db/record.hpp"
#include "hbndb/db/schema.hpp"
#include "hbndb/db/store.hpp"
#include "hbndb/errors.hpp"

namespace hbndb::db {

namespace detail {

struct SqliteClose {
    void operator()(sqlite3* db) const noexcept { sqlite3_close(db); }
};
struct SqliteFinalize {
    void operator()(sqlite3_stmt* s) const noexcept { sqlite3_finalize(s); }
};
using SqliteDb = std::unique_ptr<sqlite3, SqliteClose>;
using SqliteStmt = std::unique_ptr<sqlite3_stmt, SqliteFinalize>;

inline void check(sqlite3* db, int rc, const std::string& context) {
    if (rc != SQLITE_OK && rc != SQLITE_DONE && rc != SQLITE_ROW)
        throw Error(ErrorKind::io, context + ": " + (db ? sqlite3_errmsg(db) : sqlite3_errstr(rc)));
}

inline SqliteDb open_memory() {
    sqlite3* raw = nullptr;
    int rc = sqlite3_open_v2(":memory:", &raw, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr);
    SqliteDb db(raw);
    check(db.get(), rc, "open in-memory database");
    return db;
}

inline void exec(sqlite3* db, const std::string& sql) {
    char* err = nullptr;
    int rc = sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err);
    if (rc != SQLITE_OK) {
        std::string msg = err ? err : sqlite3_errstr(rc);
        sqlite3_free(err);
        throw Error(ErrorKind::io, "sqlite: " + msg);
    }
}

inline SqliteStmt prepare(sqlite3* db, const std::string& sql) {
    sqlite3_stmt* raw = nullptr;
    check(db, sqlite3_prepare_v2(db, sql.c_str(), -1, &raw, nullptr), "prepare");
    return SqliteStmt(raw);
}

inline std::string quote_ident(std::string_view name) {
    std::string out = "\"";
    for (char c : name) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline void bind(sqlite3* db, sqlite3_stmt* st, int idx, const Value& v) {
    int rc = SQLITE_OK;
    if (is_null(v)) rc = sqlite3_bind_null(st, idx);
    else if (auto i = std::get_if<std::int64_t>(&v)) rc = sqlite3_bind_int64(st, idx, *i);
    else if (auto d = std::get_if<double>(&v)) rc = sqlite3_bind_double(st, idx, *d);
    else if (auto s = std::get_if<std::string>(&v))
        rc = sqlite3_bind_text(st, idx, s->data(), static_cast<int>(s->size()), SQLITE_TRANSIENT);
    else if (auto b = std::get_if<Blob>(&v))
        rc = sqlite3_bind_blob(st, idx, b->bytes.data(), static_cast<int>(b->bytes.size()), SQLITE_TRANSIENT);
    check(db, rc, "bind");
}

inline Value column_value(sqlite3_stmt* st, int idx) {
    switch (sqlite3_column_type(st, idx)) {
        case SQLITE_NULL: return Value{};
        case SQLITE_INTEGER: return static_cast<std::int64_t>(sqlite3_column_int64(st, idx));
        case SQLITE_FLOAT: return sqlite3_column_double(st, idx);
        case SQLITE_TEXT: {
            auto p = reinterpret_cast<const char*>(sqlite3_column_text(st, idx));
            return std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(st, idx)));
        }
        default: {
            auto p = static_cast<const char*>(sqlite3_column_blob(st, idx));
            int n = sqlite3_column_bytes(st, idx);
            return Blob{p ? std::string(p, static_cast<std::size_t>(n)) : std::string()};
        }
    }
}

}  // namespace detail

/// One output row for `write_table`: rowid plus values in the order of the chosen columns.
struct TableRow {
    std::int64_t id;
    std::vector<Value> values;
};

/// Builds an `updated_data` table over a subset of schema columns (indices in schema order)
/// and returns the SQLite file image.
inline std::string write_table(std::span<const std::size_t> cols, std::span<const TableRow> rows) {
    auto db = detail::open_memory();
    std::string create = "CREATE TABLE " + std::string(table_name) + " (";
    std::string insert = "INSERT INTO " + std::string(table_name) + " (rowid";
    std::string params = "?";
    for (std::size_t i = 0; i < cols.size(); ++i) {
        const auto& c = columns.at(cols[i]);
        if (i) create += ", ";
        create += detail::quote_ident(c.name) + " " + std::string(sql_type(c.type));
        insert += ", " + detail::quote_ident(c.name);
        params += ", ?";
    }
    create += ")";
    insert += ") VALUES (" + params + ")";
    detail::exec(db.get(), create);
    detail::exec(db.get(), "BEGIN");
    auto st = detail::prepare(db.get(), insert);
    for (const auto& row : rows) {
        sqlite3_reset(st.get());
        sqlite3_clear_bindings(st.get());
        detail::check(db.get(), sqlite3_bind_int64(st.get(), 1, row.id), "bind rowid");
        for (std::size_t i = 0; i < row.values.size(); ++i)
            detail::bind(db.get(), st.get(), static_cast<int>(i + 2), row.values[i]);
        detail::check(db.get(), sqlite3_step(st.get()), "insert row");
    }
    st.reset();
    detail::exec(db.get(), "COMMIT");

    sqlite3_int64 size = 0;
    unsigned char* image = sqlite3_serialize(db.get(), "main", &size, 0);
    if (!image) throw Error(ErrorKind::io, "sqlite: serialization failed");
    std::string bytes(reinterpret_cast<const char*>(image), static_cast<std::size_t>(size));
    sqlite3_free(image);
    return bytes;
}

/// SQLite image of the whole snapshot, all columns, rows in identity order, rowid = record id.
inline std::string export_sqlite_bytes(const Snapshot& snap) {
    std::vector<std::size_t> cols(columns.size());
    for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = i;
    std::vector<TableRow> rows;
    rows.reserve(snap.size());
    for (const auto& r : snap.rows()) {
        TableRow row{r.id, {}};
        row.values.reserve(cols.size());
        for (auto c : cols) row.values.push_back(r.record.get(c));
        rows.push_back(std::move(row));
    }
    return write_table(cols, rows);
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::io, "cannot open '" + tmp.string() + "' for writing", "path");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorKind::io, "write to '" + tmp.string() + "' failed", "path");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorKind::io, "cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message(), "path");
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'", "path");
    return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void export_sqlite(const Snapshot& snap, const std::filesystem::path& path) {
    write_file(path, export_sqlite_bytes(snap));
}

namespace detail {

inline Snapshot read_records(sqlite3* db, const std::string& origin) {
    auto st = prepare(db, "SELECT rowid, * FROM " + std::string(table_name) + " ORDER BY rowid");
    const int ncols = sqlite3_column_count(st.get());
    std::vector<std::optional<std::size_t>> map(static_cast<std::size_t>(ncols));
    std::vector<bool> seen(columns.size(), false);
    for (int i = 1; i < ncols; ++i) {
        auto c = column_by_name(sqlite3_column_name(st.get(), i));
        map[static_cast<std::size_t>(i)] = c;
        if (c) seen[*c] = true;
    }
    for (std::size_t i = 0; i < identity_column_count; ++i)
        if (!seen[i])
            throw Error(ErrorKind::io, origin + ": table lacks identity column '" + std::string(columns[i].name) + "'");
    RecordStore store;
    int rc;
    while ((rc = sqlite3_step(st.get())) == SQLITE_ROW) {
        DefectRecord rec;
        std::int64_t id = sqlite3_column_int64(st.get(), 0);
        for (int i = 1; i < ncols; ++i)
            if (auto c = map[static_cast<std::size_t>(i)]) rec.set(*c, column_value(st.get(), i));
        store.ingest_with_id(id, std::move(rec));
    }
    check(db, rc, origin + ": read rows");
    return *store.seal();
}

}  // namespace detail

/// Reads an `updated_data` table. Columns absent from older files come back as NULL.
inline Snapshot import_sqlite(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::io, "'" + path.string() + "' does not exist", "path");
    sqlite3* raw = nullptr;
    int rc = sqlite3_open_v2(path.string().c_str(), &raw, SQLITE_OPEN_READONLY, nullptr);
    detail::SqliteDb db(raw);
    detail::check(db.get(), rc, "open '" + path.string() + "'");
    return detail::read_records(db.get(), path.string());
}

inline Snapshot import_sqlite_bytes(const std::string& bytes) {
    auto db = detail::open_memory();
    auto* buf = static_cast<unsigned char*>(sqlite3_malloc64(bytes.size()));
    if (!buf && !bytes.empty()) throw std::bad_alloc();
    std::memcpy(buf, bytes.data(), bytes.size());
    int rc = sqlite3_deserialize(db.get(), "main", buf, static_cast<sqlite3_int64>(bytes.size()),
                                 static_cast<sqlite3_int64>(bytes.size()),
                                 SQLITE_DESERIALIZE_FREEONCLOSE | SQLITE_DESERIALIZE_READONLY);
    detail::check(db.get(), rc, "deserialize");
    return detail::read_records(db.get(), "<memory>");
}

}  // namespace hbndb::db
