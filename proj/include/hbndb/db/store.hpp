#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "hbndb/db/record.hpp"
#include "hbndb/errors.hpp"

namespace hbndb::db {

struct StoredRecord {
    std::int64_t id;
    DefectRecord record;
};

/// Immutable, identity-sorted view of the store. Safe to share across threads.
class Snapshot {
public:
    Snapshot() = default;

    explicit Snapshot(std::vector<StoredRecord> rows) : rows_(std::move(rows)) {
        std::sort(rows_.begin(), rows_.end(),
                  [](const StoredRecord& a, const StoredRecord& b) { return a.record.identity() < b.record.identity(); });
        for (std::size_t i = 1; i < rows_.size(); ++i)
            if (rows_[i - 1].record.identity() == rows_[i].record.identity())
                throw Error(ErrorKind::conflict, "duplicate identity for defect '" + rows_[i].record.defect + "'",
                            "identity");
    }

    std::span<const StoredRecord> rows() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }

    const StoredRecord* find(std::int64_t id) const {
        for (const auto& r : rows_)
            if (r.id == id) return &r;
        return nullptr;
    }

private:
    std::vector<StoredRecord> rows_;
};

/// Single-writer record store. `seal()` hands out immutable snapshots; readers never see
/// a half-finished ingestion.
class RecordStore {
public:
    /// Validates and appends; returns the new record id.
    std::int64_t ingest(DefectRecord rec) {
        validate(rec);
        std::lock_guard lock(mutex_);
        check_unique(rec);
        std::int64_t id = next_id_++;
        rows_.push_back({id, std::move(rec)});
        return id;
    }

    /// Ingests with a caller-chosen id (used when re-reading an exported file).
    void ingest_with_id(std::int64_t id, DefectRecord rec) {
        validate(rec);
        std::lock_guard lock(mutex_);
        check_unique(rec);
        for (const auto& r : rows_)
            if (r.id == id) throw Error(ErrorKind::conflict, "record id " + std::to_string(id) + " already used", "id");
        rows_.push_back({id, std::move(rec)});
        next_id_ = std::max(next_id_, id + 1);
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return rows_.size();
    }

    std::shared_ptr<const Snapshot> seal() const {
        std::lock_guard lock(mutex_);
        return std::make_shared<const Snapshot>(rows_);
    }

private:
    void check_unique(const DefectRecord& rec) const {
        for (const auto& r : rows_)
            if (r.record.identity() == rec.identity())
                throw Error(ErrorKind::conflict,
                            "record (" + rec.host + ", " + rec.defect + ", " + std::to_string(rec.charge_state) + ", " +
                                rec.spin_multiplicity + ", " + rec.optical_spin_transition + ") already exists",
                            "identity");
    }

    mutable std::mutex mutex_;
    std::vector<StoredRecord> rows_;
    std::int64_t next_id_ = 1;
};

}  // namespace hbndb::db
