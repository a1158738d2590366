#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetbridge/core/model.hpp"

namespace hetbridge::storage {

class StorageUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorruptLog : public std::runtime_error {
 public:
  CorruptLog(const std::string& what, std::size_t line) : std::runtime_error(what), line_(line) {}
  /// 1-based line number of the first bad record.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline constexpr std::int64_t kChunkSeconds = 60;

/// floor(epoch_seconds / 60), also for instants before the epoch.
std::int64_t bucket_key(Timestamp ts) noexcept;

/// All rows whose inserted_ts falls in one 60-second bucket, in id order.
struct Chunk {
  std::int64_t bucket_key = 0;
  std::vector<StoredReading> rows;
};

struct RecoveryReport {
  std::size_t rows = 0;
  bool discarded_partial_tail = false;
};

/// Time-partitioned, append-only reading store.
///
/// Inserts are serialized under an exclusive lock that assigns the next id,
/// appends the write-ahead log line (when enabled) and appends to the bucket's
/// chunk. inserted_ts is clamped to be non-decreasing in id order. Queries take
/// a shared lock and visit only chunks overlapping the requested range.
class ReadingStore {
 public:
  /// In-memory store without durability.
  ReadingStore();
  /// Starts a new write-ahead log at `wal_path`, replacing any existing file.
  explicit ReadingStore(const std::filesystem::path& wal_path);
  ~ReadingStore();
  ReadingStore(const ReadingStore&) = delete;
  ReadingStore& operator=(const ReadingStore&) = delete;

  /// Replays an NDJSON log. A final line that is incomplete (no newline) and
  /// unparsable is dropped with a warning and trimmed from the file; any other
  /// bad line throws CorruptLog. The returned store keeps appending to the log.
  static std::unique_ptr<ReadingStore> recover(const std::filesystem::path& wal_path,
                                               RecoveryReport* report = nullptr);

  /// Throws StorageUnavailable when the log write fails; no id is consumed then.
  StoredReading insert(const IngestRecord& rec, Timestamp inserted_ts);

  /// Newest first, at most filter.limit rows.
  std::vector<StoredReading> query(const ReadingsFilter& filter) const;
  /// Rows in [since, until) per protocol.
  ProtocolCounts count_by_protocol(Timestamp since, Timestamp until) const;

  std::optional<Timestamp> newest_inserted() const;
  std::size_t size() const;
  std::int64_t next_id() const;
  std::vector<std::int64_t> chunk_keys() const;
  /// Every row in id order.
  std::vector<StoredReading> all() const;

 private:
  struct LogFile;

  void append_row(StoredReading row);

  mutable std::shared_mutex mu_;
  std::map<std::int64_t, Chunk> chunks_;
  std::int64_t next_id_ = 1;
  std::size_t size_ = 0;
  std::optional<Timestamp> last_inserted_;
  std::unique_ptr<LogFile> log_;
};

}  // namespace hetbridge::storage
