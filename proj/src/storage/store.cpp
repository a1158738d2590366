#include "hetbridge/storage/store.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>
#include <sstream>

#include "hetbridge/core/json_codec.hpp"
#include "hetbridge/core/log.hpp"

namespace hetbridge::storage {

std::int64_t bucket_key(Timestamp ts) noexcept {
  constexpr std::int64_t width = kChunkSeconds * 1'000'000;
  const std::int64_t us = ts.micros();
  return us >= 0 ? us / width : -((-us + width - 1) / width);
}

struct ReadingStore::LogFile {
  std::filesystem::path path;
  std::FILE* file = nullptr;

  LogFile(std::filesystem::path p, const char* mode) : path(std::move(p)) {
    file = std::fopen(path.c_str(), mode);
    if (file == nullptr) {
      throw StorageUnavailable("cannot open log " + path.string() + ": " + std::strerror(errno));
    }
  }
  ~LogFile() {
    if (file != nullptr) std::fclose(file);
  }

  void append(const std::string& line) {
    if (std::fputs(line.c_str(), file) < 0 || std::fputc('\n', file) == EOF || std::fflush(file) != 0) {
      std::clearerr(file);
      throw StorageUnavailable("write to log " + path.string() + " failed: " + std::strerror(errno));
    }
  }
};

ReadingStore::ReadingStore() = default;

ReadingStore::ReadingStore(const std::filesystem::path& wal_path)
    : log_(std::make_unique<LogFile>(wal_path, "w")) {}

ReadingStore::~ReadingStore() = default;

void ReadingStore::append_row(StoredReading row) {
  const std::int64_t key = bucket_key(row.inserted_ts);
  Chunk& chunk = chunks_[key];
  chunk.bucket_key = key;
  last_inserted_ = row.inserted_ts;
  next_id_ = row.id + 1;
  ++size_;
  chunk.rows.push_back(std::move(row));
}

StoredReading ReadingStore::insert(const IngestRecord& rec, Timestamp inserted_ts) {
  std::unique_lock lock(mu_);
  StoredReading row;
  row.id = next_id_;
  row.device = rec.device;
  row.protocol = rec.protocol;
  row.message = rec.message;
  row.origin_ts = rec.origin_ts;
  // Concurrent callers may stamp out of order; keep inserted_ts monotonic in id order.
  row.inserted_ts = last_inserted_ && inserted_ts < *last_inserted_ ? *last_inserted_ : inserted_ts;
  row.sec_diff = compute_sec_diff(row.origin_ts, row.inserted_ts);
  if (log_) log_->append(serialize(row));
  append_row(row);
  return row;
}

std::vector<StoredReading> ReadingStore::query(const ReadingsFilter& filter) const {
  std::shared_lock lock(mu_);
  std::vector<StoredReading> out;
  if (filter.limit && *filter.limit == 0) return out;
  if (filter.since && filter.until && !(*filter.since < *filter.until)) return out;

  auto first = filter.since ? chunks_.lower_bound(bucket_key(*filter.since)) : chunks_.begin();
  auto last = filter.until ? chunks_.upper_bound(bucket_key(*filter.until - std::chrono::microseconds(1)))
                           : chunks_.end();
  for (auto it = std::make_reverse_iterator(last); it != std::make_reverse_iterator(first); ++it) {
    const auto& rows = it->second.rows;
    for (auto row = rows.rbegin(); row != rows.rend(); ++row) {
      if (!filter.matches(*row)) continue;
      out.push_back(*row);
      if (filter.limit && out.size() >= *filter.limit) return out;
    }
  }
  return out;
}

ProtocolCounts ReadingStore::count_by_protocol(Timestamp since, Timestamp until) const {
  std::shared_lock lock(mu_);
  ProtocolCounts counts;
  if (!(since < until)) return counts;
  ReadingsFilter range{std::nullopt, since, until, std::nullopt};
  auto first = chunks_.lower_bound(bucket_key(since));
  auto last = chunks_.upper_bound(bucket_key(until - std::chrono::microseconds(1)));
  for (auto it = first; it != last; ++it) {
    for (const auto& row : it->second.rows) {
      if (range.matches(row)) ++counts[row.protocol];
    }
  }
  return counts;
}

std::optional<Timestamp> ReadingStore::newest_inserted() const {
  std::shared_lock lock(mu_);
  return last_inserted_;
}

std::size_t ReadingStore::size() const {
  std::shared_lock lock(mu_);
  return size_;
}

std::int64_t ReadingStore::next_id() const {
  std::shared_lock lock(mu_);
  return next_id_;
}

std::vector<std::int64_t> ReadingStore::chunk_keys() const {
  std::shared_lock lock(mu_);
  std::vector<std::int64_t> keys;
  for (const auto& [k, _] : chunks_) keys.push_back(k);
  return keys;
}

std::vector<StoredReading> ReadingStore::all() const {
  std::shared_lock lock(mu_);
  std::vector<StoredReading> out;
  out.reserve(size_);
  for (const auto& [_, chunk] : chunks_) out.insert(out.end(), chunk.rows.begin(), chunk.rows.end());
  return out;
}

std::unique_ptr<ReadingStore> ReadingStore::recover(const std::filesystem::path& wal_path, RecoveryReport* report) {
  std::ifstream in(wal_path, std::ios::binary);
  if (!in) throw StorageUnavailable("cannot read log " + wal_path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  auto store = std::unique_ptr<ReadingStore>(new ReadingStore());
  RecoveryReport rep;
  std::size_t pos = 0;
  std::size_t valid_bytes = 0;
  std::size_t line_no = 0;
  bool needs_newline = false;

  while (pos < text.size()) {
    ++line_no;
    const std::size_t nl = text.find('\n', pos);
    const bool complete = nl != std::string::npos;
    const std::string_view line(text.data() + pos, (complete ? nl : text.size()) - pos);
    try {
      StoredReading row = parse_stored_reading(line);
      if (row.id < store->next_id_) {
        throw CorruptLog("log ids are not strictly increasing at line " + std::to_string(line_no), line_no);
      }
      if (store->last_inserted_ && row.inserted_ts < *store->last_inserted_) {
        throw CorruptLog("inserted_ts goes backwards at line " + std::to_string(line_no), line_no);
      }
      store->append_row(std::move(row));
    } catch (const ModelError& e) {
      if (complete) {
        throw CorruptLog("bad record at line " + std::to_string(line_no) + ": " + e.what(), line_no);
      }
      log::warn("discarding truncated final record at line {} of {}", line_no, wal_path.string());
      rep.discarded_partial_tail = true;
      break;
    }
    if (!complete) needs_newline = true;
    pos = complete ? nl + 1 : text.size();
    valid_bytes = pos;
  }

  if (rep.discarded_partial_tail) std::filesystem::resize_file(wal_path, valid_bytes);
  store->log_ = std::make_unique<LogFile>(wal_path, "a");
  if (needs_newline && (std::fputc('\n', store->log_->file) == EOF || std::fflush(store->log_->file) != 0)) {
    throw StorageUnavailable("cannot repair log " + wal_path.string());
  }
  rep.rows = store->size_;
  if (report) *report = rep;
  return store;
}

}  // namespace hetbridge::storage
