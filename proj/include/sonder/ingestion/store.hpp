#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sonder/ingestion/records.hpp"

namespace sonder {

/// Directory of line-delimited JSON corpora, one file per QueryCorpus,
/// sharded as <root>/<country>/<date>/<kind>-<hash>.jsonl.
///
/// Any number of readers may load concurrently. Writers serialize per key and
/// publish through an atomic rename, so readers never observe partial files.
class CorpusStore {
 public:
  explicit CorpusStore(std::filesystem::path root);

  /// Root from SONDER_DATA_DIR, falling back to ./data.
  static std::filesystem::path default_root();

  const std::filesystem::path& root() const noexcept { return root_; }

  void store(const QueryCorpus& corpus);
  QueryCorpus load(const QueryKey& key) const;
  std::optional<QueryCorpus> try_load(const QueryKey& key) const;
  bool contains(const QueryKey& key) const;

  /// Every stored key, sorted.
  std::vector<QueryKey> keys() const;
  std::vector<QueryKey> keys_for_query(std::string_view query) const;

  std::filesystem::path path_for(const QueryKey& key) const;

 private:
  std::mutex& key_mutex(const QueryKey& key) const;

  std::filesystem::path root_;
  mutable std::mutex locks_mu_;
  mutable std::map<std::string, std::unique_ptr<std::mutex>> key_locks_;
};

struct IngestIssue {
  std::size_t line = 0;
  std::string message;
};

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t skipped = 0;
  std::vector<IngestIssue> issues;
};

/// Reads one SearchRecord per line and merges them into the store.
///
/// Strict mode validates the whole file first and throws on the first
/// problem (ParseError with the line number, DuplicateRank, InvalidRecord)
/// without touching the store. Lenient mode skips bad lines and duplicates
/// and reports them. A corpus whose merged ranks are not contiguous from 1 is
/// rejected as a whole.
IngestReport ingest_jsonl(const std::filesystem::path& path, CorpusStore& store, bool strict);

}  // namespace sonder
