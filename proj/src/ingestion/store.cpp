#include "sonder/ingestion/store.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "sonder/embedding.hpp"
#include "sonder/error.hpp"

namespace sonder {

namespace fs = std::filesystem;

namespace {

std::vector<SearchRecord> read_corpus_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open " + path.string());
  std::vector<SearchRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::CorruptStore, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace

CorpusStore::CorpusStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

fs::path CorpusStore::default_root() {
  if (const char* dir = std::getenv("SONDER_DATA_DIR"); dir && *dir) return dir;
  return "data";
}

fs::path CorpusStore::path_for(const QueryKey& key) const {
  char name[64];
  std::snprintf(name, sizeof name, "%s-%016llx.jsonl", std::string(to_string(key.kind)).c_str(),
                static_cast<unsigned long long>(fnv1a64(key.query)));
  return root_ / key.country / key.date.to_string() / name;
}

std::mutex& CorpusStore::key_mutex(const QueryKey& key) const {
  std::lock_guard lock(locks_mu_);
  auto& slot = key_locks_[key.to_string()];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

void CorpusStore::store(const QueryCorpus& corpus) {
  validate(corpus);
  std::lock_guard key_lock(key_mutex(corpus.key));

  const fs::path target = path_for(corpus.key);
  if (fs::exists(target)) {
    std::ifstream in(target);
    std::string first;
    std::getline(in, first);
    if (!first.empty()) {
      try {
        if (record_from_json(nlohmann::json::parse(first)).key() != corpus.key) {
          throw Error(ErrorCode::CorruptStore, "file name collision at " + target.string());
        }
      } catch (const nlohmann::json::exception&) {
        // A corrupt file is simply replaced.
      }
    }
  }

  fs::create_directories(target.parent_path());
  static std::atomic<unsigned> counter{0};
  std::ostringstream tmp_name;
  tmp_name << target.filename().string() << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id())
           << '.' << counter++;
  const fs::path tmp = target.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::CorruptStore, "cannot write " + tmp.string());
    for (const auto& r : corpus.records) out << to_json(r).dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::CorruptStore, "short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::optional<QueryCorpus> CorpusStore::try_load(const QueryKey& key) const {
  const fs::path path = path_for(key);
  if (!fs::exists(path)) return std::nullopt;
  QueryCorpus corpus{key, read_corpus_file(path)};
  if (!corpus.records.empty() && corpus.records.front().key() != key) return std::nullopt;
  try {
    validate(corpus);
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptStore, path.string() + ": " + e.what());
  }
  return corpus;
}

QueryCorpus CorpusStore::load(const QueryKey& key) const {
  auto corpus = try_load(key);
  if (!corpus) throw Error(ErrorCode::NotFound, "no corpus stored for " + key.to_string());
  return std::move(*corpus);
}

bool CorpusStore::contains(const QueryKey& key) const { return try_load(key).has_value(); }

std::vector<QueryKey> CorpusStore::keys() const {
  std::vector<QueryKey> out;
  if (!fs::exists(root_)) return out;
  // Only <country>/<date>/<file>.jsonl shards hold corpora.
  for (const auto& country : fs::directory_iterator(root_)) {
    if (!country.is_directory() || !is_country_code(country.path().filename().string())) continue;
    for (const auto& day : fs::directory_iterator(country.path())) {
      if (!day.is_directory()) continue;
      for (const auto& file : fs::directory_iterator(day.path())) {
        if (!file.is_regular_file() || file.path().extension() != ".jsonl") continue;
        std::ifstream in(file.path());
        std::string first;
        if (!std::getline(in, first) || first.empty()) continue;
        try {
          out.push_back(record_from_json(nlohmann::json::parse(first)).key());
        } catch (const std::exception& e) {
          throw Error(ErrorCode::CorruptStore, file.path().string() + ": " + e.what());
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<QueryKey> CorpusStore::keys_for_query(std::string_view query) const {
  std::vector<QueryKey> out;
  for (auto& k : keys()) {
    if (k.query == query) out.push_back(std::move(k));
  }
  return out;
}

IngestReport ingest_jsonl(const fs::path& path, CorpusStore& store, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open " + path.string());

  IngestReport report;
  auto reject = [&](ErrorCode code, std::size_t line, const std::string& message) {
    if (strict) throw Error(code, path.string() + ":" + std::to_string(line) + ": " + message);
    report.issues.push_back({line, message});
    ++report.skipped;
  };

  std::map<QueryKey, std::vector<std::pair<std::size_t, SearchRecord>>> groups;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      reject(ErrorCode::ParseError, line_no, e.what());
      continue;
    }
    try {
      auto record = record_from_json(j);
      groups[record.key()].emplace_back(line_no, std::move(record));
    } catch (const Error& e) {
      reject(ErrorCode::InvalidRecord, line_no, e.what());
    }
  }

  std::vector<QueryCorpus> merged_corpora;
  for (auto& [key, entries] : groups) {
    QueryCorpus merged{key, {}};
    if (auto existing = store.try_load(key)) merged = std::move(*existing);
    std::set<int> ranks;
    for (const auto& r : merged.records) ranks.insert(r.rank);

    std::size_t added = 0;
    for (auto& [line_no, record] : entries) {
      if (!ranks.insert(record.rank).second) {
        reject(ErrorCode::DuplicateRank, line_no,
               "duplicate rank " + std::to_string(record.rank) + " for " + key.to_string());
        continue;
      }
      merged.records.push_back(std::move(record));
      ++added;
    }
    if (added == 0) continue;
    std::sort(merged.records.begin(), merged.records.end(),
              [](const SearchRecord& a, const SearchRecord& b) { return a.rank < b.rank; });
    try {
      validate(merged);
    } catch (const Error& e) {
      if (strict) throw Error(e.code(), path.string() + ": " + e.what());
      report.issues.push_back({entries.front().first, e.what()});
      report.skipped += added;
      continue;
    }
    report.accepted += added;
    merged_corpora.push_back(std::move(merged));
  }

  for (const auto& corpus : merged_corpora) store.store(corpus);
  return report;
}

}  // namespace sonder
