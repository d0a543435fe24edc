// fixtures.hpp
// Versioned store of frozen regression values: key -> {value, tolerance,
// recorded_at, git_ref}, kept as a JSON file.

#pragma once

#include <json.hpp>

#include <map>
#include <optional>
#include <string>

namespace qperm::xcli {

struct FixtureEntry {
  double value = 0;
  double tolerance = 1e-9;
  std::string recorded_at;
  std::string git_ref;
};

struct FixtureCheck {
  bool ok = true;
  bool missing = false;
  double stored = 0, measured = 0, diff = 0, tolerance = 0;
};

class FixtureStore {
 public:
  static constexpr int kVersion = 1;

  FixtureStore() = default;
  // Loads `path`; a missing file gives an empty store. Throws on a malformed
  // file or a version mismatch.
  static FixtureStore load(const std::string& path);
  void save(const std::string& path) const;

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const FixtureEntry& at(const std::string& key) const;
  const std::map<std::string, FixtureEntry>& entries() const { return entries_; }

  // Adds an entry. An existing key within its tolerance is left untouched;
  // a differing one throws std::runtime_error unless `force`. Returns true
  // if the store changed.
  bool record(const std::string& key, double value, double tolerance, const std::string& git_ref, bool force = false);
  // |measured - stored| <= tolerance; missing keys fail with missing = true.
  FixtureCheck check(const std::string& key, double measured) const;

  nlohmann::json to_json() const;

 private:
  std::map<std::string, FixtureEntry> entries_;
};

// Commit the binary was configured from ("unknown" outside a checkout).
std::string build_git_ref();

}  // namespace qperm::xcli
