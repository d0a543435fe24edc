// fixtures.cpp

#include "fixtures.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#ifndef QPERM_GIT_REF
#define QPERM_GIT_REF "unknown"
#endif

namespace qperm::xcli {

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

std::string build_git_ref() { return QPERM_GIT_REF; }

FixtureStore FixtureStore::load(const std::string& path) {
  FixtureStore store;
  std::ifstream in(path);
  if (!in) return store;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed fixture file " + path + ": " + e.what());
  }
  if (j.value("version", 0) != kVersion) throw std::runtime_error("fixture file version mismatch in " + path);
  for (const auto& [key, e] : j.at("entries").items())
    store.entries_[key] = {e.at("value").get<double>(), e.at("tolerance").get<double>(),
                           e.at("recorded_at").get<std::string>(), e.at("git_ref").get<std::string>()};
  return store;
}

void FixtureStore::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write fixture file " + path);
  out << to_json().dump(2) << "\n";
}

const FixtureEntry& FixtureStore::at(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw std::out_of_range("no fixture named " + key);
  return it->second;
}

bool FixtureStore::record(const std::string& key, double value, double tolerance, const std::string& git_ref,
                          bool force) {
  if (!std::isfinite(value)) throw std::invalid_argument("cannot freeze a non-finite value for " + key);
  auto it = entries_.find(key);
  if (it != entries_.end() && !force) {
    if (std::abs(it->second.value - value) <= it->second.tolerance) return false;
    std::ostringstream os;
    os << std::setprecision(17) << "fixture " << key << " holds " << it->second.value << ", measured " << value
       << " (use --force to overwrite)";
    throw std::runtime_error(os.str());
  }
  entries_[key] = {value, tolerance, utc_now(), git_ref};
  return true;
}

FixtureCheck FixtureStore::check(const std::string& key, double measured) const {
  FixtureCheck c;
  c.measured = measured;
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    c.ok = false;
    c.missing = true;
    return c;
  }
  c.stored = it->second.value;
  c.tolerance = it->second.tolerance;
  c.diff = std::abs(measured - c.stored);
  c.ok = c.diff <= c.tolerance;
  return c;
}

nlohmann::json FixtureStore::to_json() const {
  nlohmann::json entries = nlohmann::json::object();
  for (const auto& [key, e] : entries_)
    entries[key] = {{"value", e.value}, {"tolerance", e.tolerance}, {"recorded_at", e.recorded_at},
                    {"git_ref", e.git_ref}};
  return {{"version", kVersion}, {"entries", entries}};
}

}  // namespace qperm::xcli
