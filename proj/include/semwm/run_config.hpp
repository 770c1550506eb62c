#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace semwm {

/// Flat key=value run settings. Every key has a default; files and flags may
/// only set known keys. Later sets win, so apply the file before the flags.
class RunConfig {
 public:
  RunConfig();

  /// '#' starts a comment; blank lines are ignored. Throws UsageError on
  /// unknown keys or malformed lines, DataError if the file is unreadable.
  void load_file(const std::filesystem::path& path);
  void set(std::string_view key, std::string value);
  bool has(std::string_view key) const;

  const std::string& str(std::string_view key) const;
  double num(std::string_view key) const;
  long integer(std::string_view key) const;
  std::uint64_t u64(std::string_view key) const;
  bool flag(std::string_view key) const;
  std::vector<double> num_list(std::string_view key) const;
  std::vector<std::size_t> size_list(std::string_view key) const;

  /// Canonical "key=value" lines, sorted by key.
  std::string serialize() const;
  /// FNV-1a of serialize(), hex.
  std::string hash() const;
  /// "# config_hash=<hash>" followed by "# key=value" for every setting.
  std::string provenance_header() const;

  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// Known keys with their defaults, in documentation order.
const std::vector<std::pair<std::string, std::string>>& config_defaults();

}  // namespace semwm
