#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "advloss/attack.hpp"
#include "advloss/model.hpp"
#include "advloss/search.hpp"

namespace advloss::cli {

struct KeySpec {
  std::string key;
  std::string default_value;
  std::string help;
};

enum class ValueSource { Default, File, Cli };

// Flat key=value settings for one command. Values start at the module
// defaults, a config file overrides them, and command-line flags override
// both. Keys outside the command's set are rejected.
class RunConfig {
 public:
  explicit RunConfig(std::vector<KeySpec> keys);

  // "key = value" lines; blank lines and '#' comments are skipped.
  void apply_text(std::string_view text, const std::string& origin);
  void apply_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value, ValueSource source);

  bool has_key(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  ValueSource source_of(const std::string& key) const;

  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;

  const std::vector<KeySpec>& keys() const noexcept { return keys_; }
  // Current values as config-file text in key order.
  std::string dump() const;

 private:
  std::vector<KeySpec> keys_;
  std::map<std::string, std::string> values_;
  std::map<std::string, ValueSource> sources_;
};

// Shortest text that parses back to the same double.
std::string round_trip(double value);

std::vector<std::string> command_names();
// Key set of a command with defaults taken from the library structs.
std::vector<KeySpec> command_keys(std::string_view command);

AttackSpec attack_from(const RunConfig& config);
SearchConfig search_config_from(const RunConfig& config);
TrainConfig train_config_from(const RunConfig& config);

}  // namespace advloss::cli
