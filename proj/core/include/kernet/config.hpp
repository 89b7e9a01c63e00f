#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kernet/experiment.hpp"

namespace kernet {

using ConfigScalar = std::variant<bool, long long, double, std::string>;

struct ConfigValue {
  bool is_array = false;
  std::vector<ConfigScalar> items;  // exactly one entry unless is_array

  static ConfigValue scalar(ConfigScalar s) { return {false, {std::move(s)}}; }
  static ConfigValue array(std::vector<ConfigScalar> v) { return {true, std::move(v)}; }
};

/// Flat key/value view of a TOML-style file: `[section]` headers prefix the
/// keys that follow, values are strings, booleans, integers, floats, or
/// one-line arrays of those. Keys are dotted paths like `experiment.n_total`.
class ConfigMap {
public:
  static ConfigMap parse_file(const std::filesystem::path& path);
  static ConfigMap parse_string(std::string_view text);

  /// Applies one `key=value` string on top of the current contents.
  void apply_override(const std::string& key_equals_value);

  bool contains(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, ConfigValue value);

  bool get_bool(const std::string& key, bool fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<long long> get_int_array(const std::string& key,
                                       std::vector<long long> fallback) const;
  std::vector<double> get_double_array(const std::string& key,
                                       std::vector<double> fallback) const;
  std::vector<std::string> get_string_array(const std::string& key,
                                            std::vector<std::string> fallback) const;

  const std::map<std::string, ConfigValue>& entries() const { return values_; }

private:
  std::map<std::string, ConfigValue> values_;
};

/// Canonical text for a value; parsing it back yields the same value.
std::string render_config_value(const ConfigValue& value);

/// Builds the typed experiment description, applying defaults and validating.
/// Unknown keys under the experiment/lambda/kernel/synthetic prefixes are
/// rejected; other prefixes are left to their own consumers.
ExperimentConfig resolve_experiment(const ConfigMap& map);

/// The effective configuration as canonical key/value lines, one per entry,
/// sorted by key. Every line round-trips through apply_override.
std::vector<std::pair<std::string, std::string>> echo_config(const ExperimentConfig& cfg);

}  // namespace kernet
