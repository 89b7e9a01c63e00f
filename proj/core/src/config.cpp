#include "kernet/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <climits>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace kernet {

namespace {

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.' && c != '-') {
      return false;
    }
  }
  return key.front() != '.' && key.back() != '.';
}

bool looks_numeric(const std::string& text) {
  const char c = text.front();
  return std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.';
}

ConfigScalar parse_scalar(const std::string& raw, int line) {
  const std::string text = trim(raw);
  if (text.empty()) throw ConfigError("line " + std::to_string(line) + ": empty value");
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
    return text.substr(1, text.size() - 2);
  }
  if (text == "true") return true;
  if (text == "false") return false;
  if (looks_numeric(text)) {
    bool integral = true;
    for (std::size_t i = 0; i < text.size(); ++i) {
      const char c = text[i];
      if (std::isdigit(static_cast<unsigned char>(c))) continue;
      if ((c == '+' || c == '-') && i == 0) continue;
      integral = false;
      break;
    }
    if (integral) {
      errno = 0;
      char* end = nullptr;
      const long long value = std::strtoll(text.c_str(), &end, 10);
      if (errno == ERANGE || end != text.c_str() + text.size()) {
        throw ConfigError("line " + std::to_string(line) + ": bad integer '" + text + "'");
      }
      return value;
    }
    errno = 0;
    char* end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (end == text.c_str() + text.size() && errno != ERANGE) {
      return value;
    }
    throw ConfigError("line " + std::to_string(line) + ": bad number '" + text + "'");
  }
  for (const char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ||
        c == '/' || c == ':' || c == '+') {
      continue;
    }
    throw ConfigError("line " + std::to_string(line) + ": malformed value '" + text + "'");
  }
  return text;  // bare string
}

ConfigValue parse_value(const std::string& raw, int line) {
  const std::string text = trim(raw);
  if (text.empty()) throw ConfigError("line " + std::to_string(line) + ": empty value");
  if (text.front() == '[') {
    if (text.back() != ']') {
      throw ConfigError("line " + std::to_string(line) + ": array must close on one line");
    }
    std::vector<ConfigScalar> items;
    const std::string inner = trim(std::string_view(text).substr(1, text.size() - 2));
    if (!inner.empty()) {
      std::size_t start = 0;
      bool quoted = false;
      for (std::size_t i = 0; i <= inner.size(); ++i) {
        if (i < inner.size() && inner[i] == '"') quoted = !quoted;
        if (i == inner.size() || (inner[i] == ',' && !quoted)) {
          items.push_back(parse_scalar(inner.substr(start, i - start), line));
          start = i + 1;
        }
      }
    }
    return ConfigValue::array(std::move(items));
  }
  return ConfigValue::scalar(parse_scalar(text, line));
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string render_scalar(const ConfigScalar& s) {
  if (std::holds_alternative<bool>(s)) return std::get<bool>(s) ? "true" : "false";
  if (std::holds_alternative<long long>(s)) return std::to_string(std::get<long long>(s));
  if (std::holds_alternative<double>(s)) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), std::get<double>(s));
    return std::string(buf, ptr);
  }
  const std::string& text = std::get<std::string>(s);
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == '[' || c == ']' ||
        c == '"' || c == '#' || c == '=') {
      return '"' + text + '"';
    }
  }
  return text.empty() ? "\"\"" : text;
}

}  // namespace

ConfigMap ConfigMap::parse_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path.string());
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return parse_string(buffer.str());
}

ConfigMap ConfigMap::parse_string(std::string_view text) {
  ConfigMap out;
  std::string prefix;
  int line_number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t next = text.find('\n', pos);
    const std::string_view raw_line =
        text.substr(pos, next == std::string_view::npos ? text.size() - pos : next - pos);
    pos = next == std::string_view::npos ? text.size() + 1 : next + 1;
    ++line_number;

    const std::string line = trim(strip_comment(std::string(raw_line)));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_number) + ": unterminated table header");
      }
      const std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!valid_key(name)) {
        throw ConfigError("line " + std::to_string(line_number) + ": bad table name");
      }
      prefix = name + ".";
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_number) + ": expected key = value");
    }
    const std::string key = prefix + trim(std::string_view(line).substr(0, eq));
    if (!valid_key(key)) {
      throw ConfigError("line " + std::to_string(line_number) + ": bad key '" + key + "'");
    }
    out.values_[key] = parse_value(line.substr(eq + 1), line_number);
  }
  return out;
}

void ConfigMap::apply_override(const std::string& key_equals_value) {
  const std::size_t eq = key_equals_value.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key=value, got '" + key_equals_value + "'");
  }
  const std::string key = trim(std::string_view(key_equals_value).substr(0, eq));
  if (!valid_key(key)) throw ConfigError("override has a bad key: '" + key + "'");
  values_[key] = parse_value(key_equals_value.substr(eq + 1), 0);
}

void ConfigMap::set(const std::string& key, ConfigValue value) {
  if (!valid_key(key)) throw ConfigError("bad config key: '" + key + "'");
  values_[key] = std::move(value);
}

namespace {

const ConfigValue* find(const std::map<std::string, ConfigValue>& values,
                        const std::string& key) {
  const auto it = values.find(key);
  return it == values.end() ? nullptr : &it->second;
}

[[noreturn]] void type_error(const std::string& key, const char* expected) {
  throw ConfigError("config key '" + key + "' must be " + expected);
}

}  // namespace

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  const ConfigValue* v = find(values_, key);
  if (!v) return fallback;
  if (v->is_array || !std::holds_alternative<bool>(v->items[0])) type_error(key, "a boolean");
  return std::get<bool>(v->items[0]);
}

long long ConfigMap::get_int(const std::string& key, long long fallback) const {
  const ConfigValue* v = find(values_, key);
  if (!v) return fallback;
  if (v->is_array || !std::holds_alternative<long long>(v->items[0])) {
    type_error(key, "an integer");
  }
  return std::get<long long>(v->items[0]);
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  const ConfigValue* v = find(values_, key);
  if (!v) return fallback;
  if (v->is_array) type_error(key, "a number");
  if (std::holds_alternative<long long>(v->items[0])) {
    return static_cast<double>(std::get<long long>(v->items[0]));
  }
  if (!std::holds_alternative<double>(v->items[0])) type_error(key, "a number");
  return std::get<double>(v->items[0]);
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
  const ConfigValue* v = find(values_, key);
  if (!v) return fallback;
  if (v->is_array || !std::holds_alternative<std::string>(v->items[0])) {
    type_error(key, "a string");
  }
  return std::get<std::string>(v->items[0]);
}

std::vector<long long> ConfigMap::get_int_array(const std::string& key,
                                                std::vector<long long> fallback) const {
  const ConfigValue* v = find(values_, key);
  if (!v) return fallback;
  if (!v->is_array) type_error(key, "an integer array");
  std::vector<long long> out;
  out.reserve(v->items.size());
  for (const auto& item : v->items) {
    if (!std::holds_alternative<long long>(item)) type_error(key, "an integer array");
    out.push_back(std::get<long long>(item));
  }
  return out;
}

std::vector<double> ConfigMap::get_double_array(const std::string& key,
                                                std::vector<double> fallback) const {
  const ConfigValue* v = find(values_, key);
  if (!v) return fallback;
  if (!v->is_array) type_error(key, "a number array");
  std::vector<double> out;
  out.reserve(v->items.size());
  for (const auto& item : v->items) {
    if (std::holds_alternative<long long>(item)) {
      out.push_back(static_cast<double>(std::get<long long>(item)));
    } else if (std::holds_alternative<double>(item)) {
      out.push_back(std::get<double>(item));
    } else {
      type_error(key, "a number array");
    }
  }
  return out;
}

std::vector<std::string> ConfigMap::get_string_array(const std::string& key,
                                                     std::vector<std::string> fallback) const {
  const ConfigValue* v = find(values_, key);
  if (!v) return fallback;
  if (!v->is_array) type_error(key, "a string array");
  std::vector<std::string> out;
  out.reserve(v->items.size());
  for (const auto& item : v->items) {
    if (!std::holds_alternative<std::string>(item)) type_error(key, "a string array");
    out.push_back(std::get<std::string>(item));
  }
  return out;
}

std::string render_config_value(const ConfigValue& value) {
  if (!value.is_array) return render_scalar(value.items[0]);
  std::string out = "[";
  for (std::size_t i = 0; i < value.items.size(); ++i) {
    if (i > 0) out += ',';
    out += render_scalar(value.items[i]);
  }
  out += ']';
  return out;
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "experiment.problem",
      "experiment.n_total",
      "experiment.m_list",
      "experiment.variants",
      "experiment.seeds",
      "experiment.quadrature_size",
      "experiment.compute_rkhs_error",
      "experiment.output_path",
      "lambda.rule",
      "lambda.value",
      "lambda.theta",
      "lambda.grid_min",
      "lambda.grid_max",
      "lambda.grid_size",
      "lambda.holdout_fraction",
      "kernel.family",
      "kernel.width",
      "kernel.degree",
      "kernel.offset",
      "kernel.domain_lo",
      "kernel.domain_hi",
      "synthetic.r",
      "synthetic.u_star",
      "synthetic.noise_sd",
      "synthetic.spectrum_grid",
  };
  return keys;
}

bool owned_prefix(const std::string& key) {
  return key.starts_with("experiment.") || key.starts_with("lambda.") ||
         key.starts_with("kernel.") || key.starts_with("synthetic.");
}

int checked_int(long long value, const char* what) {
  if (value < INT_MIN || value > INT_MAX) {
    throw ConfigError(std::string(what) + " out of range");
  }
  return static_cast<int>(value);
}

}  // namespace

ExperimentConfig resolve_experiment(const ConfigMap& map) {
  for (const auto& [key, value] : map.entries()) {
    if (owned_prefix(key) && known_keys().count(key) == 0) {
      throw ConfigError("unknown config key: " + key);
    }
  }

  ExperimentConfig cfg;
  const std::string problem = map.get_string("experiment.problem", "paper_sim");
  if (problem == "paper_sim") {
    cfg.problem = ExperimentConfig::Problem::PaperSim;
  } else if (problem == "synthetic") {
    cfg.problem = ExperimentConfig::Problem::Synthetic;
  } else {
    throw ConfigError("experiment.problem must be paper_sim or synthetic");
  }

  const std::string family = map.get_string("kernel.family", "brownian_plus_one");
  if (cfg.problem == ExperimentConfig::Problem::PaperSim && family != "brownian_plus_one") {
    throw ConfigError("paper_sim uses the brownian_plus_one kernel");
  }
  try {
    if (family == "brownian_plus_one") {
      cfg.kernel = KernelSpec::brownian_plus_one();
    } else {
      Box box;
      const auto lo = map.get_double_array("kernel.domain_lo", {0.0});
      const auto hi = map.get_double_array("kernel.domain_hi", {1.0});
      box.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Index>(lo.size()));
      box.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Index>(hi.size()));
      if (family == "gaussian") {
        if (!map.contains("kernel.width")) throw ConfigError("kernel.width is required");
        cfg.kernel = KernelSpec::gaussian(map.get_double("kernel.width", 0.0), box);
      } else if (family == "polynomial") {
        if (!map.contains("kernel.degree")) throw ConfigError("kernel.degree is required");
        cfg.kernel = KernelSpec::polynomial(
            checked_int(map.get_int("kernel.degree", 0), "kernel.degree"),
            map.get_double("kernel.offset", 0.0), box);
      } else {
        throw ConfigError("unknown kernel.family: " + family);
      }
    }
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("bad kernel configuration: ") + e.what());
  }

  cfg.n_total = checked_int(map.get_int("experiment.n_total", 4096), "experiment.n_total");
  const auto m_list =
      map.get_int_array("experiment.m_list", {2, 4, 8, 16, 32, 64, 128, 256, 512, 1024});
  cfg.m_list.clear();
  for (long long m : m_list) cfg.m_list.push_back(checked_int(m, "experiment.m_list entry"));

  const auto variant_names = map.get_string_array("experiment.variants", {"rkn", "bcrkn"});
  cfg.variants.clear();
  for (const auto& name : variant_names) {
    try {
      const Variant v = variant_from_string(name);
      if (std::find(cfg.variants.begin(), cfg.variants.end(), v) != cfg.variants.end()) {
        throw ConfigError("experiment.variants lists '" + name + "' twice");
      }
      cfg.variants.push_back(v);
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
  }

  std::vector<long long> default_seeds;
  for (long long s = 1; s <= 20; ++s) default_seeds.push_back(s);
  cfg.seeds.clear();
  for (long long s : map.get_int_array("experiment.seeds", default_seeds)) {
    if (s < 0) throw ConfigError("experiment.seeds entries must be nonnegative");
    cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }

  cfg.quadrature_size = map.get_int("experiment.quadrature_size", 10001);
  cfg.compute_rkhs_error = map.get_bool("experiment.compute_rkhs_error", false);
  cfg.output_path = map.get_string("experiment.output_path", "");

  const std::string rule = map.get_string("lambda.rule", "power");
  if (rule == "fixed") {
    cfg.lambda_rule.kind = LambdaRule::Kind::Fixed;
    if (!map.contains("lambda.value")) throw ConfigError("lambda.value is required");
    cfg.lambda_rule.value = map.get_double("lambda.value", 0.0);
  } else if (rule == "power") {
    cfg.lambda_rule.kind = LambdaRule::Kind::Power;
    cfg.lambda_rule.theta = map.get_double("lambda.theta", 2.0 / 3.0);
  } else if (rule == "local_tuned") {
    cfg.lambda_rule.kind = LambdaRule::Kind::LocalTuned;
    cfg.lambda_rule.grid_min = map.get_double("lambda.grid_min", 1e-6);
    cfg.lambda_rule.grid_max = map.get_double("lambda.grid_max", 1.0);
    cfg.lambda_rule.grid_size =
        checked_int(map.get_int("lambda.grid_size", 25), "lambda.grid_size");
    cfg.lambda_rule.holdout_fraction = map.get_double("lambda.holdout_fraction", 0.2);
  } else {
    throw ConfigError("lambda.rule must be fixed, power, or local_tuned");
  }

  if (cfg.problem == ExperimentConfig::Problem::Synthetic) {
    cfg.synthetic.r = map.get_double("synthetic.r", 1.0);
    cfg.synthetic.u_star = map.get_string("synthetic.u_star", "sin");
    cfg.synthetic.noise_sd = map.get_double("synthetic.noise_sd", 0.1);
    cfg.synthetic.spectrum_grid =
        checked_int(map.get_int("synthetic.spectrum_grid", 256), "synthetic.spectrum_grid");
  }

  try {
    cfg.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("invalid experiment configuration: ") + e.what());
  }
  return cfg;
}

std::vector<std::pair<std::string, std::string>> echo_config(const ExperimentConfig& cfg) {
  ConfigMap map;
  auto set_int = [&](const std::string& key, long long v) {
    map.set(key, ConfigValue::scalar(v));
  };
  auto set_double = [&](const std::string& key, double v) {
    map.set(key, ConfigValue::scalar(v));
  };
  auto set_string = [&](const std::string& key, const std::string& v) {
    map.set(key, ConfigValue::scalar(v));
  };

  set_string("experiment.problem",
             cfg.problem == ExperimentConfig::Problem::PaperSim ? "paper_sim" : "synthetic");
  set_int("experiment.n_total", cfg.n_total);
  std::vector<ConfigScalar> ms;
  for (int m : cfg.m_list) ms.emplace_back(static_cast<long long>(m));
  map.set("experiment.m_list", ConfigValue::array(std::move(ms)));
  std::vector<ConfigScalar> vs;
  for (Variant v : cfg.variants) vs.emplace_back(to_string(v));
  map.set("experiment.variants", ConfigValue::array(std::move(vs)));
  std::vector<ConfigScalar> ss;
  for (std::uint64_t s : cfg.seeds) ss.emplace_back(static_cast<long long>(s));
  map.set("experiment.seeds", ConfigValue::array(std::move(ss)));
  set_int("experiment.quadrature_size", cfg.quadrature_size);
  map.set("experiment.compute_rkhs_error", ConfigValue::scalar(cfg.compute_rkhs_error));

  set_string("kernel.family", to_string(cfg.kernel.family()));
  if (cfg.kernel.family() != KernelFamily::BrownianPlusOne) {
    const Box& box = cfg.kernel.domain();
    std::vector<ConfigScalar> lo, hi;
    for (Index d = 0; d < box.dim(); ++d) {
      lo.emplace_back(box.lo(d));
      hi.emplace_back(box.hi(d));
    }
    map.set("kernel.domain_lo", ConfigValue::array(std::move(lo)));
    map.set("kernel.domain_hi", ConfigValue::array(std::move(hi)));
    if (cfg.kernel.family() == KernelFamily::Gaussian) {
      set_double("kernel.width", cfg.kernel.width());
    } else {
      set_int("kernel.degree", cfg.kernel.degree());
      set_double("kernel.offset", cfg.kernel.offset());
    }
  }

  switch (cfg.lambda_rule.kind) {
    case LambdaRule::Kind::Fixed:
      set_string("lambda.rule", "fixed");
      set_double("lambda.value", cfg.lambda_rule.value);
      break;
    case LambdaRule::Kind::Power:
      set_string("lambda.rule", "power");
      set_double("lambda.theta", cfg.lambda_rule.theta);
      break;
    case LambdaRule::Kind::LocalTuned:
      set_string("lambda.rule", "local_tuned");
      set_double("lambda.grid_min", cfg.lambda_rule.grid_min);
      set_double("lambda.grid_max", cfg.lambda_rule.grid_max);
      set_int("lambda.grid_size", cfg.lambda_rule.grid_size);
      set_double("lambda.holdout_fraction", cfg.lambda_rule.holdout_fraction);
      break;
  }

  if (cfg.problem == ExperimentConfig::Problem::Synthetic) {
    set_double("synthetic.r", cfg.synthetic.r);
    set_string("synthetic.u_star", cfg.synthetic.u_star);
    set_double("synthetic.noise_sd", cfg.synthetic.noise_sd);
    set_int("synthetic.spectrum_grid", cfg.synthetic.spectrum_grid);
  }

  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(map.entries().size());
  for (const auto& [key, value] : map.entries()) {
    out.emplace_back(key, render_config_value(value));
  }
  return out;
}

}  // namespace kernet
