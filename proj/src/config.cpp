#include "gds/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>

#include "gds/binary_io.hpp"
#include "gds/errors.hpp"

namespace gds {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

int parse_int32(const std::string& key, const std::string& text) {
  const auto v = parse_int(key, text);
  if (v < INT32_MIN || v > INT32_MAX) throw ConfigError(key, "value '" + text + "' out of range");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

using Setter = std::function<void(AppConfig&, const std::string& key, const std::string& value)>;
using Getter = std::function<std::string(const AppConfig&)>;

struct Setting {
  std::string key;
  Setter set;
  Getter get;
};

template <typename Field>
Setting int_setting(std::string key, Field field) {
  return {key, [field](AppConfig& c, const std::string& k, const std::string& v) { field(c) = parse_int32(k, v); },
          [field](const AppConfig& c) { AppConfig copy = c; return std::to_string(field(copy)); }};
}

template <typename Field>
Setting double_setting(std::string key, Field field) {
  return {key, [field](AppConfig& c, const std::string& k, const std::string& v) { field(c) = parse_double(k, v); },
          [field](const AppConfig& c) { AppConfig copy = c; return format_double(field(copy)); }};
}

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = [] {
    std::vector<Setting> t;
    t.push_back({"seed", [](AppConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); },
                 [](const AppConfig& c) { return std::to_string(c.seed); }});

    t.push_back(int_setting("data.samples", [](AppConfig& c) -> int& { return c.data.samples; }));
    t.push_back(int_setting("data.height", [](AppConfig& c) -> int& { return c.data.height; }));
    t.push_back(int_setting("data.width", [](AppConfig& c) -> int& { return c.data.width; }));
    t.push_back(double_setting("data.split_train", [](AppConfig& c) -> double& { return c.data.split_train; }));
    t.push_back(double_setting("data.split_val", [](AppConfig& c) -> double& { return c.data.split_val; }));
    t.push_back(double_setting("data.split_test", [](AppConfig& c) -> double& { return c.data.split_test; }));
    t.push_back({"data.offsets",
                 [](AppConfig& c, const std::string& k, const std::string& v) {
                   auto items = split_list(v);
                   if (items.empty() || (items.size() == 1 && items[0].empty())) {
                     throw ConfigError(k, "need at least one annotator offset");
                   }
                   const double lo = c.data.profiles.empty() ? 1.0 : c.data.profiles.front().jitter_lo;
                   const double hi = c.data.profiles.empty() ? 5.0 : c.data.profiles.front().jitter_hi;
                   c.data.profiles.clear();
                   for (std::size_t i = 0; i < items.size(); ++i) {
                     c.data.profiles.push_back({static_cast<std::uint32_t>(i), parse_double(k, items[i]), lo, hi});
                   }
                 },
                 [](const AppConfig& c) {
                   std::vector<double> v;
                   for (const auto& p : c.data.profiles) v.push_back(p.systematic_offset);
                   return join_doubles(v);
                 }});
    for (const bool upper : {false, true}) {
      t.push_back({upper ? "data.jitter_hi" : "data.jitter_lo",
                   [upper](AppConfig& c, const std::string& k, const std::string& v) {
                     const double x = parse_double(k, v);
                     for (auto& p : c.data.profiles) (upper ? p.jitter_hi : p.jitter_lo) = x;
                   },
                   [upper](const AppConfig& c) {
                     if (c.data.profiles.empty()) return std::string(upper ? "5" : "1");
                     const auto& p = c.data.profiles.front();
                     return format_double(upper ? p.jitter_hi : p.jitter_lo);
                   }});
    }

    t.push_back(int_setting("model.signature_dim", [](AppConfig& c) -> int& { return c.model.signature_dim; }));
    t.push_back({"model.pyramid_channels",
                 [](AppConfig& c, const std::string& k, const std::string& v) {
                   auto items = split_list(v);
                   if (items.size() != 4) throw ConfigError(k, "expected 4 comma-separated channel counts");
                   for (std::size_t i = 0; i < 4; ++i) c.model.pyramid_channels[i] = parse_int32(k, items[i]);
                 },
                 [](const AppConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < 4; ++i) s += (i ? "," : "") + std::to_string(c.model.pyramid_channels[i]);
                   return s;
                 }});
    t.push_back(int_setting("model.embed_channels", [](AppConfig& c) -> int& { return c.model.embed_channels; }));
    t.push_back(int_setting("model.embed_hidden", [](AppConfig& c) -> int& { return c.model.embed_hidden; }));
    t.push_back(int_setting("model.decoder_channels", [](AppConfig& c) -> int& { return c.model.decoder_channels; }));

    t.push_back(double_setting("train.lr", [](AppConfig& c) -> double& { return c.train.lr; }));
    t.push_back(int_setting("train.epochs", [](AppConfig& c) -> int& { return c.train.epochs; }));
    t.push_back(int_setting("train.batch_size", [](AppConfig& c) -> int& { return c.train.batch_size; }));
    t.push_back(double_setting("train.weight_decay", [](AppConfig& c) -> double& { return c.train.weight_decay; }));
    t.push_back(double_setting("train.beta1", [](AppConfig& c) -> double& { return c.train.beta1; }));
    t.push_back(double_setting("train.beta2", [](AppConfig& c) -> double& { return c.train.beta2; }));
    t.push_back(double_setting("train.adam_eps", [](AppConfig& c) -> double& { return c.train.adam_eps; }));
    t.push_back(double_setting("train.kl_weight", [](AppConfig& c) -> double& { return c.train.kl_weight; }));
    t.push_back(int_setting("train.kl_warmup_epochs", [](AppConfig& c) -> int& { return c.train.kl_warmup_epochs; }));
    t.push_back(double_setting("train.dice_smooth", [](AppConfig& c) -> double& { return c.train.dice_smooth; }));
    t.push_back({"train.ablation",
                 [](AppConfig& c, const std::string& k, const std::string& v) {
                   try {
                     c.train.ablation = parse_ablation(v);
                   } catch (const ParameterError& e) {
                     throw ConfigError(k, e.what());
                   }
                 },
                 [](const AppConfig& c) { return ablation_name(c.train.ablation); }});
    t.push_back({"train.annotator_sampling",
                 [](AppConfig& c, const std::string& k, const std::string& v) {
                   try {
                     c.train.annotator_sampling = parse_annotator_sampling(v);
                   } catch (const ParameterError& e) {
                     throw ConfigError(k, e.what());
                   }
                 },
                 [](const AppConfig& c) { return annotator_sampling_name(c.train.annotator_sampling); }});

    t.push_back(int_setting("eval.panel_size", [](AppConfig& c) -> int& { return c.eval.panel_size; }));
    t.push_back(double_setting("eval.entropy_threshold", [](AppConfig& c) -> double& { return c.eval.entropy_threshold; }));
    t.push_back(int_setting("eval.roi_radius", [](AppConfig& c) -> int& { return c.eval.roi_radius; }));
    t.push_back({"eval.split",
                 [](AppConfig& c, const std::string& k, const std::string& v) {
                   try {
                     c.eval.split = parse_split(v);
                   } catch (const Error& e) {
                     throw ConfigError(k, e.what());
                   }
                 },
                 [](const AppConfig& c) { return split_name(c.eval.split); }});
    return t;
  }();
  return table;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty() || !std::isfinite(v)) {
    throw ConfigError(key, "expected a finite number, got '" + text + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& key, const std::string& text) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError(key, "expected an unsigned 64-bit integer, got '" + text + "'");
  }
  return v;
}

void apply_setting(AppConfig& config, const std::string& key, const std::string& value) {
  for (const auto& s : settings()) {
    if (s.key == key) {
      s.set(config, key, value);
      return;
    }
  }
  throw ConfigError(key, "unknown configuration key");
}

KeyValues settings_of(const AppConfig& config) {
  KeyValues out;
  for (const auto& s : settings()) out.emplace_back(s.key, s.get(config));
  return out;
}

AppConfig parse_config(std::string_view text) {
  AppConfig config;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", "line " + std::to_string(line_no) + ": unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section != "data" && section != "model" && section != "train" && section != "eval") {
        throw ConfigError(section, "unknown configuration section");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string name = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    apply_setting(config, section.empty() ? name : section + "." + name, value);
  }
  return config;
}

AppConfig load_config(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path.string());
  return parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

const std::string* find_value(const KeyValues& kv, std::string_view key) {
  for (const auto& [k, v] : kv) {
    if (k == key) return &v;
  }
  return nullptr;
}

KeyValues model_echo(const ModelConfig& config) {
  AppConfig app;
  app.model = config;
  KeyValues out{{"model.num_annotators", std::to_string(config.num_annotators)},
                {"model.use_attention", config.use_attention ? "true" : "false"}};
  for (auto& [k, v] : settings_of(app)) {
    if (k.starts_with("model.")) out.emplace_back(k, v);
  }
  return out;
}

KeyValues train_echo(const TrainConfig& config) {
  AppConfig app;
  app.train = config;
  KeyValues out;
  for (auto& [k, v] : settings_of(app)) {
    if (k.starts_with("train.")) out.emplace_back(k, v);
  }
  return out;
}

ModelConfig model_from_echo(const KeyValues& echo) {
  AppConfig app;
  for (const auto& [k, v] : echo) {
    if (k == "model.num_annotators") {
      app.model.num_annotators = parse_int32(k, v);
    } else if (k == "model.use_attention") {
      app.model.use_attention = parse_bool(k, v);
    } else if (k.starts_with("model.")) {
      apply_setting(app, k, v);
    }
  }
  return app.model;
}

TrainConfig train_from_echo(const KeyValues& echo) {
  AppConfig app;
  for (const auto& [k, v] : echo) {
    if (k.starts_with("train.")) apply_setting(app, k, v);
  }
  return app.train;
}

}  // namespace gds
