#include "geco/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "geco/errors.hpp"

namespace geco {

namespace {

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("config: cannot parse '" + text + "' for " + key);
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("config: expected true/false for " + key + ", got '" + text + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <class Get>
Field real_field(const std::string& key, Get ref) {
  return {[key, ref](RunConfig& c, const std::string& s) { ref(c) = parse_number<double>(key, s); },
          [ref](const RunConfig& c) { return format_double(ref(c)); }};
}

template <class Int, class Get>
Field int_field(const std::string& key, Get ref) {
  return {[key, ref](RunConfig& c, const std::string& s) { ref(c) = parse_number<Int>(key, s); },
          [ref](const RunConfig& c) { return std::to_string(ref(c)); }};
}

template <class Get>
Field bool_field(const std::string& key, Get ref) {
  return {[key, ref](RunConfig& c, const std::string& s) { ref(c) = parse_bool(key, s); },
          [ref](const RunConfig& c) { return std::string(ref(c) ? "true" : "false"); }};
}

struct Registry {
  std::vector<std::string> order;
  std::map<std::string, Field> fields;

  void add(const std::string& key, Field f) {
    order.push_back(key);
    fields.emplace(key, std::move(f));
  }

  void add_training(const std::string& section, TrainConfig RunConfig::*member) {
    add(section + ".lr", real_field(section + ".lr", [member](auto& c) -> auto& { return (c.*member).lr; }));
    add(section + ".epochs",
        int_field<int>(section + ".epochs", [member](auto& c) -> auto& { return (c.*member).epochs; }));
    add(section + ".batch_size",
        int_field<int>(section + ".batch_size", [member](auto& c) -> auto& { return (c.*member).batch_size; }));
    add(section + ".ema_decay",
        real_field(section + ".ema_decay", [member](auto& c) -> auto& { return (c.*member).ema_decay; }));
    add(section + ".grad_clip",
        real_field(section + ".grad_clip", [member](auto& c) -> auto& { return (c.*member).grad_clip; }));
    add(section + ".validate_every", int_field<int>(section + ".validate_every", [member](auto& c) -> auto& {
          return (c.*member).validate_every;
        }));
  }

  Registry() {
    add("run.seed", int_field<std::uint64_t>("run.seed", [](auto& c) -> auto& { return c.seed; }));
    add("bridge.c", real_field("bridge.c", [](auto& c) -> auto& { return c.bridge.c; }));
    add("bridge.v", real_field("bridge.v", [](auto& c) -> auto& { return c.bridge.v; }));
    add("bridge.T", real_field("bridge.T", [](auto& c) -> auto& { return c.bridge.T; }));
    add("bridge.t_eps", real_field("bridge.t_eps", [](auto& c) -> auto& { return c.bridge.t_eps; }));
    add("bridge.T_prime", real_field("bridge.T_prime", [](auto& c) -> auto& { return c.bridge.T_prime; }));
    add("bridge.M", int_field<int>("bridge.M", [](auto& c) -> auto& { return c.bridge.M; }));
    add("dataset.size",
        int_field<std::size_t>("dataset.size", [](auto& c) -> auto& { return c.dataset_size; }));
    add("dataset.sample_rate",
        int_field<int>("dataset.sample_rate", [](auto& c) -> auto& { return c.dataset.sample_rate; }));
    add("dataset.min_duration_s",
        real_field("dataset.min_duration_s", [](auto& c) -> auto& { return c.dataset.min_duration_s; }));
    add("dataset.max_duration_s",
        real_field("dataset.max_duration_s", [](auto& c) -> auto& { return c.dataset.max_duration_s; }));
    add("dataset.snr_min_db",
        real_field("dataset.snr_min_db", [](auto& c) -> auto& { return c.dataset.snr_min_db; }));
    add("dataset.snr_max_db",
        real_field("dataset.snr_max_db", [](auto& c) -> auto& { return c.dataset.snr_max_db; }));
    add_training("train_sep", &RunConfig::train_sep);
    add_training("train_geco", &RunConfig::train_geco);
    add_training("finetune", &RunConfig::finetune);
    add("finetune.fresh_noise",
        bool_field("finetune.fresh_noise", [](auto& c) -> auto& { return c.finetune_options.fresh_noise; }));
    add("sampler.deterministic_final", bool_field("sampler.deterministic_final", [](auto& c) -> auto& {
          return c.sampler.deterministic_final;
        }));
    add("sampler.stochastic_init",
        bool_field("sampler.stochastic_init", [](auto& c) -> auto& { return c.sampler.stochastic_init; }));
  }
};

const Registry& registry() {
  static const Registry r;
  return r;
}

const Field& field(const std::string& key) {
  const auto& f = registry().fields;
  const auto it = f.find(key);
  if (it == f.end()) throw ConfigError("config: unknown key '" + key + "'");
  return it->second;
}

}  // namespace

void RunConfig::validate() const {
  auto section = [](const char* name, auto&& check) {
    try {
      check();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("[") + name + "] " + e.what());
    }
  };
  section("bridge", [&] { bridge.validate(); });
  section("dataset", [&] {
    dataset.validate();
    if (dataset_size < 1) throw ConfigError("size must be >= 1");
  });
  section("train_sep", [&] { train_sep.validate(); });
  section("train_geco", [&] { train_geco.validate(); });
  section("finetune", [&] { finetune.validate(); });
}

TrainConfig RunConfig::stage(const TrainConfig& base) const {
  TrainConfig t = base;
  t.seed = seed;
  return t;
}

const std::vector<std::string>& config_keys() { return registry().order; }

void set_config_value(RunConfig& cfg, const std::string& dotted_key, const std::string& value) {
  field(dotted_key).set(cfg, value);
}

std::string get_config_value(const RunConfig& cfg, const std::string& dotted_key) {
  return field(dotted_key).get(cfg);
}

RunConfig parse_run_config(const std::string& ini_text, RunConfig base) {
  boost::property_tree::ptree tree;
  std::istringstream in(ini_text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) {
      throw ConfigError("config: key '" + section + "' must live inside a [section]");
    }
    for (const auto& [key, value] : keys) set_config_value(base, section + "." + key, value.data());
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), std::move(base));
}

std::string to_ini(const RunConfig& cfg) {
  std::ostringstream out;
  std::string current;
  for (const auto& key : config_keys()) {
    const auto dot = key.find('.');
    const std::string section = key.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << section << "]\n";
      current = section;
    }
    out << key.substr(dot + 1) << " = " << get_config_value(cfg, key) << '\n';
  }
  return out.str();
}

}  // namespace geco
