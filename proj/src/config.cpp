#include "tdmcl/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "tdmcl/binary_io.hpp"

namespace tdmcl {

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kFull: return "full";
    case RunMode::kNoInhibition: return "no-inhibition";
    case RunMode::kDirectTraining: return "direct-training";
    case RunMode::kDirectPruning: return "direct-pruning";
  }
  return "?";
}

RunMode parse_run_mode(const std::string& text) {
  if (text == "full") return RunMode::kFull;
  if (text == "no-inhibition") return RunMode::kNoInhibition;
  if (text == "direct-training") return RunMode::kDirectTraining;
  if (text == "direct-pruning") return RunMode::kDirectPruning;
  throw ConfigError("unknown run mode '" + text +
                    "' (expected full, no-inhibition, direct-training or direct-pruning)");
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// A config entry knows how to read, write and range-check one field.
struct Entry {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  // Returns an empty string on success, otherwise the problem description.
  std::function<std::string(RunConfig&, const std::string&)> set;
};

template <typename T>
bool parse_number(const std::string& text, T& out) {
  const char* b = text.data();
  const char* e = b + text.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}


template <typename Field>
Entry real_entry(std::string key, Field field, std::function<std::string(double)> check) {
  return Entry{key, [field](const RunConfig& c) { return format_double(field(const_cast<RunConfig&>(c))); },
               [field, check](RunConfig& c, const std::string& v) -> std::string {
                 double x;
                 if (!parse_number(v, x)) return "expects a real number, got '" + v + "'";
                 if (std::string err = check(x); !err.empty()) return err;
                 field(c) = x;
                 return "";
               }};
}

template <typename Field>
Entry int_entry(std::string key, Field field, std::function<std::string(double)> check) {
  return Entry{key, [field](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); },
               [field, check](RunConfig& c, const std::string& v) -> std::string {
                 std::remove_reference_t<decltype(field(c))> x;
                 if (!parse_number(v, x)) return "expects an integer in range, got '" + v + "'";
                 if (std::string err = check(static_cast<double>(x)); !err.empty()) return err;
                 field(c) = x;
                 return "";
               }};
}

template <typename Field>
Entry bool_entry(std::string key, Field field) {
  return Entry{key, [field](const RunConfig& c) { return field(const_cast<RunConfig&>(c)) ? "true" : "false"; },
               [field](RunConfig& c, const std::string& v) -> std::string {
                 if (v == "true" || v == "1") field(c) = true;
                 else if (v == "false" || v == "0") field(c) = false;
                 else return "expects true or false, got '" + v + "'";
                 return "";
               }};
}

template <typename Field, typename Parse, typename Print>
Entry enum_entry(std::string key, Field field, Parse parse, Print print) {
  return Entry{key, [field, print](const RunConfig& c) { return print(field(const_cast<RunConfig&>(c))); },
               [field, parse](RunConfig& c, const std::string& v) -> std::string {
                 try {
                   field(c) = parse(v);
                 } catch (const ConfigError& e) {
                   return e.what();
                 }
                 return "";
               }};
}

std::function<std::string(double)> positive() {
  return [](double x) { return x > 0.0 ? "" : std::string("out of range: must be > 0"); };
}
std::function<std::string(double)> within(double lo, double hi, bool open_hi = false) {
  return [=](double x) {
    const bool ok = x >= lo && (open_hi ? x < hi : x <= hi);
    return ok ? std::string()
              : "out of range: must lie in [" + format_double(lo) + ", " + format_double(hi) +
                    (open_hi ? ")" : "]");
  };
}
std::function<std::string(double)> at_least(long long lo) {
  return [=](double x) {
    return x >= lo ? std::string() : "out of range: must be >= " + std::to_string(lo);
  };
}
std::function<std::string(double)> between(long long lo, long long hi) {
  return [=](double x) {
    return x >= lo && x <= hi
               ? std::string()
               : "out of range: must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
  };
}

LrSchedule parse_schedule(const std::string& s) {
  if (s == "cosine") return LrSchedule::kCosine;
  if (s == "constant") return LrSchedule::kConstant;
  throw ConfigError("unknown schedule '" + s + "' (expected cosine or constant)");
}
std::string print_schedule(LrSchedule s) { return s == LrSchedule::kCosine ? "cosine" : "constant"; }

#define FIELD(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = {
      int_entry("suite.seed", FIELD(suite.seed), at_least(0)),
      int_entry("suite.train_size", FIELD(suite.train_size), at_least(1)),
      int_entry("suite.val_size", FIELD(suite.val_size), at_least(1)),
      int_entry("suite.test_size", FIELD(suite.test_size), at_least(1)),
      real_entry("suite.overlap", FIELD(suite.overlap), within(0.0, 1.0)),
      real_entry("suite.command_tolerance", FIELD(suite.command_tolerance), positive()),
      real_entry("net.width_factor", FIELD(net.width_factor), positive()),
      int_entry("net.steps", FIELD(net.steps), between(1, 64)),
      real_entry("net.tau_init", FIELD(net.plif.tau_init),
                 [](double x) { return std::isfinite(x) ? "" : std::string("must be finite"); }),
      real_entry("net.v_th", FIELD(net.plif.v_th), positive()),
      real_entry("net.surrogate_beta", FIELD(net.plif.beta), positive()),
      real_entry("net.init_gain", FIELD(net.init_gain), positive()),
      real_entry("net.adapter_gain", FIELD(net.adapter_gain), positive()),
      bool_entry("net.weight_norm", FIELD(net.weight_norm)),
      real_entry("train.learning_rate", FIELD(train.learning_rate), positive()),
      real_entry("train.momentum", FIELD(train.momentum), within(0.0, 1.0, true)),
      int_entry("train.batch_size", FIELD(train.batch_size), at_least(1)),
      int_entry("train.epochs", FIELD(train.epochs), at_least(0)),
      int_entry("train.fine_tune_epochs", FIELD(train.fine_tune_epochs), at_least(0)),
      real_entry("train.grad_clip", FIELD(train.grad_clip), within(0.0, 1e30)),
      real_entry("train.adapter_lr_scale", FIELD(train.adapter_lr_scale), within(0.0, 1e30)),
      enum_entry("train.lr_schedule", FIELD(train.schedule), parse_schedule, print_schedule),
      int_entry("evolution.episodes", FIELD(evolution.episodes), at_least(1)),
      int_entry("evolution.burst_epochs", FIELD(evolution.burst_epochs), at_least(0)),
      real_entry("evolution.gamma", FIELD(evolution.gamma), positive()),
      enum_entry("evolution.h_l_scope", FIELD(evolution.h_l_scope), parse_normalization_scope,
                 [](NormalizationScope s) { return to_string(s); }),
      real_entry("plasticity.alpha", FIELD(plasticity.alpha), within(0.0, 1.0, true)),
      int_entry("plasticity.N", FIELD(plasticity.maturity), at_least(1)),
      real_entry("plasticity.quantile", FIELD(plasticity.quantile), within(0.0, 1.0)),
      int_entry("plasticity.probe_size", FIELD(plasticity.probe_size), at_least(1)),
      enum_entry("plasticity.hebbian_scope", FIELD(plasticity.hebbian_scope), parse_hebbian_scope,
                 [](HebbianScope s) { return to_string(s); }),
      int_entry("plasticity.cadence", FIELD(plasticity.cadence), at_least(1)),
      enum_entry("run.mode", FIELD(run.mode), parse_run_mode, [](RunMode m) { return to_string(m); }),
      int_entry("run.seed", FIELD(run.seed), at_least(0)),
      int_entry("run.tasks", FIELD(run.tasks), between(1, 9)),
  };
  return entries;
}

#undef FIELD

const Entry* find_entry(const std::string& key) {
  for (const auto& e : registry())
    if (e.key == key) return &e;
  return nullptr;
}

void apply(RunConfig& cfg, const std::string& key, const std::string& value,
           const std::string& where) {
  const Entry* e = find_entry(key);
  if (!e) throw ConfigError(where + ": unknown key '" + key + "'");
  if (std::string err = e->set(cfg, value); !err.empty())
    throw ConfigError(where + ": key '" + key + "' " + err);
}

}  // namespace

bool RunConfig::operator==(const RunConfig& other) const {
  for (const auto& e : registry())
    if (e.get(*this) != e.get(other)) return false;
  return true;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : registry()) keys.push_back(e.key);
  return keys;
}

void validate(const RunConfig& cfg) {
  validate(cfg.suite);
  if (cfg.suite.train_size < cfg.train.batch_size)
    throw ConfigError("train.batch_size must not exceed suite.train_size");
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides,
                       const std::string& source) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + " line " + std::to_string(number);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": missing key before '='");
    apply(cfg, key, value, where);
  }
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "': expected key=value");
    apply(cfg, trim(o.substr(0, eq)), trim(o.substr(eq + 1)), "override '" + o + "'");
  }
  try {
    validate(cfg);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, overrides, path);
}

std::string echo_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "# effective configuration\n";
  for (const auto& e : registry()) os << e.key << " = " << e.get(cfg) << '\n';
  return os.str();
}

}  // namespace tdmcl
