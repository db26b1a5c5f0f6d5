#include "dsom/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dsom {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::reinforced: return "reinforced";
    case Strategy::conf_teacher: return "conf_teacher";
    case Strategy::best_teacher: return "best_teacher";
    case Strategy::best_strategy: return "best_strategy";
    case Strategy::teacher_avg: return "teacher_avg";
  }
  return "?";
}

const char* to_string(KdVariant v) {
  switch (v) {
    case KdVariant::ndkd: return "ndkd";
    case KdVariant::dkd: return "dkd";
    case KdVariant::vanilla: return "vanilla";
    case KdVariant::nekd_only: return "nekd_only";
    case KdVariant::nnkd_only: return "nnkd_only";
    case KdVariant::none: return "none";
  }
  return "?";
}

const char* to_string(TeacherCache c) {
  switch (c) {
    case TeacherCache::off: return "off";
    case TeacherCache::memory: return "memory";
    case TeacherCache::disk: return "disk";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  for (auto v : {Strategy::reinforced, Strategy::conf_teacher, Strategy::best_teacher, Strategy::best_strategy,
                 Strategy::teacher_avg})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown strategy '" + s + "'");
}

KdVariant parse_kd_variant(const std::string& s) {
  for (auto v : {KdVariant::ndkd, KdVariant::dkd, KdVariant::vanilla, KdVariant::nekd_only, KdVariant::nnkd_only,
                 KdVariant::none})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown kd variant '" + s + "'");
}

TeacherCache parse_teacher_cache(const std::string& s) {
  for (auto v : {TeacherCache::off, TeacherCache::memory, TeacherCache::disk})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown teacher cache mode '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("bad number for " + key + ": '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("bad integer for " + key + ": '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

// Shortest round-trip representation, so to_text/from_text is lossless.
std::string fmt_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (gamma < 0.0 || alpha < 0.0 || beta < 0.0) throw ConfigError("gamma, alpha and beta must be >= 0");
  if (dim == 0) throw ConfigError("dim must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (policy_hidden == 0) throw ConfigError("policy_hidden must be >= 1");
  if (!(learning_rate > 0.0) || !(policy_lr > 0.0)) throw ConfigError("learning rates must be > 0");
  if (!(missing_rate >= 0.0 && missing_rate <= 1.0)) throw ConfigError("missing_rate must be in [0, 1]");
  if (l2 < 0.0) throw ConfigError("l2 must be >= 0");
}

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "dim") dim = to_uint(key, v);
  else if (key == "learning_rate") learning_rate = to_double(key, v);
  else if (key == "batch_size") batch_size = to_uint(key, v);
  else if (key == "epochs") epochs = to_uint(key, v);
  else if (key == "teacher_epochs") teacher_epochs = to_uint(key, v);
  else if (key == "seed") seed = to_uint(key, v);
  else if (key == "l2") l2 = to_double(key, v);
  else if (key == "eval_every") eval_every = to_uint(key, v);
  else if (key == "gamma") gamma = to_double(key, v);
  else if (key == "tau") tau = to_double(key, v);
  else if (key == "alpha") alpha = to_double(key, v);
  else if (key == "beta") beta = to_double(key, v);
  else if (key == "temperature_sq_scale") temperature_sq_scale = to_bool(key, v);
  else if (key == "strategy") strategy = parse_strategy(v);
  else if (key == "kd_variant") kd_variant = parse_kd_variant(v);
  else if (key == "policy_hidden") policy_hidden = to_uint(key, v);
  else if (key == "policy_lr") policy_lr = to_double(key, v);
  else if (key == "reward_pos") reward_pos = to_double(key, v);
  else if (key == "reward_neg") reward_neg = to_double(key, v);
  else if (key == "standardize_state") standardize_state = to_bool(key, v);
  else if (key == "missing_rate") missing_rate = to_double(key, v);
  else if (key == "teacher_cache") teacher_cache = parse_teacher_cache(v);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  return {
      {"dim", std::to_string(dim)},
      {"learning_rate", fmt_double(learning_rate)},
      {"batch_size", std::to_string(batch_size)},
      {"epochs", std::to_string(epochs)},
      {"teacher_epochs", std::to_string(teacher_epochs)},
      {"seed", std::to_string(seed)},
      {"l2", fmt_double(l2)},
      {"eval_every", std::to_string(eval_every)},
      {"gamma", fmt_double(gamma)},
      {"tau", fmt_double(tau)},
      {"alpha", fmt_double(alpha)},
      {"beta", fmt_double(beta)},
      {"temperature_sq_scale", temperature_sq_scale ? "true" : "false"},
      {"strategy", to_string(strategy)},
      {"kd_variant", to_string(kd_variant)},
      {"policy_hidden", std::to_string(policy_hidden)},
      {"policy_lr", fmt_double(policy_lr)},
      {"reward_pos", fmt_double(reward_pos)},
      {"reward_neg", fmt_double(reward_neg)},
      {"standardize_state", standardize_state ? "true" : "false"},
      {"missing_rate", fmt_double(missing_rate)},
      {"teacher_cache", to_string(teacher_cache)},
  };
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
  return out;
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

}  // namespace dsom
