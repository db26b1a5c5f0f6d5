#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

namespace dsom {

enum class Strategy { reinforced, conf_teacher, best_teacher, best_strategy, teacher_avg };
enum class KdVariant { ndkd, dkd, vanilla, nekd_only, nnkd_only, none };
enum class TeacherCache { off, memory, disk };

const char* to_string(Strategy s);
const char* to_string(KdVariant v);
const char* to_string(TeacherCache c);
Strategy parse_strategy(const std::string& s);
KdVariant parse_kd_variant(const std::string& s);
TeacherCache parse_teacher_cache(const std::string& s);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  // Backbone.
  std::size_t dim = 128;  // complex dimension
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t epochs = 50;          // student epochs
  std::size_t teacher_epochs = 50;  // pre-training epochs
  std::uint64_t seed = 42;
  double l2 = 0.0;
  std::size_t eval_every = 1;  // validation cadence for best-checkpoint selection; 0 keeps the last epoch

  // Student objective.
  double gamma = 2.0;
  double tau = 4.0;
  double alpha = 1.0;
  double beta = 1.0;
  bool temperature_sq_scale = false;
  Strategy strategy = Strategy::reinforced;
  KdVariant kd_variant = KdVariant::ndkd;

  // Combination agent.
  std::size_t policy_hidden = 1024;
  double policy_lr = 1e-3;
  double reward_pos = 1.0;
  double reward_neg = -10.0;
  bool standardize_state = true;

  // Data handling.
  double missing_rate = 0.0;
  TeacherCache teacher_cache = TeacherCache::memory;

  /// Throws ConfigError when an invariant (tau > 0, weights >= 0, ...) fails.
  void validate() const;

  /// Applies one `key = value` assignment.
  void set(const std::string& key, const std::string& value);

  /// Flat `key = value` lines in a fixed key order; `#` starts a comment.
  std::string to_text() const;
  static TrainConfig from_text(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);

  std::map<std::string, std::string> to_map() const;
};

}  // namespace dsom
