#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "dsom/checkpoint.hpp"
#include "dsom/config.hpp"
#include "dsom/kge.hpp"
#include "dsom/linalg.hpp"
#include "dsom/teachers.hpp"

namespace dsom {

/// Non-empty teacher subsets: 2^3 - 1.
inline constexpr std::size_t kNumActions = (1u << kNumModalities) - 1;

/// Index in [0, 7); the selected subset is the bitmask index + 1
/// (bit 0 structural, bit 1 visual, bit 2 textual).
struct Action {
  int index = kNumActions - 1;

  unsigned mask() const { return static_cast<unsigned>(index) + 1u; }
  bool selects(Modality m) const { return (mask() >> static_cast<unsigned>(m)) & 1u; }
  std::size_t subset_size() const;
  /// e.g. "S", "VD", "SVD".
  std::string label() const;

  static Action from_mask(unsigned mask);
  static Action all() { return Action{static_cast<int>(kNumActions) - 1}; }
  static Action single(Modality m) { return from_mask(1u << static_cast<unsigned>(m)); }

  friend bool operator==(const Action&, const Action&) = default;
};

/// One-hidden-layer ReLU perceptron from the concatenated teacher scores to
/// a softmax over the 7 actions. Biases are stored as single-column matrices
/// so every parameter goes through the same optimizer path.
struct PolicyNet {
  Matrix w1;  // hidden x input
  Matrix b1;  // hidden x 1
  Matrix w2;  // 7 x hidden
  Matrix b2;  // 7 x 1

  /// Xavier-uniform weights, zero biases.
  static PolicyNet init(std::size_t input_dim, std::size_t hidden, Rng& rng);

  std::size_t input_dim() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t hidden() const { return static_cast<std::size_t>(w1.rows()); }
  std::vector<Matrix*> parameters() { return {&w1, &b1, &w2, &b2}; }
  std::vector<const Matrix*> parameters() const { return {&w1, &b1, &w2, &b2}; }

  void store(Checkpoint& ckpt, const std::string& prefix) const;
  static PolicyNet restore(const Checkpoint& ckpt, const std::string& prefix);
};

/// [structural | visual | textual]. With `standardize`, each block is shifted
/// to zero mean and scaled to unit variance first (constant blocks become 0).
Vector build_state(std::span<const Vector> teacher_vectors, bool standardize = false);

Vector policy_forward(const PolicyNet& policy, const Vector& state);
/// Row i holds the action distribution for states.row(i).
Matrix policy_forward_batch(const PolicyNet& policy, const Matrix& states);

/// Inverse-CDF draw from the categorical `probs` using one 53-bit uniform from `rng`.
Action sample_action(const Vector& probs, Rng& rng);

/// Arithmetic mean of the selected teachers' score vectors.
Vector aggregate_teachers(std::span<const Vector> teacher_vectors, Action action);

struct RewardConfig {
  double positive = 1.0;
  double negative = -10.0;

  static RewardConfig from(const TrainConfig& c) { return {c.reward_pos, c.reward_neg}; }
};

/// `positive` if the teacher's CE is strictly below the student's, else `negative`.
double compute_reward(double teacher_ce, double student_ce, const RewardConfig& config);

/// Reward earned by the all-teacher mean at `target`; serves as the REINFORCE baseline.
double baseline_reward(std::span<const Vector> teacher_vectors, EntityId target, double student_ce,
                       const RewardConfig& config);

struct RewardRecord {
  Action action;
  double reward = 0.0;
  double baseline = 0.0;
  double advantage = 0.0;  // reward - baseline
  double teacher_ce = 0.0;
  double student_ce = 0.0;
};

struct RcSample {
  Vector state;
  Action action;
  double advantage = 0.0;
};

/// -mean(advantage * log pi(action | state)) with exact gradients for
/// [w1, b1, w2, b2]. Advantages are constants.
LossAndGrads rc_loss_and_grads(const PolicyNet& policy, std::span<const RcSample> batch);

}  // namespace dsom
