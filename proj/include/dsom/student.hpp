#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "dsom/config.hpp"
#include "dsom/distill.hpp"
#include "dsom/kg.hpp"
#include "dsom/kge.hpp"
#include "dsom/reinforce.hpp"
#include "dsom/teachers.hpp"

namespace dsom {

/// Teacher subset picked for one triple under a non-learned strategy.
/// conf_teacher: the single teacher with the largest max probability.
/// best_teacher: the single teacher with the lowest CE at the target.
/// best_strategy: the lowest-CE subset among all 7.
/// teacher_avg: all three.
Action select_fixed_strategy(Strategy strategy, const TeacherVectors& teachers, EntityId target);

/// Mean of the three teachers' softmax distributions (the Teacher Avg. scorer).
Vector averaged_teacher_probs(const TeacherVectors& teachers);

struct StudentLossBreakdown {
  double ce = 0.0;    // student CE on hard labels
  double rc = 0.0;    // combination-agent REINFORCE loss
  double nekd = 0.0;  // neighbor binary KL (unweighted)
  double nnkd = 0.0;  // non-neighbor KL (unweighted)
  double kd = 0.0;    // the selected distillation loss, before gamma
  double total = 0.0; // ce + rc + gamma * kd
};

struct StudentStep {
  StudentLossBreakdown loss;
  std::vector<Matrix> student_grads;  // aligned with KgeModel::parameters()
  std::vector<Matrix> policy_grads;   // aligned with PolicyNet::parameters(); empty unless reinforced
  std::vector<RewardRecord> rewards;  // one per triple when reinforced
  std::array<std::size_t, kNumActions> action_counts{};
  std::size_t kd_skipped = 0;  // triples whose neighbor set covers every entity
};

/// Overall student objective for one minibatch: CE + RC + gamma * KD.
/// Teacher logits are constants; RC gradients flow only into the policy and KD
/// gradients only into the student. `policy` is required for the reinforced
/// strategy and ignored otherwise.
StudentStep student_total_loss(std::span<const Triple> batch, const KgeModel& student,
                               const TeacherLogitSource& teachers, const NeighborIndex& neighbors,
                               const PolicyNet* policy, const TrainConfig& config, Rng& rng);

}  // namespace dsom
