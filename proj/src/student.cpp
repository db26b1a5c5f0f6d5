#include "dsom/student.hpp"

#include <cmath>
#include <stdexcept>

namespace dsom {

Action select_fixed_strategy(Strategy strategy, const TeacherVectors& teachers, EntityId target) {
  switch (strategy) {
    case Strategy::teacher_avg:
      return Action::all();
    case Strategy::conf_teacher: {
      std::size_t best = 0;
      double best_conf = -1.0;
      for (std::size_t m = 0; m < kNumModalities; ++m) {
        const double conf = std::exp(teachers[m].maxCoeff() - log_sum_exp(teachers[m]));
        if (conf > best_conf) {
          best_conf = conf;
          best = m;
        }
      }
      return Action::single(kModalityOrder[best]);
    }
    case Strategy::best_teacher: {
      std::size_t best = 0;
      double best_ce = INFINITY;
      for (std::size_t m = 0; m < kNumModalities; ++m) {
        const double ce = cross_entropy(teachers[m], target);
        if (ce < best_ce) {
          best_ce = ce;
          best = m;
        }
      }
      return Action::single(kModalityOrder[best]);
    }
    case Strategy::best_strategy: {
      Action best;
      double best_ce = INFINITY;
      for (int a = 0; a < static_cast<int>(kNumActions); ++a) {
        const double ce = cross_entropy(aggregate_teachers(teachers, Action{a}), target);
        if (ce < best_ce) {
          best_ce = ce;
          best = Action{a};
        }
      }
      return best;
    }
    case Strategy::reinforced:
      break;
  }
  throw std::invalid_argument("select_fixed_strategy: reinforced selection needs the policy");
}

Vector averaged_teacher_probs(const TeacherVectors& teachers) {
  Vector sum = Vector::Zero(teachers[0].size());
  for (const auto& t : teachers) sum += softmax(t);
  return sum / static_cast<double>(kNumModalities);
}

namespace {

struct KdTerm {
  double kd = 0.0;
  double nekd = 0.0;
  double nnkd = 0.0;
  Vector grad;
  bool skipped = false;
};

KdTerm distill_term(const Vector& teacher_logits, const Vector& student_logits, const Triple& t,
                    const NeighborIndex& neighbors, const TrainConfig& config) {
  KdTerm out;
  if (config.kd_variant == KdVariant::none) return out;
  const ScaledDistribution tea = temp_scale(teacher_logits, config.tau);
  const ScaledDistribution stu = temp_scale(student_logits, config.tau);
  switch (config.kd_variant) {
    case KdVariant::vanilla: {
      KdResult r = vanilla_kd(tea, stu);
      out.kd = r.loss;
      out.grad = std::move(r.grad);
      return out;
    }
    case KdVariant::dkd: {
      if (stu.size() < 2) {
        out.skipped = true;
        return out;
      }
      NdkdResult r = dkd_loss(tea, stu, t.tail, config.alpha, config.beta);
      out.kd = r.loss;
      out.nekd = r.nekd;
      out.nnkd = r.nnkd;
      out.grad = std::move(r.grad);
      return out;
    }
    default:
      break;
  }
  const double alpha = config.kd_variant == KdVariant::nnkd_only ? 0.0 : config.alpha;
  const double beta = config.kd_variant == KdVariant::nekd_only ? 0.0 : config.beta;
  std::set<EntityId> hood = neighbors.at(t.head, t.rel);
  hood.insert(t.tail);
  if (hood.size() >= stu.size()) {
    out.skipped = true;
    return out;
  }
  NdkdResult r = ndkd_loss(decouple(tea, hood), decouple(stu, hood), alpha, beta);
  out.kd = r.loss;
  out.nekd = r.nekd;
  out.nnkd = r.nnkd;
  out.grad = std::move(r.grad);
  return out;
}

}  // namespace

StudentStep student_total_loss(std::span<const Triple> batch, const KgeModel& student,
                               const TeacherLogitSource& teachers, const NeighborIndex& neighbors,
                               const PolicyNet* policy, const TrainConfig& config, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("student_total_loss: empty batch");
  const bool reinforced = config.strategy == Strategy::reinforced;
  if (reinforced && policy == nullptr) throw std::invalid_argument("reinforced strategy requires a policy network");

  const ComplexEmbeddingTable table = student.entity_table();
  const RewardConfig reward_cfg = RewardConfig::from(config);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double kd_scale = config.temperature_sq_scale ? config.tau * config.tau : 1.0;

  StudentStep step;
  step.student_grads = zero_grads_like(student);
  EntityTableGrad eg{Matrix::Zero(table.re.rows(), table.re.cols()), Matrix::Zero(table.im.rows(), table.im.cols())};
  std::vector<RcSample> rc_samples;

  // Pass 1: student scores and frozen teacher logits. Teachers do not depend on
  // the policy, so all states can go through the policy in one product.
  const std::size_t b = batch.size();
  std::vector<Vector> scores(b);
  std::vector<double> student_ce(b);
  std::vector<TeacherVectors> tv(b);
  for (std::size_t i = 0; i < b; ++i) {
    const Triple& t = batch[i];
    scores[i] = score_all(t.head, t.rel, table, student.relations);
    student_ce[i] = cross_entropy(scores[i], t.tail);
    if (!std::isfinite(student_ce[i])) throw NumericalError("non-finite student cross-entropy", t);
    tv[i] = teachers.logits(t.head, t.rel);
  }
  Matrix probs;
  std::vector<Vector> states;
  if (reinforced) {
    states.resize(b);
    Matrix batch_states(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(policy->input_dim()));
    for (std::size_t i = 0; i < b; ++i) {
      states[i] = build_state(tv[i], config.standardize_state);
      batch_states.row(static_cast<Eigen::Index>(i)) = states[i].transpose();
    }
    probs = policy_forward_batch(*policy, batch_states);
  }

  // Pass 2: actions in batch order, then the CE and KD gradients.
  for (std::size_t i = 0; i < b; ++i) {
    const Triple& t = batch[i];
    Action action;
    if (reinforced) {
      action = sample_action(probs.row(static_cast<Eigen::Index>(i)).transpose(), rng);
      RewardRecord rec;
      rec.action = action;
      rec.student_ce = student_ce[i];
      rec.teacher_ce = cross_entropy(aggregate_teachers(tv[i], action), t.tail);
      rec.reward = compute_reward(rec.teacher_ce, student_ce[i], reward_cfg);
      rec.baseline = baseline_reward(tv[i], t.tail, student_ce[i], reward_cfg);
      rec.advantage = rec.reward - rec.baseline;
      step.rewards.push_back(rec);
      rc_samples.push_back({std::move(states[i]), action, rec.advantage});
    } else {
      action = select_fixed_strategy(config.strategy, tv[i], t.tail);
    }
    ++step.action_counts[static_cast<std::size_t>(action.index)];

    Vector grad = softmax(scores[i]);
    grad[t.tail] -= 1.0;
    step.loss.ce += student_ce[i] * inv_b;

    if (config.kd_variant != KdVariant::none) {
      KdTerm kd = distill_term(aggregate_teachers(tv[i], action), scores[i], t, neighbors, config);
      if (kd.skipped) {
        ++step.kd_skipped;
      } else {
        step.loss.kd += kd_scale * kd.kd * inv_b;
        step.loss.nekd += kd.nekd * inv_b;
        step.loss.nnkd += kd.nnkd * inv_b;
        if (config.gamma != 0.0) grad += (config.gamma * kd_scale) * kd.grad;
      }
    }
    grad *= inv_b;
    backprop_scores(t.head, t.rel, grad, table, student.relations, eg, step.student_grads[0], step.student_grads[1]);
  }
  finish_entity_grads(student, eg, step.student_grads);

  if (reinforced) {
    LossAndGrads rc = rc_loss_and_grads(*policy, rc_samples);
    step.loss.rc = rc.loss;
    step.policy_grads = std::move(rc.grads);
  }
  step.loss.total = step.loss.ce + step.loss.rc + config.gamma * step.loss.kd;
  if (!std::isfinite(step.loss.total)) throw NumericalError("non-finite student objective");
  return step;
}

}  // namespace dsom
