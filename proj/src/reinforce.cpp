#include "dsom/reinforce.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace dsom {

std::size_t Action::subset_size() const { return static_cast<std::size_t>(std::popcount(mask())); }

std::string Action::label() const {
  static constexpr char kLetters[kNumModalities] = {'S', 'V', 'D'};
  std::string out;
  for (std::size_t m = 0; m < kNumModalities; ++m)
    if ((mask() >> m) & 1u) out += kLetters[m];
  return out;
}

Action Action::from_mask(unsigned mask) {
  if (mask == 0 || mask > kNumActions) throw std::invalid_argument("teacher subset mask must be in [1, 7]");
  return Action{static_cast<int>(mask) - 1};
}

PolicyNet PolicyNet::init(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  PolicyNet p;
  p.w1.resize(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(input_dim));
  p.w2.resize(static_cast<Eigen::Index>(kNumActions), static_cast<Eigen::Index>(hidden));
  fill_xavier_uniform(p.w1, rng);
  fill_xavier_uniform(p.w2, rng);
  p.b1 = Matrix::Zero(static_cast<Eigen::Index>(hidden), 1);
  p.b2 = Matrix::Zero(static_cast<Eigen::Index>(kNumActions), 1);
  return p;
}

void PolicyNet::store(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.matrices[prefix + ".w1"] = w1;
  ckpt.matrices[prefix + ".b1"] = b1;
  ckpt.matrices[prefix + ".w2"] = w2;
  ckpt.matrices[prefix + ".b2"] = b2;
}

PolicyNet PolicyNet::restore(const Checkpoint& ckpt, const std::string& prefix) {
  PolicyNet p;
  p.w1 = ckpt.at(prefix + ".w1");
  p.b1 = ckpt.at(prefix + ".b1");
  p.w2 = ckpt.at(prefix + ".w2");
  p.b2 = ckpt.at(prefix + ".b2");
  if (p.w2.rows() != static_cast<Eigen::Index>(kNumActions) || p.w1.rows() != p.w2.cols() ||
      p.b1.rows() != p.w1.rows() || p.b2.rows() != p.w2.rows())
    throw CheckpointError("policy checkpoint has inconsistent shapes");
  return p;
}

Vector build_state(std::span<const Vector> teacher_vectors, bool standardize) {
  if (teacher_vectors.empty()) return {};
  const Eigen::Index n = teacher_vectors[0].size();
  for (const auto& v : teacher_vectors)
    if (v.size() != n) throw std::invalid_argument("build_state: teacher vectors differ in length");
  Vector state(n * static_cast<Eigen::Index>(teacher_vectors.size()));
  for (std::size_t m = 0; m < teacher_vectors.size(); ++m) {
    auto block = state.segment(static_cast<Eigen::Index>(m) * n, n);
    block = teacher_vectors[m];
    if (standardize && n > 0) {
      block.array() -= block.mean();
      const double sd = std::sqrt(block.squaredNorm() / static_cast<double>(n));
      if (sd > 1e-12) block /= sd;
      else block.setZero();
    }
  }
  return state;
}

namespace {

struct Forward {
  Matrix pre;     // B x hidden
  Matrix hidden;  // B x hidden, relu(pre)
  Matrix probs;   // B x 7
};

Forward forward_batch(const PolicyNet& policy, const Matrix& states) {
  if (states.cols() != policy.w1.cols())
    throw std::invalid_argument("policy input width " + std::to_string(policy.w1.cols()) + " != state length " +
                                std::to_string(states.cols()));
  Forward f;
  f.pre = states * policy.w1.transpose();
  f.pre.rowwise() += policy.b1.col(0).transpose();
  f.hidden = f.pre.cwiseMax(0.0);
  Matrix logits = f.hidden * policy.w2.transpose();
  logits.rowwise() += policy.b2.col(0).transpose();
  f.probs.resize(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) f.probs.row(i) = softmax(logits.row(i).transpose()).transpose();
  return f;
}

}  // namespace

Vector policy_forward(const PolicyNet& policy, const Vector& state) {
  const Matrix states = state.transpose();
  return forward_batch(policy, states).probs.row(0).transpose();
}

Matrix policy_forward_batch(const PolicyNet& policy, const Matrix& states) {
  if (states.cols() != policy.w1.cols()) throw std::invalid_argument("policy_forward: state length does not match");
  return forward_batch(policy, states).probs;
}

Action sample_action(const Vector& probs, Rng& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return Action{static_cast<int>(i)};
  }
  // Rounding left u above the total mass; take the last action with mass.
  for (Eigen::Index i = probs.size() - 1; i >= 0; --i)
    if (probs[i] > 0.0) return Action{static_cast<int>(i)};
  throw std::invalid_argument("sample_action: probability vector has no mass");
}

Vector aggregate_teachers(std::span<const Vector> teacher_vectors, Action action) {
  if (teacher_vectors.size() != kNumModalities) throw std::invalid_argument("aggregate_teachers: expected 3 teachers");
  Vector sum = Vector::Zero(teacher_vectors[0].size());
  std::size_t count = 0;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    if (!action.selects(kModalityOrder[m])) continue;
    sum += teacher_vectors[m];
    ++count;
  }
  if (count == 0) throw std::logic_error("aggregate_teachers: empty subset");
  return sum / static_cast<double>(count);
}

double compute_reward(double teacher_ce, double student_ce, const RewardConfig& config) {
  return teacher_ce < student_ce ? config.positive : config.negative;
}

double baseline_reward(std::span<const Vector> teacher_vectors, EntityId target, double student_ce,
                       const RewardConfig& config) {
  const Vector mean = aggregate_teachers(teacher_vectors, Action::all());
  return compute_reward(cross_entropy(mean, target), student_ce, config);
}

LossAndGrads rc_loss_and_grads(const PolicyNet& policy, std::span<const RcSample> batch) {
  if (batch.empty()) throw std::invalid_argument("rc_loss_and_grads: empty batch");
  const auto b = static_cast<Eigen::Index>(batch.size());
  Matrix states(b, policy.w1.cols());
  for (Eigen::Index i = 0; i < b; ++i) {
    if (batch[static_cast<std::size_t>(i)].state.size() != policy.w1.cols())
      throw std::invalid_argument("rc_loss_and_grads: state length does not match the policy input");
    states.row(i) = batch[static_cast<std::size_t>(i)].state.transpose();
  }
  const Forward f = forward_batch(policy, states);

  LossAndGrads out;
  const double inv_b = 1.0 / static_cast<double>(b);
  // d loss / d logits = -adv/B * (onehot(a) - p)
  Matrix g_logits = Matrix::Zero(b, static_cast<Eigen::Index>(kNumActions));
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& s = batch[static_cast<std::size_t>(i)];
    const double p = f.probs(i, s.action.index);
    if (s.advantage != 0.0) out.loss -= s.advantage * std::log(p) * inv_b;
    g_logits.row(i) = f.probs.row(i) * (s.advantage * inv_b);
    g_logits(i, s.action.index) -= s.advantage * inv_b;
  }
  if (!std::isfinite(out.loss)) throw NumericalError("non-finite policy loss");

  const Matrix g_w2 = g_logits.transpose() * f.hidden;
  const Matrix g_b2 = g_logits.colwise().sum().transpose();
  Matrix g_pre = g_logits * policy.w2;
  g_pre.array() *= (f.pre.array() > 0.0).cast<double>();
  const Matrix g_w1 = g_pre.transpose() * states;
  const Matrix g_b1 = g_pre.colwise().sum().transpose();
  out.grads = {g_w1, g_b1, g_w2, g_b2};
  return out;
}

}  // namespace dsom
