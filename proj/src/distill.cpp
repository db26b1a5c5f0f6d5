#include "dsom/distill.hpp"

#include <cmath>
#include <limits>

namespace dsom {

ScaledDistribution temp_scale(const Vector& logits, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be > 0");
  ScaledDistribution d;
  d.tau = tau;
  d.log_probs = log_softmax(logits, tau);
  d.probs = d.log_probs.array().exp();
  return d;
}

namespace {

// sum p * (log p - log q), skipping p == 0 terms.
double kl_from_logs(const Vector& p, const Vector& log_p, const Vector& log_q) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) kl += p[i] * (log_p[i] - log_q[i]);
  return kl;
}

double binary_kl(const std::array<double, 2>& p, const std::array<double, 2>& log_p,
                 const std::array<double, 2>& log_q) {
  double kl = 0.0;
  for (int i = 0; i < 2; ++i)
    if (p[i] > 0.0) kl += p[i] * (log_p[i] - log_q[i]);
  return kl;
}

double log_sum_exp_of(const Vector& log_values, const std::vector<EntityId>& ids) {
  double mx = -std::numeric_limits<double>::infinity();
  for (EntityId i : ids) mx = std::max(mx, log_values[i]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (EntityId i : ids) s += std::exp(log_values[i] - mx);
  return mx + std::log(s);
}

void check_pair(const ScaledDistribution& a, const ScaledDistribution& b) {
  if (a.size() != b.size()) throw std::invalid_argument("teacher and student distributions differ in length");
  if (a.tau != b.tau) throw std::invalid_argument("teacher and student distributions use different temperatures");
}

}  // namespace

KdResult vanilla_kd(const ScaledDistribution& teacher, const ScaledDistribution& student) {
  check_pair(teacher, student);
  KdResult r;
  r.loss = kl_from_logs(teacher.probs, teacher.log_probs, student.log_probs);
  r.grad = (student.probs - teacher.probs) / student.tau;
  return r;
}

DecoupledView decouple(const ScaledDistribution& dist, const std::set<EntityId>& neighbors) {
  const std::size_t n = dist.size();
  if (neighbors.empty()) throw std::invalid_argument("decouple: neighbor set is empty");
  if (*neighbors.rbegin() >= n) throw std::invalid_argument("decouple: neighbor id out of range");
  if (neighbors.size() >= n) throw DegenerateInput("decouple: neighbor set covers every entity");

  DecoupledView v;
  v.dist = dist;
  v.neighbors.assign(neighbors.begin(), neighbors.end());
  v.non_neighbors.reserve(n - neighbors.size());
  for (EntityId e = 0; e < n; ++e)
    if (!neighbors.count(e)) v.non_neighbors.push_back(e);

  const double count = static_cast<double>(v.neighbors.size());
  v.log_neighbor_mass = log_sum_exp_of(dist.log_probs, v.neighbors);
  v.log_non_neighbor_mass = log_sum_exp_of(dist.log_probs, v.non_neighbors);
  v.non_neighbor_mass = std::exp(v.log_non_neighbor_mass);

  // 1 - mean = (|N| - 1 + non-neighbor mass) / |N|, which avoids cancellation.
  v.log_neighbor_binary[0] = v.log_neighbor_mass - std::log(count);
  v.log_neighbor_binary[1] = v.neighbors.size() == 1 ? v.log_non_neighbor_mass
                                                     : std::log(count - 1.0 + v.non_neighbor_mass) - std::log(count);
  v.neighbor_binary = {std::exp(v.log_neighbor_binary[0]), std::exp(v.log_neighbor_binary[1])};

  const auto m = static_cast<Eigen::Index>(v.non_neighbors.size());
  v.log_non_neighbor.resize(m);
  for (Eigen::Index i = 0; i < m; ++i)
    v.log_non_neighbor[i] = dist.log_probs[v.non_neighbors[static_cast<std::size_t>(i)]] - v.log_non_neighbor_mass;
  v.non_neighbor = v.log_non_neighbor.array().exp();
  return v;
}

NdkdResult ndkd_loss(const DecoupledView& teacher, const DecoupledView& student, double alpha, double beta) {
  check_pair(teacher.dist, student.dist);
  if (teacher.neighbors != student.neighbors)
    throw std::invalid_argument("ndkd_loss: views were built from different neighbor sets");
  const double tau = student.dist.tau;
  NdkdResult r;
  r.grad = Vector::Zero(static_cast<Eigen::Index>(student.dist.size()));

  r.nekd = binary_kl(teacher.neighbor_binary, teacher.log_neighbor_binary, student.log_neighbor_binary);
  r.nnkd = kl_from_logs(teacher.non_neighbor, teacher.log_non_neighbor, student.log_non_neighbor);
  r.loss = alpha * r.nekd + beta * r.nnkd;

  if (alpha != 0.0) {
    // d KL(b_t || b_s) / d pbar_s = (pbar_s - pbar_t) / (pbar_s (1 - pbar_s)), and
    // d pbar_s / d z_j = p_j ([j in N] - S_N) / (tau |N|) with S_N = |N| pbar_s.
    // Products are regrouped into ratios that stay bounded as pbar_s -> 0.
    const double diff = student.neighbor_binary[0] - teacher.neighbor_binary[0];
    const double log_b1 = student.log_neighbor_binary[1];
    const Vector& log_p = student.dist.log_probs;
    const double in_scale = std::exp(student.log_non_neighbor_mass - log_b1);
    for (EntityId j : student.neighbors)
      r.grad[j] += alpha * diff * std::exp(log_p[j] - student.log_neighbor_mass) * in_scale / tau;
    for (EntityId j : student.non_neighbors)
      r.grad[j] -= alpha * diff * std::exp(log_p[j] - log_b1) / tau;
  }
  if (beta != 0.0) {
    for (std::size_t i = 0; i < student.non_neighbors.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      r.grad[student.non_neighbors[i]] += beta * (student.non_neighbor[k] - teacher.non_neighbor[k]) / tau;
    }
  }
  return r;
}

NdkdResult dkd_loss(const ScaledDistribution& teacher, const ScaledDistribution& student, EntityId target,
                    double alpha, double beta) {
  check_pair(teacher, student);
  const auto n = static_cast<Eigen::Index>(student.size());
  if (target >= student.size()) throw std::invalid_argument("dkd_loss: target out of range");
  if (n < 2) throw DegenerateInput("dkd_loss: need at least one non-target entity");
  const double tau = student.tau;

  auto split = [&](const ScaledDistribution& d, std::array<double, 2>& b, std::array<double, 2>& log_b,
                   Vector& log_hat) {
    Vector others(n - 1);
    for (Eigen::Index e = 0, k = 0; e < n; ++e)
      if (e != target) others[k++] = d.log_probs[e];
    const double log_rest = log_sum_exp(others);
    log_b = {d.log_probs[target], log_rest};
    b = {std::exp(log_b[0]), std::exp(log_b[1])};
    log_hat = others.array() - log_rest;
  };
  std::array<double, 2> bt{}, lbt{}, bs{}, lbs{};
  Vector lht, lhs;
  split(teacher, bt, lbt, lht);
  split(student, bs, lbs, lhs);
  const Vector ht = lht.array().exp();
  const Vector hs = lhs.array().exp();

  NdkdResult r;
  r.nekd = binary_kl(bt, lbt, lbs);
  r.nnkd = kl_from_logs(ht, lht, lhs);
  r.loss = alpha * r.nekd + beta * r.nnkd;

  // Target term: d/dz_t = (p_t^s - p_t^t)/tau, d/dz_j = -(p_t^s - p_t^t) phat_j^s / tau.
  // Non-target term: (phat^s - phat^t)/tau on e != t.
  r.grad = Vector::Zero(n);
  const double diff = bs[0] - bt[0];
  r.grad[target] = alpha * diff / tau;
  for (Eigen::Index e = 0, k = 0; e < n; ++e) {
    if (e == target) continue;
    r.grad[e] = (-alpha * diff * hs[k] + beta * (hs[k] - ht[k])) / tau;
    ++k;
  }
  return r;
}

double entropy(const Vector& probs) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    if (probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
  return h;
}

}  // namespace dsom
