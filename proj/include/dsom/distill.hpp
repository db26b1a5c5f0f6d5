#pragma once

#include <array>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "dsom/kg.hpp"
#include "dsom/linalg.hpp"

namespace dsom {

/// softmax(logits / tau), kept alongside its log for stable KL terms.
struct ScaledDistribution {
  Vector probs;
  Vector log_probs;
  double tau = 1.0;

  std::size_t size() const { return static_cast<std::size_t>(probs.size()); }
};

ScaledDistribution temp_scale(const Vector& logits, double tau);

/// Loss value plus its gradient with respect to the raw student logits.
struct KdResult {
  double loss = 0.0;
  Vector grad;
};

/// KL(teacher || student); gradient (p_stu - p_tea) / tau.
KdResult vanilla_kd(const ScaledDistribution& teacher, const ScaledDistribution& student);

class DegenerateInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Neighbor/non-neighbor split of a scaled distribution.
///
/// neighbor_binary = [mean_{n in N} p_n, 1 - mean_{n in N} p_n]. The second
/// entry is the complement of the neighbor *average*, which for |N| > 1 is not
/// the non-neighbor mass. non_neighbor holds p_e / sum_{e' not in N} p_e' for
/// e not in N, in ascending entity order.
struct DecoupledView {
  std::array<double, 2> neighbor_binary{};
  std::array<double, 2> log_neighbor_binary{};
  Vector non_neighbor;
  Vector log_non_neighbor;
  double non_neighbor_mass = 0.0;  // sum_{e not in N} p_e
  double log_non_neighbor_mass = 0.0;
  double log_neighbor_mass = 0.0;  // log sum_{n in N} p_n
  std::vector<EntityId> neighbors;      // sorted
  std::vector<EntityId> non_neighbors;  // sorted
  ScaledDistribution dist;
};

/// Throws std::invalid_argument for an empty or out-of-range neighbor set and
/// DegenerateInput when N covers every entity.
DecoupledView decouple(const ScaledDistribution& dist, const std::set<EntityId>& neighbors);

struct NdkdResult {
  double nekd = 0.0;  // KL of the neighbor binaries
  double nnkd = 0.0;  // KL of the renormalized non-neighbor distributions
  double loss = 0.0;  // alpha * nekd + beta * nnkd
  Vector grad;        // d loss / d student logits
};

/// alpha * KL(b_tea || b_stu) + beta * KL(P~_tea || P~_stu). Both views must come
/// from the same neighbor set and temperature. A zero weight drops that term's
/// gradient entirely.
NdkdResult ndkd_loss(const DecoupledView& teacher, const DecoupledView& student, double alpha, double beta);

/// Target/non-target decoupled KD: b = [p_t, 1 - p_t] and p_e / (1 - p_t) over
/// e != t. Written independently of ndkd_loss; the two coincide when N = {t}.
NdkdResult dkd_loss(const ScaledDistribution& teacher, const ScaledDistribution& student, EntityId target,
                    double alpha, double beta);

/// Shannon entropy of a probability vector (natural log).
double entropy(const Vector& probs);

}  // namespace dsom
