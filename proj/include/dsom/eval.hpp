#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dsom/kg.hpp"
#include "dsom/linalg.hpp"

namespace dsom {

/// Rank ties count half, floored: a degenerate constant scorer lands mid-list.
inline constexpr const char* kTiePolicy = "half_ties_floor";

struct Metrics {
  double mrr = 0.0;
  double mr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t count = 0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// 1 + #{competitors scoring above the target} + floor(#{competitors tied} / 2),
/// where competitors exclude the target and every other known-true entity.
std::size_t filtered_rank(const Vector& scores, EntityId target, const std::set<EntityId>& known_true);

Metrics metrics_from_ranks(std::span<const std::size_t> ranks);

enum class Direction { tail, head };

struct RankRecord {
  Triple triple;  // original (un-augmented) triple
  Direction direction = Direction::tail;
  std::size_t rank = 0;
};

struct EvalResult {
  Metrics metrics;
  std::vector<RankRecord> ranks;  // tail then head prediction for each triple, in split order
};

/// Scores every entity as the tail of (head, augmented rel).
using Scorer = std::function<Vector(EntityId head, RelationId rel)>;

/// Tail prediction through (h, r) and head prediction through (t, r + num_rels),
/// both under the filter index. Queries may be scored concurrently.
EvalResult evaluate(const Scorer& scorer, std::span<const Triple> split, const QueryIndex& filter,
                    std::size_t num_rels);

std::string metrics_json(const Metrics& m, const std::string& manifest_hash);
void write_metrics_json(const std::filesystem::path& path, const Metrics& m, const std::string& manifest_hash);
/// CSV header: head,rel,tail,direction,rank (names from the dataset vocabularies).
void write_rank_dump(const std::filesystem::path& path, std::span<const RankRecord> ranks, const Dataset& ds);

}  // namespace dsom
