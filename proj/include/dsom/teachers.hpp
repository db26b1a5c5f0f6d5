#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "dsom/checkpoint.hpp"
#include "dsom/config.hpp"
#include "dsom/features.hpp"
#include "dsom/kge.hpp"

namespace dsom {

/// Fixed modality order. It defines the action bitmask semantics:
/// bit 0 = structural, bit 1 = visual, bit 2 = textual.
enum class Modality { structural = 0, visual = 1, textual = 2 };
inline constexpr std::size_t kNumModalities = 3;
inline constexpr std::array<Modality, kNumModalities> kModalityOrder = {Modality::structural, Modality::visual,
                                                                       Modality::textual};
const char* to_string(Modality m);

using TeacherVectors = std::array<Vector, kNumModalities>;

/// Three modality-split ComplEx teachers sharing entity and relation counts.
struct TeacherEnsemble {
  std::array<KgeModel, kNumModalities> models;

  static TeacherEnsemble init(std::size_t num_entities, std::size_t num_aug_relations, std::size_t dim,
                              const FeatureMatrix& visual, const FeatureMatrix& textual, Rng& rng);

  KgeModel& model(Modality m) { return models[static_cast<std::size_t>(m)]; }
  const KgeModel& model(Modality m) const { return models[static_cast<std::size_t>(m)]; }
  std::size_t num_entities() const { return models[0].num_entities(); }
};

/// Read-only scorer with every entity table materialized once.
class TeacherLogitSource {
 public:
  virtual ~TeacherLogitSource() = default;
  virtual TeacherVectors logits(EntityId head, RelationId rel) const = 0;
};

class FrozenTeachers : public TeacherLogitSource {
 public:
  explicit FrozenTeachers(const TeacherEnsemble& ensemble);
  TeacherVectors logits(EntityId head, RelationId rel) const override;
  Vector logits(Modality m, EntityId head, RelationId rel) const;

 private:
  std::array<ComplexEmbeddingTable, kNumModalities> entities_;
  std::array<ComplexEmbeddingTable, kNumModalities> relations_;
};

/// Precomputed teacher logits for a fixed set of queries; falls back to the
/// frozen teachers for anything not cached.
class TeacherLogitCache : public TeacherLogitSource {
 public:
  TeacherLogitCache(const FrozenTeachers& fallback, std::span<const Triple> queries);
  TeacherLogitCache(const FrozenTeachers& fallback, const Checkpoint& stored);
  TeacherVectors logits(EntityId head, RelationId rel) const override;
  std::size_t size() const { return rows_.size(); }

  /// Same container layout as model checkpoints: one matrix of query keys and
  /// one (queries x entities) matrix per modality.
  Checkpoint to_checkpoint() const;

 private:
  const FrozenTeachers& fallback_;
  std::map<std::pair<EntityId, RelationId>, std::size_t> rows_;
  std::array<Matrix, kNumModalities> logits_;
};

/// Convenience wrapper: materializes the tables on each call.
TeacherVectors teacher_logits(const TeacherEnsemble& ensemble, EntityId head, RelationId rel);

struct TeacherOptimizers {
  std::array<AdamState, kNumModalities> states;
};

/// One shuffled minibatch pass over `train_aug`. Each modality's CE is computed
/// and stepped separately; parameters are disjoint, so this equals stepping the
/// summed objective. Returns the per-modality mean CE over the epoch.
std::array<double, kNumModalities> pretrain_epoch(TeacherEnsemble& ensemble, TeacherOptimizers& optimizers,
                                                  std::span<const Triple> train_aug, const TrainConfig& config,
                                                  Rng& rng);

// Teacher checkpoint: magic "DSOMTEAM", u32 version, u32 manifest length,
// manifest JSON, then for each modality in order a u64 length followed by a
// backbone checkpoint blob (projection and features included).
void save_teachers(const std::filesystem::path& path, const TeacherEnsemble& ensemble, const std::string& manifest_json);
TeacherEnsemble load_teachers(const std::filesystem::path& path, std::string* manifest_json = nullptr);

}  // namespace dsom
