#include "dsom/teachers.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dsom/util.hpp"

namespace dsom {

const char* to_string(Modality m) {
  switch (m) {
    case Modality::structural: return "structural";
    case Modality::visual: return "visual";
    case Modality::textual: return "textual";
  }
  return "?";
}

TeacherEnsemble TeacherEnsemble::init(std::size_t num_entities, std::size_t num_aug_relations, std::size_t dim,
                                      const FeatureMatrix& visual, const FeatureMatrix& textual, Rng& rng) {
  if (visual.num_entities != num_entities || textual.num_entities != num_entities)
    throw std::invalid_argument("feature row count does not match the entity vocabulary");
  TeacherEnsemble e;
  e.model(Modality::structural) = KgeModel::structural(num_entities, num_aug_relations, dim, rng);
  e.model(Modality::visual) = KgeModel::projected(visual.to_matrix(), num_aug_relations, dim, rng);
  e.model(Modality::textual) = KgeModel::projected(textual.to_matrix(), num_aug_relations, dim, rng);
  return e;
}

FrozenTeachers::FrozenTeachers(const TeacherEnsemble& ensemble) {
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    entities_[m] = ensemble.models[m].entity_table();
    relations_[m] = ensemble.models[m].relations;
  }
}

TeacherVectors FrozenTeachers::logits(EntityId head, RelationId rel) const {
  TeacherVectors out;
  for (std::size_t m = 0; m < kNumModalities; ++m) out[m] = score_all(head, rel, entities_[m], relations_[m]);
  return out;
}

Vector FrozenTeachers::logits(Modality m, EntityId head, RelationId rel) const {
  const auto i = static_cast<std::size_t>(m);
  return score_all(head, rel, entities_[i], relations_[i]);
}

TeacherLogitCache::TeacherLogitCache(const FrozenTeachers& fallback, std::span<const Triple> queries)
    : fallback_(fallback) {
  for (const auto& t : queries) rows_.try_emplace({t.head, t.rel}, rows_.size());
  std::vector<std::pair<EntityId, RelationId>> keys(rows_.size());
  for (const auto& [k, row] : rows_) keys[row] = k;
  if (keys.empty()) return;
  const TeacherVectors probe = fallback_.logits(keys[0].first, keys[0].second);
  for (auto& m : logits_) m.resize(static_cast<Eigen::Index>(keys.size()), probe[0].size());
  parallel_for(keys.size(), [&](std::size_t row) {
    const TeacherVectors v = fallback_.logits(keys[row].first, keys[row].second);
    for (std::size_t m = 0; m < kNumModalities; ++m) logits_[m].row(static_cast<Eigen::Index>(row)) = v[m].transpose();
  });
}

TeacherLogitCache::TeacherLogitCache(const FrozenTeachers& fallback, const Checkpoint& stored) : fallback_(fallback) {
  const Matrix& keys = stored.at("cache.queries");
  for (Eigen::Index row = 0; row < keys.rows(); ++row)
    rows_.emplace(std::pair{static_cast<EntityId>(keys(row, 0)), static_cast<RelationId>(keys(row, 1))},
                  static_cast<std::size_t>(row));
  for (std::size_t m = 0; m < kNumModalities; ++m)
    logits_[m] = stored.at(std::string("cache.") + to_string(kModalityOrder[m]));
}

TeacherVectors TeacherLogitCache::logits(EntityId head, RelationId rel) const {
  auto it = rows_.find({head, rel});
  if (it == rows_.end()) return fallback_.logits(head, rel);
  TeacherVectors out;
  for (std::size_t m = 0; m < kNumModalities; ++m)
    out[m] = logits_[m].row(static_cast<Eigen::Index>(it->second)).transpose();
  return out;
}

Checkpoint TeacherLogitCache::to_checkpoint() const {
  Checkpoint c;
  c.num_entities = static_cast<std::uint64_t>(logits_[0].cols());
  Matrix keys(static_cast<Eigen::Index>(rows_.size()), 2);
  for (const auto& [k, row] : rows_) {
    keys(static_cast<Eigen::Index>(row), 0) = k.first;
    keys(static_cast<Eigen::Index>(row), 1) = k.second;
  }
  c.matrices["cache.queries"] = std::move(keys);
  for (std::size_t m = 0; m < kNumModalities; ++m)
    c.matrices[std::string("cache.") + to_string(kModalityOrder[m])] = logits_[m];
  return c;
}

TeacherVectors teacher_logits(const TeacherEnsemble& ensemble, EntityId head, RelationId rel) {
  TeacherVectors out;
  for (std::size_t m = 0; m < kNumModalities; ++m) out[m] = ensemble.models[m].score_all(head, rel);
  return out;
}

std::array<double, kNumModalities> pretrain_epoch(TeacherEnsemble& ensemble, TeacherOptimizers& optimizers,
                                                  std::span<const Triple> train_aug, const TrainConfig& config,
                                                  Rng& rng) {
  std::array<double, kNumModalities> mean_loss{};
  if (train_aug.empty()) return mean_loss;
  std::vector<std::size_t> order(train_aug.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Triple> batch;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    const std::size_t end = std::min(order.size(), start + config.batch_size);
    batch.clear();
    for (std::size_t i = start; i < end; ++i) batch.push_back(train_aug[order[i]]);
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      KgeModel& model = ensemble.models[m];
      LossAndGrads lg = ce_loss_and_grads(batch, model);
      if (config.l2 > 0.0) {
        const auto params = model.parameters();
        for (std::size_t p = 0; p < params.size(); ++p) lg.grads[p] += config.l2 * *params[p];
      }
      mean_loss[m] += lg.loss * static_cast<double>(batch.size());
      auto params = model.parameters();
      optimizers.states[m].learning_rate = config.learning_rate;
      optimizer_step(params, lg.grads, optimizers.states[m]);
    }
  }
  for (auto& l : mean_loss) l /= static_cast<double>(train_aug.size());
  return mean_loss;
}

namespace {
constexpr char kTeacherMagic[8] = {'D', 'S', 'O', 'M', 'T', 'E', 'A', 'M'};
constexpr std::uint32_t kTeacherVersion = 1;
}  // namespace

void save_teachers(const std::filesystem::path& path, const TeacherEnsemble& ensemble,
                   const std::string& manifest_json) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kTeacherMagic, sizeof(kTeacherMagic));
  write_le(out, kTeacherVersion);
  write_le(out, static_cast<std::uint32_t>(manifest_json.size()));
  out.write(manifest_json.data(), static_cast<std::streamsize>(manifest_json.size()));
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    const KgeModel& model = ensemble.models[m];
    Checkpoint c;
    c.dim = model.dim();
    c.num_entities = model.num_entities();
    c.num_relations = model.relations.count();
    c.meta = std::string("{\"modality\":\"") + to_string(kModalityOrder[m]) + "\"}";
    put_model(c, "teacher", model);
    std::ostringstream blob;
    write_checkpoint(blob, c);
    const std::string bytes = blob.str();
    write_le(out, static_cast<std::uint64_t>(bytes.size()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

TeacherEnsemble load_teachers(const std::filesystem::path& path, std::string* manifest_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open teacher checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || !std::equal(std::begin(magic), std::end(magic), std::begin(kTeacherMagic)))
    throw CheckpointError("bad teacher checkpoint magic in " + path.string());
  std::uint32_t version = 0, manifest_len = 0;
  if (!read_le(in, version) || version != kTeacherVersion) throw CheckpointError("unsupported teacher checkpoint");
  if (!read_le(in, manifest_len)) throw CheckpointError("truncated teacher checkpoint");
  std::string manifest(manifest_len, '\0');
  in.read(manifest.data(), manifest_len);
  if (static_cast<std::uint32_t>(in.gcount()) != manifest_len) throw CheckpointError("truncated teacher checkpoint");
  if (manifest_json) *manifest_json = manifest;

  TeacherEnsemble e;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    std::uint64_t len = 0;
    if (!read_le(in, len)) throw CheckpointError("truncated teacher checkpoint");
    std::string bytes(len, '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(len));
    if (static_cast<std::uint64_t>(in.gcount()) != len) throw CheckpointError("truncated teacher checkpoint");
    std::istringstream blob(bytes);
    e.models[m] = get_model(read_checkpoint(blob), "teacher");
  }
  const std::size_t n = e.models[0].num_entities();
  const std::size_t r = e.models[0].relations.count();
  for (const auto& model : e.models)
    if (model.num_entities() != n || model.relations.count() != r)
      throw CheckpointError("teacher checkpoint modalities disagree on entity/relation counts");
  return e;
}

}  // namespace dsom
