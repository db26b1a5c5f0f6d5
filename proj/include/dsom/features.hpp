#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dsom/kg.hpp"
#include "dsom/linalg.hpp"

namespace dsom {

enum class FeatureModality : std::uint8_t { visual = 0, textual = 1 };

const char* to_string(FeatureModality m);

// Feature file, little-endian:
//   magic "DSOMFEAT" (8 bytes)
//   u32   version (= 1)
//   u8    modality tag (0 = visual, 1 = textual)
//   u64   num_entities
//   u64   dim
//   u8[ceil(n/8)] presence bitmap, bit i = entity i present, LSB first
//   f32[n*d] row-major payload
inline constexpr char kFeatureMagic[8] = {'D', 'S', 'O', 'M', 'F', 'E', 'A', 'T'};
inline constexpr std::uint32_t kFeatureVersion = 1;

class FeatureFileError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, version_mismatch, bad_modality, truncated, non_finite };
  FeatureFileError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Fixed per-entity features for one modality. Row i belongs to entity id i.
/// Missing rows are all-zero and have mask[i] == false.
struct FeatureMatrix {
  FeatureModality modality = FeatureModality::visual;
  std::size_t num_entities = 0;
  std::size_t dim = 0;
  std::vector<float> data;
  std::vector<bool> mask;

  FeatureMatrix() = default;
  FeatureMatrix(FeatureModality m, std::size_t n, std::size_t d)
      : modality(m), num_entities(n), dim(d), data(n * d, 0.0f), mask(n, true) {}

  float& at(std::size_t row, std::size_t col) { return data[row * dim + col]; }
  float at(std::size_t row, std::size_t col) const { return data[row * dim + col]; }
  std::size_t present_count() const;

  /// Promotes to the working precision (num_entities x dim).
  Matrix to_matrix() const;

  /// Throws FeatureFileError{non_finite} or std::invalid_argument on a broken invariant.
  void validate() const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

FeatureMatrix read_feature_file(const std::filesystem::path& path);
void write_feature_file(const FeatureMatrix& matrix, const std::filesystem::path& path);

/// Zeroes a uniformly random floor(rate * n)-subset of rows and clears their mask bits.
FeatureMatrix apply_missing_mask(const FeatureMatrix& matrix, double missing_rate, std::uint64_t seed);

/// Latent structure of a synthetic entity, recovered from its `c<cluster>_e<index>` name.
struct EntityLatent {
  std::uint32_t cluster = 0;
  std::uint32_t index = 0;
  std::uint32_t cluster_size = 0;
};

/// Throws std::invalid_argument when a name does not follow the synthetic pattern.
std::vector<EntityLatent> latents_from_vocab(const Vocab& entities);

/// Synthetic visual/textual features. The first `signal_modality_count`
/// modalities (visual, then textual) encode each entity's cluster and
/// within-cluster position behind a random linear map plus small noise; the
/// remaining ones are i.i.d. standard normal.
std::pair<FeatureMatrix, FeatureMatrix> synth_features(const Dataset& dataset, std::size_t dim,
                                                       int signal_modality_count, std::uint64_t noise_seed);

}  // namespace dsom
