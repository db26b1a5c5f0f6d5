#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsom {

/// Clustered random KG. Entity (cluster k, index j) is named "c<k>_e<j>";
/// relation r maps cluster k onto cluster perm_r(k) and index j onto one of
/// `spread` consecutive indices starting at j + offset_r (mod cluster size).
struct SynthConfig {
  std::size_t num_entities = 200;
  std::size_t num_relations = 10;
  std::size_t num_triples = 2000;
  std::size_t num_clusters = 4;
  std::size_t spread = 1;
  std::size_t feature_dim = 32;
  int signal_modalities = 1;  // visual first, then textual; the rest are noise
  std::uint64_t seed = 7;
};

class InfeasibleSynthConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SynthSplits {
  using NameTriple = std::array<std::string, 3>;
  std::vector<NameTriple> train;
  std::vector<NameTriple> valid;
  std::vector<NameTriple> test;
};

/// Distinct triples split 80/10/10. Deterministic under `seed`.
SynthSplits generate_synthetic_kg(const SynthConfig& config);

}  // namespace dsom
