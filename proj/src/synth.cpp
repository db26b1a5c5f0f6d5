#include "dsom/synth.hpp"

#include <algorithm>
#include <numeric>

#include "dsom/linalg.hpp"

namespace dsom {

SynthSplits generate_synthetic_kg(const SynthConfig& c) {
  const std::size_t n = c.num_entities;
  if (n == 0 || c.num_relations == 0 || c.num_clusters == 0 || c.spread == 0)
    throw InfeasibleSynthConfig("entity, relation, cluster and spread counts must be positive");
  if (c.num_clusters > n) throw InfeasibleSynthConfig("more clusters than entities");
  if (c.num_triples > n * n * c.num_relations)
    throw InfeasibleSynthConfig("requested " + std::to_string(c.num_triples) + " triples but only " +
                                std::to_string(n * n * c.num_relations) + " distinct (h, r, t) exist");

  std::vector<std::size_t> sizes(c.num_clusters, n / c.num_clusters);
  for (std::size_t k = 0; k < n % c.num_clusters; ++k) ++sizes[k];
  const std::size_t width = std::min(c.spread, *std::min_element(sizes.begin(), sizes.end()));
  const std::size_t capacity = n * c.num_relations * width;
  if (c.num_triples > capacity)
    throw InfeasibleSynthConfig("requested " + std::to_string(c.num_triples) + " triples but the cluster pattern admits " +
                                std::to_string(capacity));

  Rng rng(c.seed);
  std::vector<std::vector<std::size_t>> perm(c.num_relations, std::vector<std::size_t>(c.num_clusters));
  std::vector<std::size_t> offset(c.num_relations);
  for (std::size_t r = 0; r < c.num_relations; ++r) {
    std::iota(perm[r].begin(), perm[r].end(), 0);
    std::shuffle(perm[r].begin(), perm[r].end(), rng);
    offset[r] = static_cast<std::size_t>(rng() % 1000003);
  }

  auto name = [](std::size_t k, std::size_t j) { return "c" + std::to_string(k) + "_e" + std::to_string(j); };
  std::vector<SynthSplits::NameTriple> candidates;
  candidates.reserve(capacity);
  for (std::size_t k = 0; k < c.num_clusters; ++k)
    for (std::size_t j = 0; j < sizes[k]; ++j)
      for (std::size_t r = 0; r < c.num_relations; ++r) {
        const std::size_t dst = perm[r][k];
        for (std::size_t u = 0; u < width; ++u)
          candidates.push_back({name(k, j), "r" + std::to_string(r), name(dst, (j + offset[r] + u) % sizes[dst])});
      }
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(c.num_triples);

  const std::size_t n_train = c.num_triples * 8 / 10;
  const std::size_t n_valid = c.num_triples / 10;
  SynthSplits out;
  out.train.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.valid.assign(candidates.begin() + static_cast<std::ptrdiff_t>(n_train),
                   candidates.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  out.test.assign(candidates.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), candidates.end());
  return out;
}

}  // namespace dsom
