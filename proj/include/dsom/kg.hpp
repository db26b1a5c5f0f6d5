#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dsom {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

/// Dense string <-> id mapping. Ids are assigned in insertion order.
class Vocab {
 public:
  /// Returns the id of `name`, inserting it if absent.
  std::uint32_t intern(const std::string& name);
  std::uint32_t lookup(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  /// `id<TAB>name` lines.
  void dump(const std::filesystem::path& path) const;
  static Vocab read_dump(const std::filesystem::path& path);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct Triple {
  EntityId head = 0;
  RelationId rel = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class InvalidDataset : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  Vocab entities;
  Vocab relations;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  /// `train` followed by its reversed copies.
  std::vector<Triple> train_aug;
  /// Number of duplicate triples seen inside any single split.
  std::size_t duplicate_count = 0;

  std::size_t num_entities() const { return entities.size(); }
  std::size_t num_relations() const { return relations.size(); }
  /// Relation vocabulary size after reverse augmentation.
  std::size_t num_aug_relations() const { return 2 * relations.size(); }

  /// Stable 64-bit content hash over vocabularies and all splits.
  std::uint64_t fingerprint() const;
};

/// Loads the three TAB-separated splits. Vocabularies are built from the
/// union of splits in first-appearance order (train, valid, test).
Dataset load_dataset(const std::filesystem::path& train_path, const std::filesystem::path& valid_path,
                     const std::filesystem::path& test_path);

/// Builds a dataset from already-parsed name triples; same rules as load_dataset.
Dataset make_dataset(const std::vector<std::array<std::string, 3>>& train,
                     const std::vector<std::array<std::string, 3>>& valid,
                     const std::vector<std::array<std::string, 3>>& test);

void write_triples(const std::filesystem::path& path, std::span<const Triple> triples, const Dataset& ds);

/// Appends (t, r + num_rels, h) for every (h, r, t), preserving order.
std::vector<Triple> add_reverse(std::span<const Triple> triples, std::size_t num_rels);

/// Maps an augmented relation id back onto the original direction.
inline RelationId base_relation(RelationId rel, std::size_t num_rels) {
  return rel >= num_rels ? static_cast<RelationId>(rel - num_rels) : rel;
}

/// Total map (head, rel) -> sorted tail set. Missing queries yield the empty set.
class QueryIndex {
 public:
  using Key = std::pair<EntityId, RelationId>;

  void insert(const Triple& t) { map_[{t.head, t.rel}].insert(t.tail); }
  const std::set<EntityId>& at(EntityId head, RelationId rel) const;
  bool contains(EntityId head, RelationId rel, EntityId tail) const;
  std::size_t num_queries() const { return map_.size(); }
  const std::map<Key, std::set<EntityId>>& entries() const { return map_; }

 private:
  std::map<Key, std::set<EntityId>> map_;
};

/// N(h, r): tails observed for each query in the training graph.
using NeighborIndex = QueryIndex;
/// Every known-true tail across train, valid and test.
using FilterIndex = QueryIndex;

NeighborIndex build_neighbor_index(std::span<const Triple> train_aug);
FilterIndex build_filter_index(std::span<const std::span<const Triple>> all_splits_aug);
/// Convenience: augments all three splits of `ds` and unions them.
FilterIndex build_filter_index(const Dataset& ds);

}  // namespace dsom
