#include "dsom/kg.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "dsom/util.hpp"

namespace dsom {

std::uint32_t Vocab::intern(const std::string& name) {
  auto [it, inserted] = index_.try_emplace(name, static_cast<std::uint32_t>(names_.size()));
  if (inserted) names_.push_back(name);
  return it->second;
}

std::uint32_t Vocab::lookup(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown vocabulary entry: " + name);
  return it->second;
}

void Vocab::dump(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < names_.size(); ++i) out << i << '\t' << names_[i] << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Vocab Vocab::read_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Vocab v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path.string(), lineno, "expected id<TAB>name");
    std::size_t id = 0;
    try {
      id = std::stoul(line.substr(0, tab));
    } catch (const std::exception&) {
      throw ParseError(path.string(), lineno, "bad id");
    }
    if (id != v.size()) throw ParseError(path.string(), lineno, "ids must be contiguous from 0");
    v.intern(line.substr(tab + 1));
  }
  return v;
}

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& what)
    : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

namespace {

using NameTriple = std::array<std::string, 3>;

std::vector<NameTriple> read_triple_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<NameTriple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (auto tab = line.find('\t'); tab != std::string::npos; tab = line.find('\t', start)) {
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    fields.push_back(line.substr(start));
    if (fields.size() != 3)
      throw ParseError(path.string(), lineno, "expected 3 TAB-separated fields (head, relation, tail)");
    NameTriple t{std::move(fields[0]), std::move(fields[1]), std::move(fields[2])};
    out.push_back(std::move(t));
  }
  return out;
}

std::size_t count_duplicates(const std::vector<Triple>& split) {
  std::set<Triple> seen;
  std::size_t dups = 0;
  for (const auto& t : split)
    if (!seen.insert(t).second) ++dups;
  return dups;
}

}  // namespace

Dataset make_dataset(const std::vector<NameTriple>& train, const std::vector<NameTriple>& valid,
                     const std::vector<NameTriple>& test) {
  if (train.empty()) throw InvalidDataset("training split is empty");
  Dataset ds;
  auto map_split = [&ds](const std::vector<NameTriple>& names) {
    std::vector<Triple> out;
    out.reserve(names.size());
    for (const auto& [h, r, t] : names) {
      Triple tr;
      tr.head = ds.entities.intern(h);
      tr.rel = ds.relations.intern(r);
      tr.tail = ds.entities.intern(t);
      out.push_back(tr);
    }
    return out;
  };
  ds.train = map_split(train);
  ds.valid = map_split(valid);
  ds.test = map_split(test);

  ds.duplicate_count = count_duplicates(ds.train) + count_duplicates(ds.valid) + count_duplicates(ds.test);
  if (ds.duplicate_count > 0)
    std::cerr << "warning: " << ds.duplicate_count << " duplicate triple(s) within splits kept\n";

  const std::set<Triple> train_set(ds.train.begin(), ds.train.end());
  const std::set<Triple> valid_set(ds.valid.begin(), ds.valid.end());
  for (const auto& t : ds.valid)
    if (train_set.count(t)) throw InvalidDataset("valid split shares a triple with train");
  for (const auto& t : ds.test)
    if (train_set.count(t) || valid_set.count(t)) throw InvalidDataset("test split shares a triple with train/valid");

  ds.train_aug = add_reverse(ds.train, ds.num_relations());
  return ds;
}

Dataset load_dataset(const std::filesystem::path& train_path, const std::filesystem::path& valid_path,
                     const std::filesystem::path& test_path) {
  return make_dataset(read_triple_file(train_path), read_triple_file(valid_path), read_triple_file(test_path));
}

void write_triples(const std::filesystem::path& path, std::span<const Triple> triples, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& t : triples)
    out << ds.entities.name(t.head) << '\t' << ds.relations.name(t.rel) << '\t' << ds.entities.name(t.tail) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::uint64_t Dataset::fingerprint() const {
  Fnv1a h;
  for (const auto* v : {&entities, &relations}) {
    h.update_value<std::uint64_t>(v->size());
    for (const auto& n : v->names()) {
      h.update(n);
      h.update("\0", 1);
    }
  }
  for (const auto* split : {&train, &valid, &test}) {
    h.update_value<std::uint64_t>(split->size());
    for (const auto& t : *split) {
      h.update_value(t.head);
      h.update_value(t.rel);
      h.update_value(t.tail);
    }
  }
  return h.digest();
}

std::vector<Triple> add_reverse(std::span<const Triple> triples, std::size_t num_rels) {
  std::vector<Triple> out(triples.begin(), triples.end());
  out.reserve(2 * triples.size());
  for (const auto& t : triples)
    out.push_back({t.tail, static_cast<RelationId>(t.rel + num_rels), t.head});
  return out;
}

const std::set<EntityId>& QueryIndex::at(EntityId head, RelationId rel) const {
  static const std::set<EntityId> empty;
  auto it = map_.find({head, rel});
  return it == map_.end() ? empty : it->second;
}

bool QueryIndex::contains(EntityId head, RelationId rel, EntityId tail) const {
  return at(head, rel).count(tail) != 0;
}

NeighborIndex build_neighbor_index(std::span<const Triple> train_aug) {
  NeighborIndex idx;
  for (const auto& t : train_aug) idx.insert(t);
  return idx;
}

FilterIndex build_filter_index(std::span<const std::span<const Triple>> all_splits_aug) {
  FilterIndex idx;
  for (const auto& split : all_splits_aug)
    for (const auto& t : split) idx.insert(t);
  return idx;
}

FilterIndex build_filter_index(const Dataset& ds) {
  const auto valid_aug = add_reverse(ds.valid, ds.num_relations());
  const auto test_aug = add_reverse(ds.test, ds.num_relations());
  const std::span<const Triple> splits[] = {ds.train_aug, valid_aug, test_aug};
  return build_filter_index(splits);
}

}  // namespace dsom
