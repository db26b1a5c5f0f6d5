#include "dsom/eval.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "dsom/util.hpp"

namespace dsom {

std::size_t filtered_rank(const Vector& scores, EntityId target, const std::set<EntityId>& known_true) {
  if (target >= static_cast<std::size_t>(scores.size())) throw std::out_of_range("filtered_rank: target out of range");
  const double s_t = scores[target];
  std::size_t above = 0, ties = 0;
  for (Eigen::Index e = 0; e < scores.size(); ++e) {
    if (static_cast<EntityId>(e) == target || known_true.count(static_cast<EntityId>(e))) continue;
    if (scores[e] > s_t) ++above;
    else if (scores[e] == s_t) ++ties;
  }
  return 1 + above + ties / 2;
}

Metrics metrics_from_ranks(std::span<const std::size_t> ranks) {
  Metrics m;
  m.count = ranks.size();
  if (ranks.empty()) return m;
  for (std::size_t r : ranks) {
    m.mrr += 1.0 / static_cast<double>(r);
    m.mr += static_cast<double>(r);
    m.hits1 += r <= 1;
    m.hits3 += r <= 3;
    m.hits10 += r <= 10;
  }
  const double n = static_cast<double>(ranks.size());
  m.mrr /= n;
  m.mr /= n;
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
  return m;
}

EvalResult evaluate(const Scorer& scorer, std::span<const Triple> split, const QueryIndex& filter,
                    std::size_t num_rels) {
  if (split.empty()) throw std::invalid_argument("evaluate: empty split");
  EvalResult out;
  out.ranks.resize(2 * split.size());
  parallel_for(split.size(), [&](std::size_t i) {
    const Triple& t = split[i];
    const auto inv = static_cast<RelationId>(t.rel + num_rels);
    out.ranks[2 * i] = {t, Direction::tail, filtered_rank(scorer(t.head, t.rel), t.tail, filter.at(t.head, t.rel))};
    out.ranks[2 * i + 1] = {t, Direction::head, filtered_rank(scorer(t.tail, inv), t.head, filter.at(t.tail, inv))};
  });
  std::vector<std::size_t> ranks;
  ranks.reserve(out.ranks.size());
  for (const auto& r : out.ranks) ranks.push_back(r.rank);
  out.metrics = metrics_from_ranks(ranks);
  return out;
}

std::string metrics_json(const Metrics& m, const std::string& manifest_hash) {
  nlohmann::ordered_json j;
  j["mrr"] = m.mrr;
  j["mr"] = m.mr;
  j["hits1"] = m.hits1;
  j["hits3"] = m.hits3;
  j["hits10"] = m.hits10;
  j["count"] = m.count;
  j["tie_policy"] = kTiePolicy;
  j["manifest_hash"] = manifest_hash;
  return j.dump(2) + "\n";
}

void write_metrics_json(const std::filesystem::path& path, const Metrics& m, const std::string& manifest_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << metrics_json(m, manifest_hash);
}

void write_rank_dump(const std::filesystem::path& path, std::span<const RankRecord> ranks, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "head,rel,tail,direction,rank\n";
  for (const auto& r : ranks)
    out << ds.entities.name(r.triple.head) << ',' << ds.relations.name(r.triple.rel) << ','
        << ds.entities.name(r.triple.tail) << ',' << (r.direction == Direction::tail ? "tail" : "head") << ','
        << r.rank << '\n';
}

}  // namespace dsom
