#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "dsom/kge.hpp"
#include "dsom/linalg.hpp"

namespace dsom {

// Checkpoint blob, little-endian:
//   magic "DSOMCKPT" (8 bytes), u32 version (= 1)
//   u64 dim, u64 num_entities, u64 num_relations      (config echo)
//   u32 meta length, meta bytes (JSON text, may be empty)
//   u32 matrix count, then per matrix:
//     u32 name length, name bytes, u64 rows, u64 cols, f64[rows*cols] row-major
inline constexpr char kCheckpointMagic[8] = {'D', 'S', 'O', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t dim = 0;
  std::uint64_t num_entities = 0;
  std::uint64_t num_relations = 0;
  std::string meta;
  std::map<std::string, Matrix> matrices;

  const Matrix& at(const std::string& name) const;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Stores a model's tables (and projection + features when present) under `prefix`.
void put_model(Checkpoint& ckpt, const std::string& prefix, const KgeModel& model);
KgeModel get_model(const Checkpoint& ckpt, const std::string& prefix);

}  // namespace dsom
