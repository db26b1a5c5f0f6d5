#include "dsom/checkpoint.hpp"

#include <algorithm>
#include <fstream>

#include "dsom/util.hpp"

namespace dsom {

const Matrix& Checkpoint::at(const std::string& name) const {
  auto it = matrices.find(name);
  if (it == matrices.end()) throw CheckpointError("checkpoint has no matrix '" + name + "'");
  return it->second;
}

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_le(os, kCheckpointVersion);
  write_le(os, ckpt.dim);
  write_le(os, ckpt.num_entities);
  write_le(os, ckpt.num_relations);
  write_le(os, static_cast<std::uint32_t>(ckpt.meta.size()));
  os.write(ckpt.meta.data(), static_cast<std::streamsize>(ckpt.meta.size()));
  write_le(os, static_cast<std::uint32_t>(ckpt.matrices.size()));
  for (const auto& [name, m] : ckpt.matrices) {
    write_le(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le(os, static_cast<std::uint64_t>(m.rows()));
    write_le(os, static_cast<std::uint64_t>(m.cols()));
    os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!os) throw IoError("checkpoint write failed");
}

namespace {

std::string read_string(std::istream& is, std::uint32_t len) {
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (static_cast<std::uint32_t>(is.gcount()) != len) throw CheckpointError("truncated checkpoint");
  return s;
}

}  // namespace

Checkpoint read_checkpoint(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (is.gcount() != sizeof(magic) || !std::equal(std::begin(magic), std::end(magic), std::begin(kCheckpointMagic)))
    throw CheckpointError("bad checkpoint magic");
  std::uint32_t version = 0;
  if (!read_le(is, version)) throw CheckpointError("truncated checkpoint");
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  std::uint32_t meta_len = 0, count = 0;
  if (!read_le(is, c.dim) || !read_le(is, c.num_entities) || !read_le(is, c.num_relations) || !read_le(is, meta_len))
    throw CheckpointError("truncated checkpoint");
  c.meta = read_string(is, meta_len);
  if (!read_le(is, count)) throw CheckpointError("truncated checkpoint");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0;
    if (!read_le(is, name_len)) throw CheckpointError("truncated checkpoint");
    std::string name = read_string(is, name_len);
    std::uint64_t rows = 0, cols = 0;
    if (!read_le(is, rows) || !read_le(is, cols)) throw CheckpointError("truncated checkpoint");
    if (rows != 0 && cols > (std::uint64_t{1} << 40) / rows) throw CheckpointError("implausible matrix shape");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (static_cast<std::size_t>(is.gcount()) != static_cast<std::size_t>(m.size()) * sizeof(double))
      throw CheckpointError("truncated checkpoint payload for '" + name + "'");
    c.matrices.emplace(std::move(name), std::move(m));
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

void put_model(Checkpoint& ckpt, const std::string& prefix, const KgeModel& model) {
  ckpt.matrices[prefix + ".rel.re"] = model.relations.re;
  ckpt.matrices[prefix + ".rel.im"] = model.relations.im;
  if (model.projection) {
    ckpt.matrices[prefix + ".proj"] = model.projection->weights;
    ckpt.matrices[prefix + ".features"] = model.features;
  } else {
    ckpt.matrices[prefix + ".ent.re"] = model.entities.re;
    ckpt.matrices[prefix + ".ent.im"] = model.entities.im;
  }
}

KgeModel get_model(const Checkpoint& ckpt, const std::string& prefix) {
  KgeModel m;
  m.relations.re = ckpt.at(prefix + ".rel.re");
  m.relations.im = ckpt.at(prefix + ".rel.im");
  if (ckpt.matrices.count(prefix + ".proj")) {
    m.projection = Projection{ckpt.at(prefix + ".proj")};
    m.features = ckpt.at(prefix + ".features");
  } else {
    m.entities.re = ckpt.at(prefix + ".ent.re");
    m.entities.im = ckpt.at(prefix + ".ent.im");
  }
  return m;
}

}  // namespace dsom
