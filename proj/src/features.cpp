#include "dsom/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "dsom/util.hpp"

namespace dsom {

const char* to_string(FeatureModality m) { return m == FeatureModality::visual ? "visual" : "textual"; }

std::size_t FeatureMatrix::present_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

Matrix FeatureMatrix::to_matrix() const {
  Matrix m(num_entities, dim);
  for (std::size_t i = 0; i < data.size(); ++i) m.data()[i] = data[i];
  return m;
}

void FeatureMatrix::validate() const {
  if (data.size() != num_entities * dim) throw std::invalid_argument("feature payload size does not match shape");
  if (mask.size() != num_entities) throw std::invalid_argument("feature mask size does not match num_entities");
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!std::isfinite(data[i]))
      throw FeatureFileError(FeatureFileError::Kind::non_finite,
                             "non-finite feature value at row " + std::to_string(i / std::max<std::size_t>(dim, 1)));
  for (std::size_t r = 0; r < num_entities; ++r) {
    if (mask[r]) continue;
    for (std::size_t c = 0; c < dim; ++c)
      if (at(r, c) != 0.0f) throw std::invalid_argument("missing feature row " + std::to_string(r) + " is not zero");
  }
}

FeatureMatrix read_feature_file(const std::filesystem::path& path) {
  using Kind = FeatureFileError::Kind;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FeatureFileError(Kind::io, "cannot open feature file " + path.string());

  char magic[8];
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic)) throw FeatureFileError(Kind::truncated, "truncated header in " + path.string());
  if (!std::equal(std::begin(magic), std::end(magic), std::begin(kFeatureMagic)))
    throw FeatureFileError(Kind::bad_magic, "bad magic in " + path.string());

  std::uint32_t version = 0;
  std::uint8_t tag = 0;
  std::uint64_t n = 0, d = 0;
  if (!read_le(in, version)) throw FeatureFileError(Kind::truncated, "truncated header in " + path.string());
  if (version != kFeatureVersion)
    throw FeatureFileError(Kind::version_mismatch, "unsupported feature file version " + std::to_string(version));
  if (!read_le(in, tag) || !read_le(in, n) || !read_le(in, d))
    throw FeatureFileError(Kind::truncated, "truncated header in " + path.string());
  if (tag > 1) throw FeatureFileError(Kind::bad_modality, "unknown modality tag " + std::to_string(tag));

  // Guard against absurd headers before allocating.
  const auto file_size = std::filesystem::file_size(path);
  const std::uint64_t bitmap_bytes = (n + 7) / 8;
  const std::uint64_t header_bytes = 8 + 4 + 1 + 8 + 8;
  if (d != 0 && n > file_size / d)
    throw FeatureFileError(Kind::truncated, "payload shorter than declared shape in " + path.string());
  if (file_size < header_bytes + bitmap_bytes + n * d * 4)
    throw FeatureFileError(Kind::truncated, "payload shorter than declared shape in " + path.string());

  FeatureMatrix m(static_cast<FeatureModality>(tag), n, d);
  std::vector<std::uint8_t> bitmap(bitmap_bytes);
  in.read(reinterpret_cast<char*>(bitmap.data()), static_cast<std::streamsize>(bitmap.size()));
  in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(m.data.size() * sizeof(float)));
  if (!in) throw FeatureFileError(Kind::truncated, "truncated payload in " + path.string());
  for (std::size_t i = 0; i < n; ++i) m.mask[i] = (bitmap[i / 8] >> (i % 8)) & 1u;

  for (std::size_t i = 0; i < m.data.size(); ++i)
    if (!std::isfinite(m.data[i]))
      throw FeatureFileError(Kind::non_finite, "non-finite value at row " + std::to_string(i / d) + " in " +
                                                   path.string());
  for (std::size_t r = 0; r < n; ++r)
    if (!m.mask[r]) std::fill_n(m.data.begin() + static_cast<std::ptrdiff_t>(r * d), d, 0.0f);
  return m;
}

void write_feature_file(const FeatureMatrix& matrix, const std::filesystem::path& path) {
  matrix.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FeatureFileError(FeatureFileError::Kind::io, "cannot open " + path.string() + " for writing");
  out.write(kFeatureMagic, sizeof(kFeatureMagic));
  write_le(out, kFeatureVersion);
  write_le(out, static_cast<std::uint8_t>(matrix.modality));
  write_le(out, static_cast<std::uint64_t>(matrix.num_entities));
  write_le(out, static_cast<std::uint64_t>(matrix.dim));
  std::vector<std::uint8_t> bitmap((matrix.num_entities + 7) / 8, 0);
  for (std::size_t i = 0; i < matrix.num_entities; ++i)
    if (matrix.mask[i]) bitmap[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  out.write(reinterpret_cast<const char*>(bitmap.data()), static_cast<std::streamsize>(bitmap.size()));
  out.write(reinterpret_cast<const char*>(matrix.data.data()),
            static_cast<std::streamsize>(matrix.data.size() * sizeof(float)));
  if (!out) throw FeatureFileError(FeatureFileError::Kind::io, "write failed: " + path.string());
}

FeatureMatrix apply_missing_mask(const FeatureMatrix& matrix, double missing_rate, std::uint64_t seed) {
  if (!(missing_rate >= 0.0 && missing_rate <= 1.0)) throw std::invalid_argument("missing_rate must be in [0, 1]");
  FeatureMatrix out = matrix;
  const auto k = static_cast<std::size_t>(std::floor(missing_rate * static_cast<double>(matrix.num_entities)));
  if (k == 0) return out;
  std::vector<std::size_t> rows(matrix.num_entities);
  std::iota(rows.begin(), rows.end(), 0);
  Rng rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t r = rows[i];
    out.mask[r] = false;
    std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(r * out.dim), out.dim, 0.0f);
  }
  return out;
}

std::vector<EntityLatent> latents_from_vocab(const Vocab& entities) {
  std::vector<EntityLatent> out(entities.size());
  std::uint32_t num_clusters = 0;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const auto& name = entities.name(static_cast<std::uint32_t>(i));
    const auto sep = name.find("_e");
    if (name.size() < 4 || name[0] != 'c' || sep == std::string::npos)
      throw std::invalid_argument("entity name '" + name + "' is not of the form c<cluster>_e<index>");
    try {
      out[i].cluster = static_cast<std::uint32_t>(std::stoul(name.substr(1, sep - 1)));
      out[i].index = static_cast<std::uint32_t>(std::stoul(name.substr(sep + 2)));
    } catch (const std::exception&) {
      throw std::invalid_argument("entity name '" + name + "' is not of the form c<cluster>_e<index>");
    }
    num_clusters = std::max(num_clusters, out[i].cluster + 1);
  }
  std::vector<std::uint32_t> sizes(num_clusters, 0);
  for (const auto& l : out) sizes[l.cluster] = std::max(sizes[l.cluster], l.index + 1);
  for (auto& l : out) l.cluster_size = sizes[l.cluster];
  return out;
}

namespace {

constexpr int kHarmonics = 3;
constexpr double kSignalNoise = 0.1;

// Raw latent code: scaled cluster one-hot followed by circular position harmonics.
Matrix latent_codes(const std::vector<EntityLatent>& latents) {
  std::uint32_t clusters = 0;
  for (const auto& l : latents) clusters = std::max(clusters, l.cluster + 1);
  Matrix codes = Matrix::Zero(static_cast<Eigen::Index>(latents.size()), clusters + 2 * kHarmonics);
  for (std::size_t i = 0; i < latents.size(); ++i) {
    const auto& l = latents[i];
    const auto row = static_cast<Eigen::Index>(i);
    codes(row, l.cluster) = 2.0;
    const double angle = 2.0 * std::numbers::pi * l.index / std::max<std::uint32_t>(l.cluster_size, 1);
    for (int h = 0; h < kHarmonics; ++h) {
      codes(row, clusters + 2 * h) = std::cos((h + 1) * angle);
      codes(row, clusters + 2 * h + 1) = std::sin((h + 1) * angle);
    }
  }
  return codes;
}

FeatureMatrix signal_features(FeatureModality modality, const Matrix& codes, std::size_t dim, Rng& rng) {
  Matrix mix(codes.cols(), static_cast<Eigen::Index>(dim));
  fill_normal(mix, 1.0 / std::sqrt(static_cast<double>(codes.cols())), rng);
  Matrix noise(codes.rows(), static_cast<Eigen::Index>(dim));
  fill_normal(noise, kSignalNoise, rng);
  const Matrix values = codes * mix + noise;
  FeatureMatrix fm(modality, static_cast<std::size_t>(codes.rows()), dim);
  for (Eigen::Index i = 0; i < values.size(); ++i) fm.data[static_cast<std::size_t>(i)] = static_cast<float>(values.data()[i]);
  return fm;
}

FeatureMatrix noise_features(FeatureModality modality, std::size_t n, std::size_t dim, Rng& rng) {
  FeatureMatrix fm(modality, n, dim);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  for (auto& v : fm.data) v = dist(rng);
  return fm;
}

}  // namespace

std::pair<FeatureMatrix, FeatureMatrix> synth_features(const Dataset& dataset, std::size_t dim,
                                                       int signal_modality_count, std::uint64_t noise_seed) {
  if (dim < 2) throw std::invalid_argument("synthetic feature dim must be >= 2");
  const auto latents = latents_from_vocab(dataset.entities);
  const Matrix codes = latent_codes(latents);
  const std::size_t n = dataset.num_entities();
  // Separate streams per modality so changing one does not perturb the other.
  Rng visual_rng(noise_seed * 2 + 1);
  Rng textual_rng(noise_seed * 2 + 2);
  FeatureMatrix visual = signal_modality_count >= 1 ? signal_features(FeatureModality::visual, codes, dim, visual_rng)
                                                    : noise_features(FeatureModality::visual, n, dim, visual_rng);
  FeatureMatrix textual = signal_modality_count >= 2
                              ? signal_features(FeatureModality::textual, codes, dim, textual_rng)
                              : noise_features(FeatureModality::textual, n, dim, textual_rng);
  return {std::move(visual), std::move(textual)};
}

}  // namespace dsom
