#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsom/kg.hpp"
#include "dsom/linalg.hpp"

namespace dsom {

/// count x dim complex embeddings, stored as separate real/imaginary halves.
struct ComplexEmbeddingTable {
  Matrix re;
  Matrix im;

  ComplexEmbeddingTable() = default;
  ComplexEmbeddingTable(std::size_t count, std::size_t dim)
      : re(Matrix::Zero(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim))),
        im(Matrix::Zero(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim))) {}

  /// i.i.d. normal entries with std 1/sqrt(dim).
  static ComplexEmbeddingTable random(std::size_t count, std::size_t dim, Rng& rng);

  std::size_t count() const { return static_cast<std::size_t>(re.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(re.cols()); }
};

/// Linear map from a fixed feature vector to a complex embedding: the first
/// `dim` outputs are the real part, the next `dim` the imaginary part.
struct Projection {
  Matrix weights;  // (2 * dim) x in_dim

  static Projection xavier(std::size_t in_dim, std::size_t dim, Rng& rng);
  std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }
  ComplexEmbeddingTable apply(const Matrix& features) const;
};

using ComplexRowRef = Eigen::Ref<const Eigen::RowVectorXd>;

/// Re(<h, r, conj(t)>).
double complex_score(const ComplexRowRef& h_re, const ComplexRowRef& h_im, const ComplexRowRef& r_re,
                     const ComplexRowRef& r_im, const ComplexRowRef& t_re, const ComplexRowRef& t_im);

/// Scores of (head, rel, e) for every entity e, as one matrix-vector product.
Vector score_all(EntityId head, RelationId rel, const ComplexEmbeddingTable& entities,
                 const ComplexEmbeddingTable& relations);

/// Embedding model: relation table plus either a free entity table or a
/// trainable projection over fixed features.
struct KgeModel {
  ComplexEmbeddingTable relations;
  ComplexEmbeddingTable entities;
  std::optional<Projection> projection;
  Matrix features;

  static KgeModel structural(std::size_t num_entities, std::size_t num_relations, std::size_t dim, Rng& rng);
  static KgeModel projected(Matrix features, std::size_t num_relations, std::size_t dim, Rng& rng);

  std::size_t dim() const { return relations.dim(); }
  std::size_t num_entities() const;
  /// Entity table as seen by the score function.
  ComplexEmbeddingTable entity_table() const;
  Vector score_all(EntityId head, RelationId rel) const;

  /// Trainable parameters in a fixed order; gradients use the same order.
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
};

/// Gradient buffers shaped like KgeModel::parameters().
std::vector<Matrix> zero_grads_like(const KgeModel& model);

class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::optional<Triple> triple = std::nullopt)
      : std::runtime_error(what), triple_(triple) {}
  const std::optional<Triple>& triple() const { return triple_; }

 private:
  std::optional<Triple> triple_;
};

/// Gradient with respect to the materialized entity table.
struct EntityTableGrad {
  Matrix re;
  Matrix im;
};

/// Accumulates d(loss)/d(tables) given d(loss)/d(scores) for query (head, rel).
void backprop_scores(EntityId head, RelationId rel, const Vector& grad_scores, const ComplexEmbeddingTable& entities,
                     const ComplexEmbeddingTable& relations, EntityTableGrad& entity_grad, Matrix& rel_re_grad,
                     Matrix& rel_im_grad);

/// Folds an entity-table gradient into the model's parameter gradients
/// (directly for a free table, through the projection otherwise).
void finish_entity_grads(const KgeModel& model, const EntityTableGrad& entity_grad, std::vector<Matrix>& grads);

struct LossAndGrads {
  double loss = 0.0;
  std::vector<Matrix> grads;
};

/// Mean over the batch of -log softmax(score_all(h, r))[t], with exact gradients.
LossAndGrads ce_loss_and_grads(std::span<const Triple> batch, const KgeModel& model);

/// -log softmax(scores)[target].
double cross_entropy(const Vector& scores, EntityId target);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// One bias-corrected Adam update. Accumulators are lazily shaped on first use.
void optimizer_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state);

}  // namespace dsom
