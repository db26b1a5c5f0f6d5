#include "dsom/kge.hpp"

#include <cmath>

namespace dsom {

ComplexEmbeddingTable ComplexEmbeddingTable::random(std::size_t count, std::size_t dim, Rng& rng) {
  ComplexEmbeddingTable t(count, dim);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(dim));
  fill_normal(t.re, stddev, rng);
  fill_normal(t.im, stddev, rng);
  return t;
}

Projection Projection::xavier(std::size_t in_dim, std::size_t dim, Rng& rng) {
  Projection p;
  p.weights.resize(static_cast<Eigen::Index>(2 * dim), static_cast<Eigen::Index>(in_dim));
  fill_xavier_uniform(p.weights, rng);
  return p;
}

ComplexEmbeddingTable Projection::apply(const Matrix& features) const {
  const Eigen::Index dim = weights.rows() / 2;
  ComplexEmbeddingTable t;
  t.re = features * weights.topRows(dim).transpose();
  t.im = features * weights.bottomRows(dim).transpose();
  return t;
}

double complex_score(const ComplexRowRef& h_re, const ComplexRowRef& h_im, const ComplexRowRef& r_re,
                     const ComplexRowRef& r_im, const ComplexRowRef& t_re, const ComplexRowRef& t_im) {
  return (h_re.array() * r_re.array() * t_re.array() + h_im.array() * r_re.array() * t_im.array() +
          h_re.array() * r_im.array() * t_im.array() - h_im.array() * r_im.array() * t_re.array())
      .sum();
}

namespace {

// Query vector q with score(e) = <Re(e), q_re> + <Im(e), q_im>.
void query_vector(EntityId head, RelationId rel, const ComplexEmbeddingTable& entities,
                  const ComplexEmbeddingTable& relations, Vector& q_re, Vector& q_im) {
  const auto hr = entities.re.row(head).transpose();
  const auto hi = entities.im.row(head).transpose();
  const auto rr = relations.re.row(rel).transpose();
  const auto ri = relations.im.row(rel).transpose();
  q_re = hr.cwiseProduct(rr) - hi.cwiseProduct(ri);
  q_im = hi.cwiseProduct(rr) + hr.cwiseProduct(ri);
}

}  // namespace

Vector score_all(EntityId head, RelationId rel, const ComplexEmbeddingTable& entities,
                 const ComplexEmbeddingTable& relations) {
  Vector q_re, q_im;
  query_vector(head, rel, entities, relations, q_re, q_im);
  return entities.re * q_re + entities.im * q_im;
}

KgeModel KgeModel::structural(std::size_t num_entities, std::size_t num_relations, std::size_t dim, Rng& rng) {
  KgeModel m;
  m.entities = ComplexEmbeddingTable::random(num_entities, dim, rng);
  m.relations = ComplexEmbeddingTable::random(num_relations, dim, rng);
  return m;
}

KgeModel KgeModel::projected(Matrix features, std::size_t num_relations, std::size_t dim, Rng& rng) {
  KgeModel m;
  m.projection = Projection::xavier(static_cast<std::size_t>(features.cols()), dim, rng);
  m.features = std::move(features);
  m.relations = ComplexEmbeddingTable::random(num_relations, dim, rng);
  return m;
}

std::size_t KgeModel::num_entities() const {
  return projection ? static_cast<std::size_t>(features.rows()) : entities.count();
}

ComplexEmbeddingTable KgeModel::entity_table() const { return projection ? projection->apply(features) : entities; }

Vector KgeModel::score_all(EntityId head, RelationId rel) const {
  if (projection) return dsom::score_all(head, rel, entity_table(), relations);
  return dsom::score_all(head, rel, entities, relations);
}

std::vector<Matrix*> KgeModel::parameters() {
  if (projection) return {&relations.re, &relations.im, &projection->weights};
  return {&relations.re, &relations.im, &entities.re, &entities.im};
}

std::vector<const Matrix*> KgeModel::parameters() const {
  if (projection) return {&relations.re, &relations.im, &projection->weights};
  return {&relations.re, &relations.im, &entities.re, &entities.im};
}

std::vector<Matrix> zero_grads_like(const KgeModel& model) {
  std::vector<Matrix> out;
  for (const Matrix* p : model.parameters()) out.push_back(Matrix::Zero(p->rows(), p->cols()));
  return out;
}

void backprop_scores(EntityId head, RelationId rel, const Vector& grad_scores, const ComplexEmbeddingTable& entities,
                     const ComplexEmbeddingTable& relations, EntityTableGrad& entity_grad, Matrix& rel_re_grad,
                     Matrix& rel_im_grad) {
  Vector q_re, q_im;
  query_vector(head, rel, entities, relations, q_re, q_im);

  // Candidate side: d score(e) / d Re(e) = q_re, d / d Im(e) = q_im.
  entity_grad.re.noalias() += grad_scores * q_re.transpose();
  entity_grad.im.noalias() += grad_scores * q_im.transpose();

  // Query side.
  const Vector gq_re = entities.re.transpose() * grad_scores;
  const Vector gq_im = entities.im.transpose() * grad_scores;
  const auto hr = entities.re.row(head).transpose();
  const auto hi = entities.im.row(head).transpose();
  const auto rr = relations.re.row(rel).transpose();
  const auto ri = relations.im.row(rel).transpose();
  const Vector g_hr = gq_re.cwiseProduct(rr) + gq_im.cwiseProduct(ri);
  const Vector g_hi = gq_im.cwiseProduct(rr) - gq_re.cwiseProduct(ri);
  const Vector g_rr = gq_re.cwiseProduct(hr) + gq_im.cwiseProduct(hi);
  const Vector g_ri = gq_im.cwiseProduct(hr) - gq_re.cwiseProduct(hi);
  entity_grad.re.row(head) += g_hr.transpose();
  entity_grad.im.row(head) += g_hi.transpose();
  rel_re_grad.row(rel) += g_rr.transpose();
  rel_im_grad.row(rel) += g_ri.transpose();
}

void finish_entity_grads(const KgeModel& model, const EntityTableGrad& entity_grad, std::vector<Matrix>& grads) {
  if (model.projection) {
    const Eigen::Index dim = static_cast<Eigen::Index>(model.dim());
    grads[2].topRows(dim).noalias() += entity_grad.re.transpose() * model.features;
    grads[2].bottomRows(dim).noalias() += entity_grad.im.transpose() * model.features;
  } else {
    grads[2] += entity_grad.re;
    grads[3] += entity_grad.im;
  }
}

double cross_entropy(const Vector& scores, EntityId target) { return log_sum_exp(scores) - scores[target]; }

LossAndGrads ce_loss_and_grads(std::span<const Triple> batch, const KgeModel& model) {
  if (batch.empty()) throw std::invalid_argument("ce_loss_and_grads: empty batch");
  const ComplexEmbeddingTable table = model.entity_table();
  LossAndGrads out;
  out.grads = zero_grads_like(model);
  EntityTableGrad eg{Matrix::Zero(table.re.rows(), table.re.cols()), Matrix::Zero(table.im.rows(), table.im.cols())};
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  for (const auto& t : batch) {
    const Vector scores = score_all(t.head, t.rel, table, model.relations);
    const double loss = cross_entropy(scores, t.tail);
    if (!std::isfinite(loss)) throw NumericalError("non-finite cross-entropy", t);
    out.loss += loss * inv_batch;
    Vector g = softmax(scores);
    g[t.tail] -= 1.0;
    g *= inv_batch;
    backprop_scores(t.head, t.rel, g, table, model.relations, eg, out.grads[0], out.grads[1]);
  }
  finish_entity_grads(model, eg, out.grads);
  return out;
}

void optimizer_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state) {
  if (params.size() != grads.size()) throw std::invalid_argument("optimizer_step: parameter/gradient count mismatch");
  if (state.first_moment.empty()) {
    for (const Matrix* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first_moment.size() != params.size())
    throw std::invalid_argument("optimizer_step: state was built for a different parameter list");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = grads[i];
    if (p.rows() != g.rows() || p.cols() != g.cols())
      throw std::invalid_argument("optimizer_step: gradient shape mismatch");
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseAbs2();
    p.array() -= state.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.epsilon);
  }
}

}  // namespace dsom
