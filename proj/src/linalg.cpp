#include "dsom/linalg.hpp"

#include <cmath>

namespace dsom {

double log_sum_exp(const Vector& v) {
  const double mx = v.maxCoeff();
  return mx + std::log((v.array() - mx).exp().sum());
}

Vector softmax(const Vector& v, double temperature) {
  Vector z = v / temperature;
  z.array() -= z.maxCoeff();
  z = z.array().exp();
  return z / z.sum();
}

Vector log_softmax(const Vector& v, double temperature) {
  const Vector z = v / temperature;
  return z.array() - log_sum_exp(z);
}

void fill_normal(Matrix& m, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

void fill_xavier_uniform(Matrix& m, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace dsom
