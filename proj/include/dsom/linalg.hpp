#pragma once

#include <Eigen/Core>
#include <random>

namespace dsom {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using Rng = std::mt19937_64;

/// Numerically stable log(sum(exp(v))).
double log_sum_exp(const Vector& v);

/// softmax(v / temperature) with max subtraction.
Vector softmax(const Vector& v, double temperature = 1.0);

/// log softmax(v)[i] for every i.
Vector log_softmax(const Vector& v, double temperature = 1.0);

/// Fills with i.i.d. normal(0, stddev) draws.
void fill_normal(Matrix& m, double stddev, Rng& rng);

/// Xavier/Glorot uniform for a (fan_out x fan_in) weight.
void fill_xavier_uniform(Matrix& m, Rng& rng);

bool all_finite(const Matrix& m);

}  // namespace dsom
