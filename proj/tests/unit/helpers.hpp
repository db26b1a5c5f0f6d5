#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "dsom/linalg.hpp"

namespace dsom::test {

inline Vector random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  fill_normal(m, scale, rng);
  return m;
}

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries that are zero up to
/// rounding from dominating.
inline double rel_err(double analytic, double numeric, double floor = 1e-5) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Worst relative error between `analytic` and a central difference of
/// `loss` with respect to every entry of `param` (perturbed in place).
inline double max_fd_error(Matrix& param, const Matrix& analytic, const std::function<double()>& loss,
                           double h = 1e-4) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < param.rows(); ++i)
    for (Eigen::Index j = 0; j < param.cols(); ++j) {
      const double keep = param(i, j);
      param(i, j) = keep + h;
      const double up = loss();
      param(i, j) = keep - h;
      const double down = loss();
      param(i, j) = keep;
      worst = std::max(worst, rel_err(analytic(i, j), (up - down) / (2 * h)));
    }
  return worst;
}

inline double max_fd_error(Vector& param, const Vector& analytic, const std::function<double()>& loss,
                           double h = 1e-4) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    const double keep = param[i];
    param[i] = keep + h;
    const double up = loss();
    param[i] = keep - h;
    const double down = loss();
    param[i] = keep;
    worst = std::max(worst, rel_err(analytic[i], (up - down) / (2 * h)));
  }
  return worst;
}

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("dsom-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace dsom::test
