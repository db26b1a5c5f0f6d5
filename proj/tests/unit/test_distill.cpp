#include <doctest.h>

#include "dsom/distill.hpp"
#include "helpers.hpp"

using namespace dsom;
using dsom::test::max_fd_error;
using dsom::test::random_vector;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// A distribution given directly by its probabilities (tau = 1, logits = log p).
ScaledDistribution from_probs(const Vector& p) { return temp_scale(p.array().log().matrix(), 1.0); }

// Straight transcription of the neighbor-decoupled loss, in plain probability space.
double literal_ndkd(const Vector& tea_logits, const Vector& stu_logits, double tau, const std::set<EntityId>& nb,
                    double alpha, double beta) {
  auto probs = [tau](const Vector& z) {
    Vector e = ((z.array() - z.maxCoeff()) / tau).exp();
    return Vector(e / e.sum());
  };
  const Vector pt = probs(tea_logits), ps = probs(stu_logits);
  double bt = 0, bs = 0, rest_t = 0, rest_s = 0;
  for (Eigen::Index e = 0; e < pt.size(); ++e) {
    if (nb.count(static_cast<EntityId>(e))) {
      bt += pt[e];
      bs += ps[e];
    } else {
      rest_t += pt[e];
      rest_s += ps[e];
    }
  }
  bt /= static_cast<double>(nb.size());
  bs /= static_cast<double>(nb.size());
  const double nekd = bt * std::log(bt / bs) + (1 - bt) * std::log((1 - bt) / (1 - bs));
  double nnkd = 0;
  for (Eigen::Index e = 0; e < pt.size(); ++e) {
    if (nb.count(static_cast<EntityId>(e))) continue;
    const double a = pt[e] / rest_t, b = ps[e] / rest_s;
    nnkd += a * std::log(a / b);
  }
  return alpha * nekd + beta * nnkd;
}

std::set<EntityId> random_subset(std::size_t n, std::size_t k, Rng& rng) {
  std::set<EntityId> s;
  while (s.size() < k) s.insert(static_cast<EntityId>(rng() % n));
  return s;
}

}  // namespace

TEST_CASE("temp_scale") {
  const ScaledDistribution d = temp_scale(vec({2, 0}), 2.0);
  const double e = std::exp(1.0);
  CHECK(d.probs[0] == doctest::Approx(e / (e + 1)).epsilon(1e-14));
  CHECK(d.probs[1] == doctest::Approx(1 / (e + 1)).epsilon(1e-14));
  CHECK(d.probs[0] == doctest::Approx(0.7311).epsilon(1e-4));

  Rng rng(1);
  const Vector z = random_vector(10, rng, 3.0);
  const ScaledDistribution hot = temp_scale(z, 1e6);
  for (Eigen::Index i = 0; i < 10; ++i) CHECK(std::abs(hot.probs[i] - 0.1) < 1e-5);
  CHECK((temp_scale(z, 1.0).probs - softmax(z)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS(temp_scale(z, 0.0));
}

TEST_CASE("entropy is non-decreasing in the temperature") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector z = random_vector(12, rng, 4.0);
    double prev = -1.0;
    for (double tau : {0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 100.0}) {
      const double h = entropy(temp_scale(z, tau).probs);
      CHECK(h >= prev - 1e-12);
      prev = h;
    }
  }
}

TEST_CASE("vanilla KD") {
  CHECK(vanilla_kd(from_probs(vec({0.7, 0.3})), from_probs(vec({0.5, 0.5}))).loss ==
        doctest::Approx(0.7 * std::log(1.4) + 0.3 * std::log(0.6)).epsilon(1e-13));
  CHECK(vanilla_kd(from_probs(vec({0.7, 0.3})), from_probs(vec({0.5, 0.5}))).loss ==
        doctest::Approx(0.08228).epsilon(1e-4));
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const double tau = 0.5 + (rng() % 8);
    const auto t = temp_scale(random_vector(9, rng, 3.0), tau);
    const auto s = temp_scale(random_vector(9, rng, 3.0), tau);
    CHECK(vanilla_kd(t, s).loss >= 0.0);
    CHECK(std::abs(vanilla_kd(t, t).loss) < 1e-12);
  }
}

TEST_CASE("vanilla KD gradient matches central differences") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const double tau = 1.0 + trial % 4;
    const auto tea = temp_scale(random_vector(8, rng, 2.0), tau);
    Vector z = random_vector(8, rng, 2.0);
    const Vector g = vanilla_kd(tea, temp_scale(z, tau)).grad;
    CHECK(max_fd_error(z, g, [&] { return vanilla_kd(tea, temp_scale(z, tau)).loss; }) < 1e-4);
  }
}

TEST_CASE("decouple") {
  const DecoupledView v = decouple(from_probs(vec({0.5, 0.3, 0.1, 0.1})), {0, 1});
  CHECK(v.neighbor_binary[0] == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(v.neighbor_binary[1] == doctest::Approx(0.6).epsilon(1e-14));
  REQUIRE(v.non_neighbor.size() == 2);
  CHECK(v.non_neighbor[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(v.non_neighbor[1] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(v.non_neighbors == std::vector<EntityId>{2, 3});

  const DecoupledView u = decouple(from_probs(vec({0.25, 0.25, 0.25, 0.25})), {1, 3});
  CHECK(u.neighbor_binary[0] == doctest::Approx(0.25));
  CHECK(u.neighbor_binary[1] == doctest::Approx(0.75));
  CHECK(u.non_neighbor[0] == doctest::Approx(0.5));

  const auto d = from_probs(vec({0.6, 0.2, 0.15, 0.05}));
  const DecoupledView one = decouple(d, {2});
  CHECK(one.neighbor_binary[0] == doctest::Approx(0.15));
  CHECK(one.neighbor_binary[1] == doctest::Approx(0.85));

  CHECK_THROWS_AS(decouple(d, {}), std::invalid_argument);
  CHECK_THROWS_AS(decouple(d, {7}), std::invalid_argument);
  CHECK_THROWS_AS(decouple(d, {0, 1, 2, 3}), DegenerateInput);
}

TEST_CASE("decoupling conserves mass") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng() % 15;
    const auto d = temp_scale(random_vector(static_cast<Eigen::Index>(n), rng, 3.0), 1.0 + trial % 3);
    const auto nb = random_subset(n, 1 + rng() % (n - 1), rng);
    const DecoupledView v = decouple(d, nb);
    const double neighbor_mass = v.neighbor_binary[0] * static_cast<double>(nb.size());
    CHECK(std::abs(neighbor_mass + v.non_neighbor_mass - 1.0) < 1e-9);
    CHECK(std::abs(v.non_neighbor.sum() - 1.0) < 1e-9);
    CHECK(std::abs(v.neighbor_binary[0] + v.neighbor_binary[1] - 1.0) < 1e-12);
  }
}

TEST_CASE("NDKD matches the literal formula and is zero iff equal") {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng() % 18;
    const double tau = 0.5 + (rng() % 6);
    const double alpha = (rng() % 5) * 0.5, beta = (rng() % 5) * 0.5;
    const Vector zt = random_vector(static_cast<Eigen::Index>(n), rng, 2.0);
    const Vector zs = random_vector(static_cast<Eigen::Index>(n), rng, 2.0);
    const auto nb = random_subset(n, 1 + rng() % (n - 1), rng);
    const auto t = decouple(temp_scale(zt, tau), nb);
    const auto s = decouple(temp_scale(zs, tau), nb);
    const NdkdResult r = ndkd_loss(t, s, alpha, beta);
    CHECK(std::abs(r.loss - literal_ndkd(zt, zs, tau, nb, alpha, beta)) < 1e-10);
    CHECK(r.loss == doctest::Approx(alpha * r.nekd + beta * r.nnkd).epsilon(1e-14));
    CHECK(r.nekd >= -1e-15);
    CHECK(r.nnkd >= -1e-15);
    const NdkdResult same = ndkd_loss(t, t, alpha, beta);
    CHECK(std::abs(same.loss) < 1e-12);
    CHECK(same.grad.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("NDKD gradient matches central differences") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 6 + rng() % 10;
    const double tau = 1.0 + trial % 4;
    const double alpha = 0.5 + trial % 3, beta = 1.0 + trial % 2;
    const auto nb = random_subset(n, 1 + rng() % 3, rng);
    const auto tea = decouple(temp_scale(random_vector(static_cast<Eigen::Index>(n), rng, 2.0), tau), nb);
    Vector z = random_vector(static_cast<Eigen::Index>(n), rng, 2.0);
    const Vector g = ndkd_loss(tea, decouple(temp_scale(z, tau), nb), alpha, beta).grad;
    CHECK(max_fd_error(z, g, [&] { return ndkd_loss(tea, decouple(temp_scale(z, tau), nb), alpha, beta).loss; }) <
          1e-4);
  }
}

TEST_CASE("single-neighbor NDKD reduces to DKD and to the binary KL") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 12;
    const double tau = 1.0 + trial % 5;
    const Vector zt = random_vector(static_cast<Eigen::Index>(n), rng, 2.0);
    const Vector zs = random_vector(static_cast<Eigen::Index>(n), rng, 2.0);
    const auto target = static_cast<EntityId>(rng() % n);
    const auto t = temp_scale(zt, tau), s = temp_scale(zs, tau);
    const NdkdResult nd = ndkd_loss(decouple(t, {target}), decouple(s, {target}), 1.0, 2.0);
    const NdkdResult dk = dkd_loss(t, s, target, 1.0, 2.0);
    CHECK(std::abs(nd.loss - dk.loss) < 1e-12);
    CHECK((nd.grad - dk.grad).cwiseAbs().maxCoeff() < 1e-12);

    const NdkdResult binary = ndkd_loss(decouple(t, {target}), decouple(s, {target}), 1.0, 0.0);
    const double a = t.probs[target], b = s.probs[target];
    CHECK(binary.loss == doctest::Approx(a * std::log(a / b) + (1 - a) * std::log((1 - a) / (1 - b))).epsilon(1e-9));
  }
}

TEST_CASE("DKD gradient matches central differences") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const double tau = 1.0 + trial % 3;
    const auto tea = temp_scale(random_vector(7, rng, 2.0), tau);
    Vector z = random_vector(7, rng, 2.0);
    const EntityId t = static_cast<EntityId>(trial % 7);
    const Vector g = dkd_loss(tea, temp_scale(z, tau), t, 1.5, 0.5).grad;
    CHECK(max_fd_error(z, g, [&] { return dkd_loss(tea, temp_scale(z, tau), t, 1.5, 0.5).loss; }) < 1e-4);
  }
}

TEST_CASE("zero weight drops a term") {
  Rng rng(10);
  const auto nb = std::set<EntityId>{1, 4};
  const auto t = decouple(temp_scale(random_vector(8, rng), 2.0), nb);
  const auto s = decouple(temp_scale(random_vector(8, rng), 2.0), nb);
  const NdkdResult ne = ndkd_loss(t, s, 1.0, 0.0);
  const NdkdResult nn = ndkd_loss(t, s, 0.0, 1.0);
  const NdkdResult both = ndkd_loss(t, s, 1.0, 1.0);
  CHECK(ne.loss == doctest::Approx(both.nekd));
  CHECK(nn.loss == doctest::Approx(both.nnkd));
  CHECK((ne.grad + nn.grad - both.grad).cwiseAbs().maxCoeff() < 1e-14);
}
