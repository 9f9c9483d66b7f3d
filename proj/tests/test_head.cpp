#include "cone/head.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cone;

namespace {

Matrixd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64 & rng)
{
  std::normal_distribution<double> g(0.0, 1.0);
  Matrixd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) { m.data()[i] = g(rng); }
  return m;
}

// Pairs row i with row i + n, masks out same-"document" pairs (i, i + n).
struct Instance
{
  Matrixd latents;
  std::vector<int> positive;
  BoolMatrix mask;
};

Instance random_instance(int n, int d, std::mt19937_64 & rng)
{
  Instance in;
  in.latents = random_matrix(2 * n, d, rng);
  in.positive.resize(static_cast<std::size_t>(2 * n));
  std::bernoulli_distribution keep(0.7);
  in.mask = BoolMatrix::Constant(2 * n, 2 * n, false);
  for (int i = 0; i < n; ++i) {
    in.positive[static_cast<std::size_t>(i)] = i + n;
    in.positive[static_cast<std::size_t>(i + n)] = i;
  }
  for (int i = 0; i < 2 * n; ++i) {
    for (int k = i + 1; k < 2 * n; ++k) {
      const bool partners = (k == i + n);
      const bool v = !partners && keep(rng);
      in.mask(i, k) = v;
      in.mask(k, i) = v;
    }
  }
  return in;
}

double relative_error(double a, double b)
{
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

TEST_CASE("contrastive loss hand values")
{
  Matrixd z(3, 2);
  z << 1, 0,   // anchor
    1, 0,      // positive, sim 1
    0, 1;      // negative, sim 0
  std::vector<int> pos{1, 0, 0};
  BoolMatrix mask = BoolMatrix::Constant(3, 3, false);
  mask(0, 2) = true;
  // only row 0 has a negative; rows 1 and 2 are skipped
  auto l = contrastive_loss<double>(z, pos, mask, 1.0);
  CHECK(l.contributing == 1);
  CHECK(l.skipped.size() == 2);
  CHECK(l.loss == doctest::Approx(-1.0));

  auto half = contrastive_loss<double>(z, pos, mask, 0.5);
  CHECK(half.loss == doctest::Approx(-2.0));
}

TEST_CASE("contrastive loss gradient matches central differences")
{
  std::mt19937_64 rng(3);
  for (double tau : {0.1, 0.5, 1.0}) {
    auto in = random_instance(4, 5, rng);
    const auto l = contrastive_loss<double>(in.latents, in.positive, in.mask, tau);
    for (Eigen::Index i = 0; i < in.latents.size(); ++i) {
      Matrixd plus = in.latents, minus = in.latents;
      plus.data()[i] += 1e-5;
      minus.data()[i] -= 1e-5;
      const double fd = (contrastive_loss<double>(plus, in.positive, in.mask, tau).loss -
                         contrastive_loss<double>(minus, in.positive, in.mask, tau).loss) / 2e-5;
      CHECK(relative_error(l.gradient.data()[i], fd) < 1e-4);
    }
  }
}

TEST_CASE("head parameter gradients match central differences")
{
  std::mt19937_64 rng(11);
  for (double tau : {0.1, 0.5, 1.0}) {
    auto head = ProjectionHead<double>::random(6, 7, 4, rng);
    const Matrixd inputs = random_matrix(8, 6, rng);
    auto in = random_instance(4, 4, rng);
    auto total = [&](const ProjectionHead<double> & h) {
      return contrastive_loss<double>(forward_batch(h, inputs).output, in.positive, in.mask, tau).loss;
    };
    const auto cache = forward_batch(head, inputs);
    const auto l = contrastive_loss<double>(cache.output, in.positive, in.mask, tau);
    auto grad = backward(head, inputs, cache, l.gradient);
    for (std::size_t p = 0; p < head.parameter_count(); ++p) {
      auto plus = head, minus = head;
      plus.parameter(p) += 1e-5;
      minus.parameter(p) -= 1e-5;
      const double fd = (total(plus) - total(minus)) / 2e-5;
      CHECK(relative_error(grad.parameter(p), fd) < 1e-4);
    }
  }
}
