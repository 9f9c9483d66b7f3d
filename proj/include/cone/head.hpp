#ifndef CONE_HEAD_HPP_
#define CONE_HEAD_HPP_

// Two-layer projection head with a hand-written backward pass, and the
// masked cosine contrastive loss with its analytic gradient.

#include "cone/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace cone {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// z = tanh(e W1 + b1) W2 + b2, with samples as rows.
template<typename Scalar>
struct ProjectionHead
{
  Matrix<Scalar> w1;  // d_e x d_h
  Vector<Scalar> b1;  // d_h
  Matrix<Scalar> w2;  // d_h x d_z
  Vector<Scalar> b2;  // d_z

  int input_dim() const { return static_cast<int>(w1.rows()); }
  int hidden_dim() const { return static_cast<int>(w1.cols()); }
  int output_dim() const { return static_cast<int>(w2.cols()); }

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  template<typename Rng>
  static ProjectionHead random(int d_e, int d_h, int d_z, Rng & rng)
  {
    ProjectionHead h;
    auto fill = [&rng](auto & m, int fan_in) {
      std::uniform_real_distribution<double> u(-1.0 / std::sqrt(double(fan_in)), 1.0 / std::sqrt(double(fan_in)));
      for (Eigen::Index i = 0; i < m.size(); ++i) { m.data()[i] = static_cast<Scalar>(u(rng)); }
    };
    h.w1.resize(d_e, d_h);
    h.b1.resize(d_h);
    h.w2.resize(d_h, d_z);
    h.b2.resize(d_z);
    fill(h.w1, d_e);
    fill(h.b1, d_e);
    fill(h.w2, d_h);
    fill(h.b2, d_h);
    return h;
  }

  static ProjectionHead zeros(int d_e, int d_h, int d_z)
  {
    return ProjectionHead{Matrix<Scalar>::Zero(d_e, d_h), Vector<Scalar>::Zero(d_h), Matrix<Scalar>::Zero(d_h, d_z),
                          Vector<Scalar>::Zero(d_z)};
  }

  bool all_finite() const { return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite(); }

  std::size_t parameter_count() const
  {
    return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
  }

  /// Flat parameter access in (w1, b1, w2, b2) order.
  Scalar & parameter(std::size_t i)
  {
    const std::size_t s1 = std::size_t(w1.size()), s2 = s1 + std::size_t(b1.size()), s3 = s2 + std::size_t(w2.size());
    if (i < s1) return w1.data()[i];
    if (i < s2) return b1.data()[i - s1];
    if (i < s3) return w2.data()[i - s2];
    return b2.data()[i - s3];
  }

  ProjectionHead & operator-=(const ProjectionHead & g)
  {
    w1 -= g.w1;
    b1 -= g.b1;
    w2 -= g.w2;
    b2 -= g.b2;
    return *this;
  }

  ProjectionHead & operator*=(Scalar s)
  {
    w1 *= s;
    b1 *= s;
    w2 *= s;
    b2 *= s;
    return *this;
  }

  bool operator==(const ProjectionHead &) const = default;
};

template<typename Scalar>
struct ForwardCache
{
  Matrix<Scalar> hidden;  // tanh activations, B x d_h
  Matrix<Scalar> output;  // B x d_z
};

template<typename Scalar>
ForwardCache<Scalar> forward_batch(const ProjectionHead<Scalar> & head, const Matrix<Scalar> & inputs)
{
  if (inputs.cols() != head.w1.rows()) {
    throw Error("forward: input dimension " + std::to_string(inputs.cols()) + " does not match head input " +
                std::to_string(head.w1.rows()));
  }
  ForwardCache<Scalar> c;
  c.hidden = ((inputs * head.w1).rowwise() + head.b1.transpose()).array().tanh().matrix();
  c.output = (c.hidden * head.w2).rowwise() + head.b2.transpose();
  return c;
}

template<typename Scalar>
Vector<Scalar> forward(const ProjectionHead<Scalar> & head, const Vector<Scalar> & e)
{
  if (e.size() != head.w1.rows()) {
    throw Error("forward: input dimension " + std::to_string(e.size()) + " does not match head input " +
                std::to_string(head.w1.rows()));
  }
  const Vector<Scalar> h = (head.w1.transpose() * e + head.b1).array().tanh().matrix();
  return head.w2.transpose() * h + head.b2;
}

/// Parameter gradient given dL/dz for each input row.
template<typename Scalar>
ProjectionHead<Scalar> backward(const ProjectionHead<Scalar> & head, const Matrix<Scalar> & inputs,
                                const ForwardCache<Scalar> & cache, const Matrix<Scalar> & grad_output)
{
  ProjectionHead<Scalar> g;
  g.w2 = cache.hidden.transpose() * grad_output;
  g.b2 = grad_output.colwise().sum().transpose();
  const Matrix<Scalar> grad_pre =
    ((grad_output * head.w2.transpose()).array() * (Scalar(1) - cache.hidden.array().square())).matrix();
  g.w1 = inputs.transpose() * grad_pre;
  g.b1 = grad_pre.colwise().sum().transpose();
  return g;
}

template<typename Scalar>
struct ContrastiveLoss
{
  Scalar loss{0};              // mean over contributing rows
  Matrix<Scalar> gradient;     // dloss/dlatents, same shape as latents
  int contributing{0};
  std::vector<int> skipped;    // rows with no valid negative
};

/// Masked cosine contrastive loss over the rows of `latents`.
///
/// Row i contributes -log( exp(s_ip/t) / sum_k mask(i,k) exp(s_ik/t) ) where
/// p = positive[i]. With include_positive the positive term is added to the
/// denominator as well. Rows with no valid negative are skipped.
template<typename Scalar>
ContrastiveLoss<Scalar> contrastive_loss(const Matrix<Scalar> & latents, std::span<const int> positive,
                                         const BoolMatrix & mask, Scalar temperature, bool include_positive = false)
{
  const auto rows = latents.rows();
  if (static_cast<Eigen::Index>(positive.size()) != rows || mask.rows() != rows || mask.cols() != rows) {
    throw Error("contrastive_loss: latents, positive map and mask disagree in size");
  }
  if (!(temperature > Scalar(0))) { throw Error("contrastive_loss: temperature must be positive"); }

  Vector<Scalar> norms = latents.rowwise().norm();
  norms = norms.cwiseMax(Scalar(1e-12));
  const Matrix<Scalar> unit = norms.cwiseInverse().asDiagonal() * latents;
  const Matrix<Scalar> sim = unit * unit.transpose();

  ContrastiveLoss<Scalar> out;
  Matrix<Scalar> dsim = Matrix<Scalar>::Zero(rows, rows);  // dloss/dsim, before averaging
  Scalar total{0};
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto p = static_cast<Eigen::Index>(positive[static_cast<std::size_t>(i)]);
    if (!mask.row(i).any()) {
      out.skipped.push_back(static_cast<int>(i));
      continue;
    }
    // log-sum-exp over the denominator terms
    Scalar top = include_positive ? sim(i, p) : -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index k = 0; k < rows; ++k) {
      if (mask(i, k)) { top = std::max(top, sim(i, k)); }
    }
    Scalar z{0};
    for (Eigen::Index k = 0; k < rows; ++k) {
      if (mask(i, k)) { z += std::exp((sim(i, k) - top) / temperature); }
    }
    if (include_positive) { z += std::exp((sim(i, p) - top) / temperature); }
    const Scalar log_denominator = top / temperature + std::log(z);
    total += log_denominator - sim(i, p) / temperature;

    dsim(i, p) -= Scalar(1) / temperature;
    for (Eigen::Index k = 0; k < rows; ++k) {
      if (mask(i, k)) { dsim(i, k) += std::exp((sim(i, k) - top) / temperature) / z / temperature; }
    }
    if (include_positive) { dsim(i, p) += std::exp((sim(i, p) - top) / temperature) / z / temperature; }
    ++out.contributing;
  }
  if (out.contributing == 0) {
    out.gradient = Matrix<Scalar>::Zero(rows, latents.cols());
    return out;
  }
  const Scalar scale = Scalar(1) / static_cast<Scalar>(out.contributing);
  out.loss = total * scale;
  dsim *= scale;
  // sim = U U^T, so dU = (dsim + dsim^T) U; then project through the row normalisation.
  const Matrix<Scalar> dunit = (dsim + dsim.transpose()) * unit;
  const Vector<Scalar> radial = (dunit.array() * unit.array()).rowwise().sum().matrix();
  out.gradient = norms.cwiseInverse().asDiagonal() * (dunit - radial.asDiagonal() * unit);
  return out;
}

}  // namespace cone

#endif  // CONE_HEAD_HPP_
