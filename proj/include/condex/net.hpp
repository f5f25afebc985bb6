#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <string>

#include "condex/errors.hpp"
#include "condex/rng.hpp"

namespace condex {

struct GradientSet;

/// Single-hidden-layer ReLU network u(x) = b_out + w_out . relu(w_in x + b_in).
struct ShallowNet {
  Eigen::MatrixXd w_in;   // L x d
  Eigen::VectorXd b_in;   // L
  Eigen::VectorXd w_out;  // L
  double b_out = 0.0;

  int hidden() const { return static_cast<int>(w_in.rows()); }
  int input_dim() const { return static_cast<int>(w_in.cols()); }
};

/// One accumulator per parameter block, shapes matching the owning network.
struct GradientSet {
  Eigen::MatrixXd w_in;
  Eigen::VectorXd b_in;
  Eigen::VectorXd w_out;
  double b_out = 0.0;

  GradientSet& operator+=(const GradientSet& o) {
    w_in += o.w_in;
    b_in += o.b_in;
    w_out += o.w_out;
    b_out += o.b_out;
    return *this;
  }

  static GradientSet zeros_like(const ShallowNet& net) {
    GradientSet g;
    g.w_in = Eigen::MatrixXd::Zero(net.w_in.rows(), net.w_in.cols());
    g.b_in = Eigen::VectorXd::Zero(net.b_in.size());
    g.w_out = Eigen::VectorXd::Zero(net.w_out.size());
    g.b_out = 0.0;
    return g;
  }
};

/// Weights i.i.d. N(0, 1/L), biases zero.
inline ShallowNet init_net(int hidden, int input_dim, Rng& rng) {
  ShallowNet net;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  net.w_in.resize(hidden, input_dim);
  for (int l = 0; l < hidden; ++l) {
    for (int k = 0; k < input_dim; ++k) net.w_in(l, k) = rng.normal() * scale;
  }
  net.b_in = Eigen::VectorXd::Zero(hidden);
  net.w_out.resize(hidden);
  for (int l = 0; l < hidden; ++l) net.w_out(l) = rng.normal() * scale;
  net.b_out = 0.0;
  return net;
}

inline ShallowNet init_net(int hidden, int input_dim, std::uint64_t seed) {
  Rng rng(seed);
  return init_net(hidden, input_dim, rng);
}

inline double forward(const ShallowNet& net, const Eigen::VectorXd& x) {
  if (x.size() != net.input_dim()) {
    throw ShapeError("forward: input has dim " + std::to_string(x.size()) +
                     ", network expects " + std::to_string(net.input_dim()));
  }
  const Eigen::VectorXd z = net.w_in * x + net.b_in;
  return net.b_out + net.w_out.dot(z.cwiseMax(0.0));
}

inline double forward(const ShallowNet& net, double x) {
  Eigen::VectorXd v(1);
  v(0) = x;
  return forward(net, v);
}

/// u(x_i) for every row of xs (n x d).
inline Eigen::VectorXd forward_batch(const ShallowNet& net, const Eigen::MatrixXd& xs) {
  if (xs.cols() != net.input_dim()) {
    throw ShapeError("forward_batch: inputs have dim " + std::to_string(xs.cols()) +
                     ", network expects " + std::to_string(net.input_dim()));
  }
  // Z is L x n; ReLU then collapse through the output layer.
  Eigen::MatrixXd z = (net.w_in * xs.transpose()).colwise() + net.b_in;
  z = z.cwiseMax(0.0);
  return (z.transpose() * net.w_out).array() + net.b_out;
}

/// Sum_i coeff_i * grad_theta u(x_i), accumulated in input order.
/// ReLU subgradient at exactly 0 is 0.
inline GradientSet weighted_grad(const ShallowNet& net, const Eigen::MatrixXd& xs,
                                 const Eigen::VectorXd& coeffs) {
  if (xs.rows() != coeffs.size()) {
    throw ShapeError("weighted_grad: " + std::to_string(xs.rows()) + " inputs vs " +
                     std::to_string(coeffs.size()) + " coefficients");
  }
  if (xs.cols() != net.input_dim()) {
    throw ShapeError("weighted_grad: inputs have dim " + std::to_string(xs.cols()) +
                     ", network expects " + std::to_string(net.input_dim()));
  }
  const Eigen::MatrixXd z = (net.w_in * xs.transpose()).colwise() + net.b_in;  // L x n
  const Eigen::MatrixXd h = z.cwiseMax(0.0);
  const Eigen::MatrixXd active = (z.array() > 0.0).cast<double>();

  GradientSet g;
  g.w_out = h * coeffs;
  g.b_out = coeffs.sum();
  const Eigen::VectorXd sc = active * coeffs;  // L
  g.b_in = net.w_out.cwiseProduct(sc);
  const Eigen::MatrixXd weighted = active.array().rowwise() * coeffs.transpose().array();
  g.w_in = (weighted * xs).array().colwise() * net.w_out.array();
  return g;
}

/// Checkpoint format: 4 header lines (L, d, seed, family id) then one
/// parameter per line in the order w_in (row-major), b_in, w_out, b_out.
inline void save_checkpoint(const ShallowNet& net, std::uint64_t seed,
                            const std::string& family_id, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open checkpoint file " + path);
  out.precision(17);
  out << net.hidden() << "\n" << net.input_dim() << "\n" << seed << "\n" << family_id << "\n";
  for (int l = 0; l < net.hidden(); ++l) {
    for (int k = 0; k < net.input_dim(); ++k) out << net.w_in(l, k) << "\n";
  }
  for (int l = 0; l < net.hidden(); ++l) out << net.b_in(l) << "\n";
  for (int l = 0; l < net.hidden(); ++l) out << net.w_out(l) << "\n";
  out << net.b_out << "\n";
}

struct Checkpoint {
  ShallowNet net;
  std::uint64_t seed = 0;
  std::string family_id;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint file " + path);
  Checkpoint ck;
  int hidden = 0, dim = 0;
  in >> hidden >> dim >> ck.seed >> ck.family_id;
  if (!in || hidden < 1 || dim < 1) throw ConfigError("bad checkpoint header in " + path);
  ck.net.w_in.resize(hidden, dim);
  ck.net.b_in.resize(hidden);
  ck.net.w_out.resize(hidden);
  for (int l = 0; l < hidden; ++l) {
    for (int k = 0; k < dim; ++k) in >> ck.net.w_in(l, k);
  }
  for (int l = 0; l < hidden; ++l) in >> ck.net.b_in(l);
  for (int l = 0; l < hidden; ++l) in >> ck.net.w_out(l);
  in >> ck.net.b_out;
  if (!in) throw ConfigError("truncated checkpoint " + path);
  return ck;
}

}  // namespace condex
