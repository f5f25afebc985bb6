#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "condex/dataset.hpp"
#include "condex/errors.hpp"
#include "condex/links.hpp"
#include "condex/net.hpp"
#include "condex/optim.hpp"
#include "condex/rng.hpp"

namespace condex {

struct TrainConfig {
  long iters = 2000;
  PowerNormOptions opt;
  BatchMode mode = BatchMode::FullBatch;
  int batch_size = 1;          // mini-batch size m
  bool use_power_norm = true;  // false: plain theta -= mu * g
  bool strict_range = true;    // reject d(Y) values outside the link range
  bool shuffle = false;        // SGD epoch shuffling
  std::uint64_t shuffle_seed = 1;
};

using ScalarFn = std::function<double(const Eigen::RowVectorXd&)>;

inline ScalarFn scalar_identity() {
  return [](const Eigen::RowVectorXd& y) { return y(0); };
}

/// Trained network plus the link that maps its raw output into the target
/// range. predict() always lands in the closure of link.range().
struct TrainedEstimator {
  ShallowNet net;
  LinkFamily link;
  TrainConfig config;
  double final_cost = 0.0;
  std::vector<double> cost_history;

  double predict_raw(const Eigen::VectorXd& x) const { return forward(net, x); }
  double predict_raw(double x) const { return forward(net, x); }
  double predict(const Eigen::VectorXd& x) const { return link.omega(forward(net, x)); }
  double predict(double x) const { return link.omega(forward(net, x)); }

  Eigen::VectorXd predict_batch(const Eigen::MatrixXd& xs) const {
    Eigen::VectorXd u = forward_batch(net, xs);
    for (int i = 0; i < u.size(); ++i) u(i) = link.omega(u(i));
    return u;
  }
};

namespace detail {

inline void apply_step(ShallowNet& net, const GradientSet& g, PowerNormState& state,
                       const TrainConfig& cfg) {
  if (cfg.use_power_norm) {
    power_norm_step(net, g, state, cfg.opt);
  } else {
    raw_step(net, g, cfg.opt.mu);
  }
}

inline Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<int>& idx) {
  Eigen::MatrixXd out(idx.size(), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(k) = m.row(idx[k]);
  return out;
}

}  // namespace detail

/// Fits omega(u(X)) to the target values d(Y_i), optionally weighted by
/// c(Y_i) (so the limit is E[d(Y)|X] / E[c(Y)|X]). Cost per iteration is
/// (1/n) sum_i [c_i phi(u_i) + d_i psi(u_i)], recorded before each update.
inline TrainedEstimator train_cond_expectation(const PairedDataset& data, const ScalarFn& d_fn,
                                               const std::optional<ScalarFn>& c_fn,
                                               const LinkFamily& link, ShallowNet net0,
                                               const TrainConfig& cfg) {
  data.validate();
  const int n = data.size();
  Eigen::VectorXd dvals(n), cvals(n);
  for (int i = 0; i < n; ++i) {
    dvals(i) = d_fn(data.y.row(i));
    cvals(i) = c_fn ? (*c_fn)(data.y.row(i)) : 1.0;
    if (c_fn && !(cvals(i) > 0.0)) {
      throw RangeViolation("c(Y) must be positive; c(Y_" + std::to_string(i) +
                           ") = " + std::to_string(cvals(i)));
    }
  }
  if (!c_fn) {
    const RangeInterval range = link.range();
    std::string offenders;
    int bad = 0;
    for (int i = 0; i < n; ++i) {
      if (!range.contains(dvals(i))) {
        if (bad < 10) offenders += (bad ? "," : "") + std::to_string(i);
        ++bad;
      }
    }
    if (bad > 0 && cfg.strict_range) {
      throw RangeViolation(std::to_string(bad) + " d(Y) values outside range of " + link.name() +
                           " at indices [" + offenders + (bad > 10 ? ",..." : "") + "]");
    }
  }

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng shuffle_rng(cfg.shuffle_seed);

  TrainedEstimator est{std::move(net0), link, cfg};
  PowerNormState state = PowerNormState::for_net(est.net);
  est.cost_history.reserve(cfg.iters);

  for (long t = 0; t < cfg.iters; ++t) {
    const Eigen::VectorXd u = forward_batch(est.net, data.x);
    double cost = 0.0;
    for (int i = 0; i < n; ++i) cost += cvals(i) * link.phi(u(i)) + dvals(i) * link.psi(u(i));
    cost /= n;
    if (!std::isfinite(cost)) {
      throw NonFiniteCost("training cost non-finite at iteration " + std::to_string(t));
    }
    est.cost_history.push_back(cost);

    if (cfg.shuffle && cfg.mode != BatchMode::FullBatch && t % n == 0) {
      shuffle_rng.shuffle(order);
    }
    std::vector<int> idx = schedule(cfg.mode, n, cfg.batch_size, t);
    for (int& i : idx) i = order[i];

    Eigen::VectorXd coeffs(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const int i = idx[k];
      coeffs(k) = link.rho(u(i)) * (dvals(i) - cvals(i) * link.omega(u(i)));
    }
    const GradientSet g = weighted_grad(est.net, detail::select_rows(data.x, idx), coeffs);
    detail::apply_step(est.net, g, state, cfg);
  }
  est.final_cost = est.cost_history.empty() ? 0.0 : est.cost_history.back();
  return est;
}

enum class LrMode { Gd, LabeledSgd, PairedSgd };

inline LrMode parse_lr_mode(const std::string& s) {
  if (s == "gd") return LrMode::Gd;
  if (s == "labeled-sgd") return LrMode::LabeledSgd;
  if (s == "paired-sgd") return LrMode::PairedSgd;
  throw ConfigError("unknown likelihood-ratio mode '" + s + "'");
}

/// Estimates the density ratio f/g from one dataset per density. With the B1
/// link at a = 0 the raw network output estimates log(f/g).
inline TrainedEstimator train_likelihood_ratio(const Eigen::MatrixXd& data_g,
                                               const Eigen::MatrixXd& data_f,
                                               const LinkFamily& link, ShallowNet net0,
                                               const TrainConfig& cfg, LrMode mode = LrMode::Gd,
                                               const Eigen::VectorXd& g_weights = {}) {
  const int ng = static_cast<int>(data_g.rows());
  const int nf = static_cast<int>(data_f.rows());
  if (ng == 0) throw EmptyDataset("g dataset is empty");
  if (nf == 0) throw EmptyDataset("f dataset is empty");
  if (mode == LrMode::PairedSgd && ng != nf) {
    throw SizeMismatch("paired-sgd needs equal dataset sizes, got " + std::to_string(ng) +
                       " vs " + std::to_string(nf));
  }
  const bool weighted = g_weights.size() > 0;
  if (weighted && g_weights.size() != ng) {
    throw SizeMismatch("g-side weight count does not match dataset size");
  }

  // Mixed labeled stream for the labeled-sgd mode: (side, index) pairs.
  std::vector<std::pair<int, int>> stream;
  if (mode == LrMode::LabeledSgd) {
    stream.reserve(ng + nf);
    for (int i = 0; i < ng; ++i) stream.emplace_back(0, i);
    for (int j = 0; j < nf; ++j) stream.emplace_back(1, j);
    Rng rng(cfg.shuffle_seed);
    rng.shuffle(stream);
  }

  TrainedEstimator est{std::move(net0), link, cfg};
  PowerNormState state = PowerNormState::for_net(est.net);
  est.cost_history.reserve(cfg.iters);

  for (long t = 0; t < cfg.iters; ++t) {
    const Eigen::VectorXd ug = forward_batch(est.net, data_g);
    const Eigen::VectorXd uf = forward_batch(est.net, data_f);
    double cost = 0.0;
    for (int i = 0; i < ng; ++i) cost += (weighted ? g_weights(i) : 1.0) * link.phi(ug(i)) / ng;
    for (int j = 0; j < nf; ++j) cost += link.psi(uf(j)) / nf;
    if (!std::isfinite(cost)) {
      throw NonFiniteCost("likelihood-ratio cost non-finite at iteration " + std::to_string(t));
    }
    est.cost_history.push_back(cost);

    GradientSet g = GradientSet::zeros_like(est.net);
    auto g_coeff = [&](int i) {
      return -(weighted ? g_weights(i) : 1.0) * link.omega(ug(i)) * link.rho(ug(i));
    };
    auto f_coeff = [&](int j) { return link.rho(uf(j)); };
    switch (mode) {
      case LrMode::Gd: {
        Eigen::VectorXd cg(ng), cf(nf);
        for (int i = 0; i < ng; ++i) cg(i) = g_coeff(i) / ng;
        for (int j = 0; j < nf; ++j) cf(j) = f_coeff(j) / nf;
        g = weighted_grad(est.net, data_g, cg);
        g += weighted_grad(est.net, data_f, cf);
        break;
      }
      case LrMode::LabeledSgd: {
        const auto [side, i] = stream[t % stream.size()];
        Eigen::VectorXd c(1);
        if (side == 0) {
          c(0) = g_coeff(i) / ng;
          g = weighted_grad(est.net, data_g.row(i), c);
        } else {
          c(0) = f_coeff(i) / nf;
          g = weighted_grad(est.net, data_f.row(i), c);
        }
        break;
      }
      case LrMode::PairedSgd: {
        const int i = static_cast<int>(t % ng);
        Eigen::VectorXd cg(1), cf(1);
        cg(0) = g_coeff(i);
        cf(0) = f_coeff(i);
        g = weighted_grad(est.net, data_g.row(i), cg);
        g += weighted_grad(est.net, data_f.row(i), cf);
        break;
      }
    }
    detail::apply_step(est.net, g, state, cfg);
  }
  est.final_cost = est.cost_history.empty() ? 0.0 : est.cost_history.back();
  return est;
}

struct CondRatioResult {
  TrainedEstimator marginal;  // L(X) = f(X)/g(X), trained on the X columns
  TrainedEstimator joint;     // omega(u(Y,X)) ~ f(Y|X)/g(Y|X), input (y, x)
  int nonfinite_weights = 0;  // stage-1 weights replaced by zero
};

/// Two-stage conditional-density-ratio estimation: stage 1 learns the
/// marginal ratio L(X); stage 2 reuses it as the weight on the g-side phi
/// term so the joint fit converges to the conditional ratio.
inline CondRatioResult train_cond_density_ratio(const PairedDataset& data_g,
                                                const PairedDataset& data_f,
                                                const LinkFamily& link_marginal,
                                                const LinkFamily& link_joint,
                                                ShallowNet marginal_net0, ShallowNet joint_net0,
                                                const TrainConfig& cfg_marginal,
                                                const TrainConfig& cfg_joint) {
  data_g.validate();
  data_f.validate();
  CondRatioResult res{
      train_likelihood_ratio(data_g.x, data_f.x, link_marginal, std::move(marginal_net0),
                             cfg_marginal),
      TrainedEstimator{ShallowNet{}, link_joint, cfg_joint}};

  Eigen::VectorXd weights(data_g.size());
  for (int i = 0; i < data_g.size(); ++i) {
    double w = res.marginal.predict(Eigen::VectorXd(data_g.x.row(i).transpose()));
    if (!std::isfinite(w)) {
      w = 0.0;
      ++res.nonfinite_weights;
    }
    weights(i) = w;
  }

  auto joint_input = [](const PairedDataset& d) {
    Eigen::MatrixXd z(d.size(), d.y.cols() + d.x.cols());
    z << d.y, d.x;
    return z;
  };
  res.joint = train_likelihood_ratio(joint_input(data_g), joint_input(data_f), link_joint,
                                     std::move(joint_net0), cfg_joint, LrMode::Gd, weights);
  return res;
}

}  // namespace condex
