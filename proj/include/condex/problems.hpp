#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "condex/errors.hpp"
#include "condex/estimator.hpp"
#include "condex/oracle.hpp"
#include "condex/rng.hpp"

namespace condex {

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }
inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

/// X_t = r X_{t-1} + m + sqrt(s) W_t with W_t standard normal.
struct Ar1Model {
  double r = 0.0;
  double m = 0.0;
  double s = 1.0;  // innovation variance

  CondCdf cond_cdf() const {
    return [*this](double y, double x) { return norm_cdf((y - r * x - m) / std::sqrt(s)); };
  }
  CondPdf cond_pdf() const {
    return [*this](double y, double x) {
      return norm_pdf((y - r * x - m) / std::sqrt(s)) / std::sqrt(s);
    };
  }
};

struct StationaryInit {};  // draw X_0 from N(0, s / (1 - r^2))

inline Eigen::VectorXd simulate_ar1(const Ar1Model& model,
                                    const std::variant<double, StationaryInit>& x0, int n,
                                    Rng& rng) {
  Eigen::VectorXd traj(n + 1);
  if (std::holds_alternative<StationaryInit>(x0)) {
    if (std::fabs(model.r) >= 1.0) {
      throw NonStationary("stationary init needs |r| < 1, got r = " + std::to_string(model.r));
    }
    traj(0) = rng.normal() * std::sqrt(model.s) / std::sqrt(1.0 - model.r * model.r);
  } else {
    traj(0) = std::get<double>(x0);
  }
  for (int t = 1; t <= n; ++t) {
    traj(t) = model.r * traj(t - 1) + model.m + std::sqrt(model.s) * rng.normal();
  }
  return traj;
}

/// Piecewise-linear cost/reward shared by the stopping and RL examples:
/// 1 below -7, ramps down to 0.2 on [-7,-2), flat 0.2 on [-2,2], ramps up
/// to 0.8 on (2,6), flat 0.8 above 6.
inline double stopcost(double x) {
  if (x < -7.0) return 1.0;
  if (x < -2.0) return 1.0 - (x + 7.0) * 0.8 / 5.0;
  if (x <= 2.0) return 0.2;
  if (x < 6.0) return 0.2 + (x - 2.0) * 0.6 / 4.0;
  return 0.8;
}

inline double reward(double x) { return stopcost(x); }

// ---------------------------------------------------------------------------
// Markov optimal stopping
// ---------------------------------------------------------------------------

struct StoppingSpec {
  Ar1Model dynamics;
  std::function<double(double)> p_fn;  // stopping cost
  std::function<double(double)> q_fn;  // sampling cost
  double alpha = 1.0;

  static StoppingSpec paper_example() {
    return {{0.9, 0.0, 5.0}, stopcost, [](double) { return 0.1; }, 1.0};
  }
};

struct StoppingNumeric {
  Grid1D grid;
  Eigen::VectorXd u;
  Eigen::VectorXd p;
  Eigen::VectorXd q;
  std::vector<double> residuals;
  QuadMatrix f;
};

inline SystemFn stopping_operator(const StoppingSpec& spec) {
  return [&spec](double y, const std::vector<double>& u) {
    return std::min(spec.p_fn(y), spec.q_fn(y) + spec.alpha * u[0]);
  };
}

/// U_t = F min(P, Q + alpha U_{t-1}), U_0 = P, on a clamped CDF-stencil grid.
inline StoppingNumeric solve_stopping_numeric(const StoppingSpec& spec, const Grid1D& grid,
                                              int iters = 1000) {
  StoppingNumeric out;
  out.grid = grid;
  out.f = build_cdf_matrix(spec.dynamics.cond_cdf(), grid, grid, /*clamp=*/true);
  const int n = grid.size();
  out.p.resize(n);
  out.q.resize(n);
  for (int i = 0; i < n; ++i) {
    out.p(i) = spec.p_fn(grid.points(i));
    out.q(i) = spec.q_fn(grid.points(i));
  }
  FixedPointResult res = fixed_point_solve({out.f}, {stopping_operator(spec)}, {out.p}, iters);
  out.u = std::move(res.u[0]);
  out.residuals = std::move(res.residuals);
  return out;
}

/// Fitted value iteration on consecutive pairs (X_t, X_{t+1}) of one
/// trajectory: the target min(p(Y), q(Y) + alpha omega(u(Y))) is recomputed
/// from the current parameters every iteration.
inline TrainedEstimator solve_stopping_datadriven(const Eigen::VectorXd& trajectory,
                                                  const StoppingSpec& spec,
                                                  const LinkFamily& link, ShallowNet net0,
                                                  const TrainConfig& cfg) {
  const int n = static_cast<int>(trajectory.size()) - 1;
  if (n < 1) throw EmptyDataset("trajectory needs at least 2 states");

  Eigen::VectorXd xs = trajectory.head(n);
  Eigen::VectorXd ys = trajectory.tail(n);
  Eigen::VectorXd py(n), qy(n);
  double pmin = std::numeric_limits<double>::infinity();
  double pmax = -pmin;
  for (int i = 0; i < n; ++i) {
    py(i) = spec.p_fn(ys(i));
    qy(i) = spec.q_fn(ys(i));
    pmin = std::min(pmin, py(i));
    pmax = std::max(pmax, py(i));
  }
  const RangeInterval range = link.range();
  if (cfg.strict_range && (!(range.lower <= pmin) || !(range.upper >= pmax))) {
    throw RangeViolation("link range does not cover [min p, max p] = [" + std::to_string(pmin) +
                         ", " + std::to_string(pmax) + "]");
  }

  TrainedEstimator est{std::move(net0), link, cfg};
  PowerNormState state = PowerNormState::for_net(est.net);
  est.cost_history.reserve(cfg.iters);

  for (long t = 0; t < cfg.iters; ++t) {
    const Eigen::VectorXd ux = forward_batch(est.net, xs);
    const Eigen::VectorXd uy = forward_batch(est.net, ys);
    Eigen::VectorXd target(n), coeffs(n);
    double cost = 0.0;
    for (int i = 0; i < n; ++i) {
      target(i) = std::min(py(i), qy(i) + spec.alpha * link.omega(uy(i)));
      cost += link.phi(ux(i)) + target(i) * link.psi(ux(i));
      coeffs(i) = link.rho(ux(i)) * (target(i) - link.omega(ux(i)));
    }
    cost /= n;
    if (!std::isfinite(cost)) {
      throw NonFiniteCost("stopping cost non-finite at iteration " + std::to_string(t));
    }
    est.cost_history.push_back(cost);
    const GradientSet g = weighted_grad(est.net, xs, coeffs);
    detail::apply_step(est.net, g, state, cfg);
  }
  est.final_cost = est.cost_history.empty() ? 0.0 : est.cost_history.back();
  return est;
}

enum class StopDecision { Stop, Continue };

/// Optimal rule: stop iff p(x) <= q(x) + alpha U(x) (ties stop).
inline StopDecision stopping_rule(const StoppingSpec& spec, double u_at_x, double x) {
  return spec.p_fn(x) <= spec.q_fn(x) + spec.alpha * u_at_x ? StopDecision::Stop
                                                            : StopDecision::Continue;
}

// ---------------------------------------------------------------------------
// K-action reinforcement learning
// ---------------------------------------------------------------------------

struct RlSpec {
  std::vector<Ar1Model> actions;
  std::function<double(double)> reward_fn;
  double gamma = 0.8;

  int num_actions() const { return static_cast<int>(actions.size()); }

  static RlSpec paper_example() {
    return {{{0.8, 1.0, 1.0}, {0.8, -1.0, 1.0}}, reward, 0.8};
  }
};

struct ControlledTrajectory {
  Eigen::VectorXd states;       // n + 1 states
  std::vector<int> actions;     // n actions, 1-based indices

  /// Labeled transitions (S_t, S_{t+1}) with the action that produced them.
  PairedDataset transitions() const {
    const int n = static_cast<int>(actions.size());
    PairedDataset d;
    d.x = states.head(n);
    d.y = states.tail(n);
    d.labels = actions;
    return d;
  }
};

inline ControlledTrajectory simulate_controlled(const RlSpec& spec,
                                                const std::vector<int>& actions, double x0,
                                                Rng& rng) {
  ControlledTrajectory traj;
  traj.actions = actions;
  traj.states.resize(actions.size() + 1);
  traj.states(0) = x0;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    const int a = actions[t];
    if (a < 1 || a > spec.num_actions()) {
      throw BadActionIndex("action " + std::to_string(a) + " outside [1.." +
                           std::to_string(spec.num_actions()) + "]");
    }
    const Ar1Model& m = spec.actions[a - 1];
    traj.states(t + 1) = m.r * traj.states(t) + m.m + std::sqrt(m.s) * rng.normal();
  }
  return traj;
}

struct RlNumeric {
  Grid1D grid;
  std::vector<Eigen::VectorXd> u;  // one value vector per action
  std::vector<double> residuals;
  std::vector<QuadMatrix> f;
};

inline std::vector<SystemFn> rl_operators(const RlSpec& spec) {
  std::vector<SystemFn> ops;
  for (int j = 0; j < spec.num_actions(); ++j) {
    ops.push_back([&spec](double y, const std::vector<double>& u) {
      double best = u[0];
      for (double v : u) best = std::max(best, v);
      return spec.reward_fn(y) + spec.gamma * best;
    });
  }
  return ops;
}

/// U^j_t = F^j (R + gamma max_l U^l_{t-1}), U^j_0 = 0.
inline RlNumeric solve_rl_numeric(const RlSpec& spec, const Grid1D& grid, int iters = 1000) {
  RlNumeric out;
  out.grid = grid;
  std::vector<Eigen::VectorXd> u0;
  for (const Ar1Model& m : spec.actions) {
    out.f.push_back(build_cdf_matrix(m.cond_cdf(), grid, grid, /*clamp=*/true));
    u0.push_back(Eigen::VectorXd::Zero(grid.size()));
  }
  FixedPointResult res = fixed_point_solve(out.f, rl_operators(spec), u0, iters);
  out.u = std::move(res.u);
  out.residuals = std::move(res.residuals);
  return out;
}

struct RlDataDriven {
  std::vector<TrainedEstimator> estimators;  // one per action

  double predict(int action, double s) const { return estimators[action - 1].predict(s); }

  /// argmax over the per-action value estimates, ties to the smallest index.
  int optimal_action(double s) const {
    int best = 1;
    double best_v = estimators[0].predict(s);
    for (std::size_t j = 1; j < estimators.size(); ++j) {
      const double v = estimators[j].predict(s);
      if (v > best_v) {
        best_v = v;
        best = static_cast<int>(j) + 1;
      }
    }
    return best;
  }
};

/// K networks fitted in parallel: network j trains on label-j transitions
/// against the target R(S') + gamma max_l omega(u_l(S')), with all targets
/// evaluated at the previous iteration's parameters.
inline RlDataDriven solve_rl_datadriven(const PairedDataset& transitions, const RlSpec& spec,
                                        const std::vector<LinkFamily>& links,
                                        std::vector<ShallowNet> nets0,
                                        const std::vector<TrainConfig>& cfgs) {
  transitions.validate();
  const int k = spec.num_actions();
  if (static_cast<int>(links.size()) != k || static_cast<int>(nets0.size()) != k ||
      static_cast<int>(cfgs.size()) != k) {
    throw ShapeError("solve_rl_datadriven: need one link, net and config per action");
  }
  if (transitions.labels.empty()) throw MissingActionData("transitions carry no action labels");

  std::vector<PairedDataset> per_action;
  std::string missing;
  for (int j = 1; j <= k; ++j) {
    per_action.push_back(transitions.filter_label(j));
    if (per_action.back().size() == 0) missing += (missing.empty() ? "" : ",") + std::to_string(j);
  }
  if (!missing.empty()) {
    throw MissingActionData("no transitions for action(s) [" + missing + "]");
  }

  long iters = cfgs[0].iters;
  RlDataDriven out;
  std::vector<PowerNormState> states;
  std::vector<Eigen::VectorXd> rewards;
  for (int j = 0; j < k; ++j) {
    out.estimators.push_back(TrainedEstimator{std::move(nets0[j]), links[j], cfgs[j]});
    states.push_back(PowerNormState::for_net(out.estimators[j].net));
    const auto& d = per_action[j];
    Eigen::VectorXd r(d.size());
    for (int i = 0; i < d.size(); ++i) r(i) = spec.reward_fn(d.y(i, 0));
    rewards.push_back(std::move(r));
    out.estimators[j].cost_history.reserve(iters);
  }

  for (long t = 0; t < iters; ++t) {
    // All successor values at theta_{t-1}, before any network moves.
    std::vector<Eigen::VectorXd> targets(k);
    for (int j = 0; j < k; ++j) {
      const auto& d = per_action[j];
      Eigen::VectorXd best(d.size());
      for (int l = 0; l < k; ++l) {
        Eigen::VectorXd v = forward_batch(out.estimators[l].net, d.y);
        for (int i = 0; i < d.size(); ++i) {
          const double w = links[l].omega(v(i));
          if (l == 0 || w > best(i)) best(i) = w;
        }
      }
      targets[j] = rewards[j] + spec.gamma * best;
    }
    for (int j = 0; j < k; ++j) {
      const auto& d = per_action[j];
      auto& est = out.estimators[j];
      const Eigen::VectorXd u = forward_batch(est.net, d.x);
      Eigen::VectorXd coeffs(d.size());
      double cost = 0.0;
      for (int i = 0; i < d.size(); ++i) {
        cost += links[j].phi(u(i)) + targets[j](i) * links[j].psi(u(i));
        coeffs(i) = links[j].rho(u(i)) * (targets[j](i) - links[j].omega(u(i)));
      }
      cost /= d.size();
      if (!std::isfinite(cost)) {
        throw NonFiniteCost("rl cost non-finite at iteration " + std::to_string(t) +
                            " for action " + std::to_string(j + 1));
      }
      est.cost_history.push_back(cost);
      const GradientSet g = weighted_grad(est.net, d.x, coeffs);
      detail::apply_step(est.net, g, states[j], cfgs[j]);
    }
  }
  for (auto& est : out.estimators) {
    est.final_cost = est.cost_history.empty() ? 0.0 : est.cost_history.back();
  }
  return out;
}

}  // namespace condex
