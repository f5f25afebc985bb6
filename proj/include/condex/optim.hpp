#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "condex/errors.hpp"
#include "condex/net.hpp"

namespace condex {

struct PowerNormOptions {
  double mu = 0.001;      // step size
  double lambda = 0.99;   // forgetting factor for the power estimates
  double c = 0.001;       // denominator regularizer
};

/// Per-parameter running power estimates for the normalized gradient step.
/// Not full ADAM: no first moment, no bias correction. The first step
/// overwrites the powers with g^2 instead of applying the recursion.
struct PowerNormState {
  GradientSet powers;
  bool initialized = false;

  static PowerNormState for_net(const ShallowNet& net) {
    return {GradientSet::zeros_like(net), false};
  }
};

inline void power_norm_step(ShallowNet& net, const GradientSet& g, PowerNormState& state,
                            const PowerNormOptions& opt) {
  if (g.w_in.rows() != net.w_in.rows() || g.w_in.cols() != net.w_in.cols()) {
    throw ShapeError("power_norm_step: gradient/network shape mismatch");
  }
  auto update = [&](auto& p, const auto& gg) {
    if (state.initialized) {
      p = opt.lambda * p + (1.0 - opt.lambda) * gg.cwiseProduct(gg);
    } else {
      p = gg.cwiseProduct(gg);
    }
  };
  update(state.powers.w_in, g.w_in);
  update(state.powers.b_in, g.b_in);
  update(state.powers.w_out, g.w_out);
  if (state.initialized) {
    state.powers.b_out = opt.lambda * state.powers.b_out + (1.0 - opt.lambda) * g.b_out * g.b_out;
  } else {
    state.powers.b_out = g.b_out * g.b_out;
  }
  state.initialized = true;

  net.w_in -= opt.mu * g.w_in.cwiseQuotient((state.powers.w_in.array() + opt.c).sqrt().matrix());
  net.b_in -= opt.mu * g.b_in.cwiseQuotient((state.powers.b_in.array() + opt.c).sqrt().matrix());
  net.w_out -= opt.mu * g.w_out.cwiseQuotient((state.powers.w_out.array() + opt.c).sqrt().matrix());
  net.b_out -= opt.mu * g.b_out / std::sqrt(opt.c + state.powers.b_out);
}

/// Plain theta -= mu * g, used by the GD/SGD consistency checks.
inline void raw_step(ShallowNet& net, const GradientSet& g, double mu) {
  net.w_in -= mu * g.w_in;
  net.b_in -= mu * g.b_in;
  net.w_out -= mu * g.w_out;
  net.b_out -= mu * g.b_out;
}

enum class BatchMode { FullBatch, SingleSample, MiniBatch };

inline BatchMode parse_batch_mode(const std::string& s) {
  if (s == "full" || s == "full-batch" || s == "gd") return BatchMode::FullBatch;
  if (s == "single" || s == "single-sample" || s == "sgd") return BatchMode::SingleSample;
  if (s == "mini" || s == "mini-batch") return BatchMode::MiniBatch;
  throw ConfigError("unknown batch mode '" + s + "'");
}

/// Index set used at iteration t. Single-sample walks the dataset cyclically
/// (epoch reuse); mini-batch takes the t-th contiguous block of m modulo n.
inline std::vector<int> schedule(BatchMode mode, int n, int m, long t) {
  std::vector<int> idx;
  switch (mode) {
    case BatchMode::FullBatch:
      idx.resize(n);
      for (int i = 0; i < n; ++i) idx[i] = i;
      break;
    case BatchMode::SingleSample:
      idx.push_back(static_cast<int>(t % n));
      break;
    case BatchMode::MiniBatch:
      idx.reserve(m);
      for (int i = 0; i < m; ++i) idx.push_back(static_cast<int>((t * m + i) % n));
      break;
  }
  return idx;
}

}  // namespace condex
