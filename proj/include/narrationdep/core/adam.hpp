#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "narrationdep/core/params.hpp"

namespace narrationdep {

struct AdamMoments {
  Tensor first;
  Tensor second;
};

struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t t = 0;
  std::map<std::string, AdamMoments> moments;
};

/// One bias-corrected Adam update. Moments are created lazily on the first
/// step; afterwards the parameter keyset must stay fixed.
inline void adam_step(const ParamRefs& params, const ConstParamRefs& grads, AdamState& state) {
  require_matching_keys(params, grads, "adam_step");
  if (!state.moments.empty()) {
    if (state.moments.size() != params.size()) {
      throw ConfigError("adam_step: optimizer state tracks " +
                        std::to_string(state.moments.size()) + " parameters, got " +
                        std::to_string(params.size()));
    }
    for (const auto& p : params) {
      auto it = state.moments.find(p.name);
      if (it == state.moments.end()) {
        throw ConfigError("adam_step: no optimizer state for '" + p.name + "'");
      }
      if (it->second.first.shape() != p.tensor->shape()) {
        throw ConfigError("adam_step: moment shape mismatch for '" + p.name + "'");
      }
    }
  } else {
    for (const auto& p : params) {
      state.moments.emplace(p.name, AdamMoments{Tensor::zeros_like(*p.tensor),
                                                Tensor::zeros_like(*p.tensor)});
    }
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& mom = state.moments.at(params[k].name);
    auto p = params[k].tensor->data();
    auto g = grads[k].tensor->data();
    auto m = mom.first.data();
    auto v = mom.second.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      m[i] = static_cast<Real>(state.beta1 * m[i] + (1.0 - state.beta1) * gi);
      v[i] = static_cast<Real>(state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= static_cast<Real>(state.lr * mhat / (std::sqrt(vhat) + state.epsilon));
    }
  }
}

inline void adam_step(const ParamRefs& params, const ParamRefs& grads, AdamState& state) {
  adam_step(params, as_const(grads), state);
}

inline void adam_step(std::map<std::string, Tensor>& params, const Gradients& grads,
                      AdamState& state) {
  adam_step(refs_of(params), refs_of(grads), state);
}

}  // namespace narrationdep
