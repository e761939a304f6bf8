#pragma once

#include <map>
#include <string>
#include <vector>

#include "narrationdep/core/error.hpp"
#include "narrationdep/core/tensor.hpp"

namespace narrationdep {

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

struct ConstParamRef {
  std::string name;
  const Tensor* tensor;
};

using ParamRefs = std::vector<ParamRef>;
using ConstParamRefs = std::vector<ConstParamRef>;

/// Gradients keyed by parameter name; shapes mirror the parameters.
using Gradients = std::map<std::string, Tensor>;

inline ParamRefs refs_of(std::map<std::string, Tensor>& m) {
  ParamRefs out;
  for (auto& [k, v] : m) out.push_back({k, &v});
  return out;
}

inline ConstParamRefs refs_of(const std::map<std::string, Tensor>& m) {
  ConstParamRefs out;
  for (const auto& [k, v] : m) out.push_back({k, &v});
  return out;
}

inline ConstParamRefs as_const(const ParamRefs& refs) {
  ConstParamRefs out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back({r.name, r.tensor});
  return out;
}

/// Throws ConfigError unless both lists name the same parameters in the same
/// order with identical shapes.
template <class A, class B>
void require_matching_keys(const A& params, const B& grads, const char* context) {
  if (params.size() != grads.size()) {
    throw ConfigError(std::string(context) + ": parameter count " + std::to_string(params.size()) +
                      " vs gradient count " + std::to_string(grads.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != grads[i].name) {
      throw ConfigError(std::string(context) + ": key mismatch '" + params[i].name + "' vs '" +
                        grads[i].name + "'");
    }
    if (params[i].tensor->shape() != grads[i].tensor->shape()) {
      throw ConfigError(std::string(context) + ": shape mismatch for '" + params[i].name +
                        "' " + shape_string(params[i].tensor->shape()) + " vs " +
                        shape_string(grads[i].tensor->shape()));
    }
  }
}

}  // namespace narrationdep
