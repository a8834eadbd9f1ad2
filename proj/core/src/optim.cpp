#include "c2s/optim.hpp"

#include <cmath>

#include "c2s/errors.hpp"

namespace c2s {

AdamState AdamState::create(std::span<const NamedParameter> params, AdamOptions options) {
  AdamState state;
  state.options = options;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.tensor.numel(), 0.0f);
    state.second_moment.emplace_back(p.tensor.numel(), 0.0f);
  }
  return state;
}

void adam_step(std::span<NamedParameter> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw ConfigError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                      " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].tensor.has_grad()) throw NumericError("adam_step: parameter '" + params[i].name + "' has no gradient");
    if (state.first_moment[i].size() != params[i].tensor.numel()) {
      throw ShapeError("adam_step: moment shape mismatch for parameter '" + params[i].name + "'");
    }
  }
  const auto& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const float correction1 = static_cast<float>(1.0 - std::pow(static_cast<double>(o.beta1), t));
  const float correction2 = static_cast<float>(1.0 - std::pow(static_cast<double>(o.beta2), t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].tensor.mutable_data();
    auto g = params[i].tensor.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0f - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0f - o.beta2) * g[j] * g[j];
      const float m_hat = m[j] / correction1;
      const float v_hat = v[j] / correction2;
      w[j] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

void zero_grads(std::span<NamedParameter> params) {
  for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace c2s
