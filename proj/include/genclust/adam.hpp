#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "genclust/array.hpp"
#include "genclust/error.hpp"

namespace genclust {

// Adam optimizer state: first/second moment estimates per parameter array.
template <class T>
struct AdamState {
  std::uint64_t step_count = 0;
  std::vector<Array<T>> first_moment;
  std::vector<Array<T>> second_moment;

  static AdamState zeros_like(const std::vector<Array<T>>& params) {
    AdamState st;
    st.first_moment.reserve(params.size());
    st.second_moment.reserve(params.size());
    for (const Array<T>& p : params) {
      st.first_moment.push_back(Array<T>::zeros(p.rows(), p.cols()));
      st.second_moment.push_back(Array<T>::zeros(p.rows(), p.cols()));
    }
    return st;
  }
};

// One bias-corrected Adam update over a parameter list. Gradients must be
// finite and shape-aligned with their parameters.
template <class T>
void adam_step(std::vector<Array<T>*> params, const std::vector<Array<T>>& grads,
               AdamState<T>& state, T alpha, T beta1, T beta2, T eps = T(1e-8)) {
  if (!(alpha > T(0))) throw ValueError("adam_step: alpha must be > 0");
  if (!(beta1 >= T(0) && beta1 < T(1)) || !(beta2 >= T(0) && beta2 < T(1))) {
    throw ValueError("adam_step: betas must lie in [0, 1)");
  }
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: parameter/gradient/state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.first_moment[i])) {
      throw ShapeError("adam_step: shape mismatch at parameter " + std::to_string(i) +
                       ": param " + params[i]->shape_str() + ", grad " +
                       grads[i].shape_str());
    }
    if (!grads[i].all_finite()) {
      throw NumericError("adam_step: non-finite gradient for parameter " +
                         std::to_string(i));
    }
  }

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const T corr1 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta1), t));
  const T corr2 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta2), t));

  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i]->data.data();
    const T* g = grads[i].data.data();
    T* m = state.first_moment[i].data.data();
    T* v = state.second_moment[i].data.data();
    const std::size_t n = params[i]->size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = beta1 * m[j] + (T(1) - beta1) * g[j];
      v[j] = beta2 * v[j] + (T(1) - beta2) * g[j] * g[j];
      const T mhat = m[j] / corr1;
      const T vhat = v[j] / corr2;
      p[j] -= alpha * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace genclust
