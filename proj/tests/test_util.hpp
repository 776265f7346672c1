#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "inttower/autograd.hpp"
#include "inttower/rng.hpp"
#include "inttower/tensor.hpp"

namespace testutil {

using inttower::Graph;
using inttower::Tensor;
using inttower::Var;

inline Tensor random_tensor(inttower::Rng& rng, inttower::Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

using ScalarFn = std::function<Var(Graph&, const std::vector<Var>&)>;

// Largest relative error between backward() and central differences over
// every element of every input.
inline double fd_max_rel_error(const ScalarFn& f, std::vector<Tensor> inputs, double step = 1e-5) {
  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(g.input(t));
    Var loss = f(g, vars);
    g.backward(loss);
    for (Var v : vars) {
      const Tensor& gr = g.grad(v);
      analytic.push_back(gr.empty() ? Tensor(v.value().shape()) : gr);
    }
  }
  auto eval = [&](const std::vector<Tensor>& in) {
    Graph g(false);
    std::vector<Var> vars;
    for (const auto& t : in) vars.push_back(g.constant(t));
    return f(g, vars).value().item();
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k][i];
      inputs[k][i] = orig + step;
      const double up = eval(inputs);
      inputs[k][i] = orig - step;
      const double down = eval(inputs);
      inputs[k][i] = orig;
      worst = std::max(worst, rel_err(analytic[k][i], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("inttower_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
