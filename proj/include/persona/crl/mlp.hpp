#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "persona/rng.hpp"

namespace persona::crl {

using Matrix = Eigen::MatrixXd;

double act(double x);             // tanh(x) + 0.1 x
double act_derivative(double x);

/// Fully connected network whose parameters live in an external flat
/// vector starting at `offset`. Per layer: W (out x in, column-major) then
/// b (out). Hidden layers use act(); the output layer is linear.
struct Mlp {
  std::vector<int> widths;  // input, hidden..., output
  std::size_t offset = 0;

  struct Cache {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each hidden layer
  };

  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] int in_dim() const { return widths.front(); }
  [[nodiscard]] int out_dim() const { return widths.back(); }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; the last
  /// layer is zeroed when `zero_last`.
  void init(double* params, Rng& rng, bool zero_last = false) const;

  /// Rows of `in` are samples. `cache` may be null when no backward pass follows.
  Matrix forward(const double* params, const Matrix& in, Cache* cache) const;

  /// Accumulates parameter gradients into `grad` and returns d(loss)/d(input).
  Matrix backward(const double* params, const Cache& cache, const Matrix& dout,
                  double* grad) const;
};

/// widths = {in, hidden x layers, out}.
std::vector<int> mlp_widths(int in, int hidden, int layers, int out);

}  // namespace persona::crl
