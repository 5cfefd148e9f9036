#pragma once

#include <functional>
#include <span>
#include <vector>

namespace sagelink {

/// Central-difference gradient of f at point, one coordinate at a time:
/// (f(p + h e_i) - f(p - h e_i)) / (2 h). Test oracle for analytic
/// backward passes; O(n) evaluations of f.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> point, double h) {
  std::vector<double> scratch(point.begin(), point.end());
  std::vector<double> grad(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = scratch[i];
    scratch[i] = saved + h;
    const double up = f(scratch);
    scratch[i] = saved - h;
    const double down = f(scratch);
    scratch[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace sagelink
