#pragma once

#include <functional>
#include <span>
#include <vector>

#include "spike/tensor.hpp"

namespace spike {

// Central-difference gradient (f(p+h) - f(p-h)) / 2h for every coordinate of
// `point`. Used as the independent oracle for reverse-mode gradients.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::vector<double> point, double step);

// Same, perturbing the values of `param` in place; `f` re-evaluates the model.
// The parameter is restored bit-exactly before returning.
std::vector<double> finite_diff_grad(const std::function<double()>& f, Tensor& param, double step);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps near-zero
// entries from dominating.
double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-6);

}  // namespace spike
