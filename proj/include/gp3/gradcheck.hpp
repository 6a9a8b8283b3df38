#pragma once

#include <cstdint>
#include <functional>

#include "gp3/tensor.hpp"

namespace gp3::ad {

// Scalar-valued function of one tensor. Must build a fresh graph per call
// (the input it receives is a new leaf each time).
using ScalarFn = std::function<Tensor(const Tensor&)>;

// Central-difference gradient check: returns
//   max_i |g_analytic[i] - g_numeric[i]| / max(1, |g_numeric[i]|).
// Throws when f evaluates non-finite, naming the coordinate.
double finite_diff_gradcheck(const ScalarFn& f, const Tensor& x, double eps);

// Same check restricted to a seeded random subset of coordinates; used for
// composite models where a full sweep would be wasteful.
double finite_diff_gradcheck_sampled(const ScalarFn& f, const Tensor& x, double eps,
                                     int max_coords, uint64_t seed);

}  // namespace gp3::ad
