#pragma once

#include <functional>
#include <vector>

#include "mixpro/tape.hpp"

namespace mixpro {

// Builds a scalar loss on the tape from the given parameter leaves and returns
// its node id.
using TapeProgram = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

// Compares analytic gradients (one backward pass) against central finite
// differences for every coordinate of every parameter. Returns the largest
// relative error max |analytic - numeric| / max(1, |numeric|).
double finite_difference_check(const TapeProgram& fn, const std::vector<Tensor>& params,
                               double step = 1e-5);

}  // namespace mixpro
