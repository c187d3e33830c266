#pragma once

#include <vector>

#include "advloss/model.hpp"

namespace advloss::detail {

struct ForwardTrace {
  std::vector<BatchMatrix> inputs;  // inputs[l] feeds layer l
  std::vector<BatchMatrix> pre;     // pre-activation of layer l
};

ForwardTrace trace_forward(const MlpModel& model, const BatchMatrix& x);
BatchMatrix backward_input(const DenseLayer& layer, const BatchMatrix& grad_out);
void relu_mask(BatchMatrix& grad, const BatchMatrix& pre);

}  // namespace advloss::detail
