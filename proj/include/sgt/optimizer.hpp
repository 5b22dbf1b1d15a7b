#pragma once

#include <map>
#include <string>

#include "sgt/tensor.hpp"

namespace sgt::num {

// Heavy-ball SGD keyed by parameter name: v ← m·v − lr·g, θ ← θ + v.
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum) : momentum_(momentum) {}

  void step(const std::map<std::string, Tensor*>& params,
            const std::map<std::string, Tensor>& grads, double lr);

 private:
  double momentum_;
  std::map<std::string, Tensor> velocity_;
};

}  // namespace sgt::num
