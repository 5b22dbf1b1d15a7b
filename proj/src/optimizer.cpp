#include "sgt/optimizer.hpp"

namespace sgt::num {

void SgdMomentum::step(const std::map<std::string, Tensor*>& params,
                       const std::map<std::string, Tensor>& grads, double lr) {
  for (const auto& [name, tensor] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    Tensor& vel = velocity_.try_emplace(name, Tensor::zeros(tensor->shape())).first->second;
    const Tensor& g = git->second;
    for (std::size_t i = 0; i < tensor->size(); ++i) {
      vel[i] = momentum_ * vel[i] - lr * g[i];
      (*tensor)[i] += vel[i];
    }
  }
}

}  // namespace sgt::num
