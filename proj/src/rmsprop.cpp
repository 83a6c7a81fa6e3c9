#include "msggan/rmsprop.hpp"

#include <stdexcept>

namespace msggan {

RmsProp::RmsProp(std::vector<std::pair<std::string, torch::Tensor>> params, RmsPropOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& [name, p] : params_) {
    if (!moments_.emplace(name, torch::zeros_like(p)).second) {
      throw std::invalid_argument("duplicate parameter name " + name);
    }
  }
}

void RmsProp::zero_grad() {
  for (auto& [name, p] : params_) {
    if (p.grad().defined()) {
      p.mutable_grad().detach_();
      p.mutable_grad().zero_();
    }
  }
}

void RmsProp::step() {
  torch::NoGradGuard no_grad;
  for (auto& [name, p] : params_) {
    const auto& g = p.grad();
    if (!g.defined()) continue;
    auto& v = moments_.at(name);
    v.mul_(options_.alpha).addcmul_(g, g, 1.0 - options_.alpha);
    p.addcdiv_(g, v.sqrt().add_(options_.eps), -options_.lr);
  }
}

void RmsProp::load_moments(const std::map<std::string, torch::Tensor>& moments) {
  if (moments.size() != moments_.size()) {
    throw std::invalid_argument("optimizer state has " + std::to_string(moments.size()) +
                                " moments, expected " + std::to_string(moments_.size()));
  }
  torch::NoGradGuard no_grad;
  for (auto& [name, v] : moments_) {
    auto it = moments.find(name);
    if (it == moments.end()) throw std::invalid_argument("optimizer state lacks moment " + name);
    if (!it->second.sizes().equals(v.sizes())) {
      throw std::invalid_argument("optimizer moment " + name + " has the wrong shape");
    }
    v.copy_(it->second);
  }
}

}  // namespace msggan
