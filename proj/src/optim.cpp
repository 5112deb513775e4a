#include "beamlearn/optim.hpp"

#include <cmath>

#include "beamlearn/errors.hpp"

namespace beamlearn {

void sgd_step(Params& params, const SgdConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw DomainError("sgd: learning rate must be positive");
  for (auto& [name, e] : params.table()) {
    (void)name;
    if (!e.trainable || e.grad.empty()) continue;
    for (std::size_t i = 0; i < e.value.numel(); ++i) {
      e.value.at(i) -= cfg.lr * e.grad.at(i);
    }
  }
}

void adam_step(Params& params, const AdamConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw DomainError("adam: learning rate must be positive");
  params.step += 1;
  double t = static_cast<double>(params.step);
  double bc1 = 1.0 - std::pow(cfg.beta1, t);
  double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, e] : params.table()) {
    (void)name;
    if (!e.trainable || e.grad.empty()) continue;
    if (e.adam_m.empty()) {
      e.adam_m = CTensor{e.value.shape()};
      e.adam_v = CTensor{e.value.shape()};
    }
    for (std::size_t i = 0; i < e.value.numel(); ++i) {
      double gr = e.grad.at(i).real();
      double gi = e.grad.at(i).imag();
      double mr = cfg.beta1 * e.adam_m.at(i).real() + (1.0 - cfg.beta1) * gr;
      double mi = cfg.beta1 * e.adam_m.at(i).imag() + (1.0 - cfg.beta1) * gi;
      double vr = cfg.beta2 * e.adam_v.at(i).real() + (1.0 - cfg.beta2) * gr * gr;
      double vi = cfg.beta2 * e.adam_v.at(i).imag() + (1.0 - cfg.beta2) * gi * gi;
      e.adam_m.at(i) = {mr, mi};
      e.adam_v.at(i) = {vr, vi};
      double ur = (mr / bc1) / (std::sqrt(vr / bc2) + cfg.eps);
      double ui = (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
      e.value.at(i) -= cplx(cfg.lr * ur, cfg.lr * ui);
    }
  }
}

}  // namespace beamlearn
