#include "edgedis/adam.hpp"

#include <cmath>

#include "edgedis/error.hpp"

namespace edgedis {

void Adam::step(const std::vector<NamedParam>& params, const AdamConfig& cfg) {
  double sq_norm = 0.0;
  for (const NamedParam& p : params) {
    Tape& tape = *p.tensor.tape();
    const Matrix& g = tape.grad_of(p.tensor.id());
    const double s = g.squaredNorm();
    if (!std::isfinite(s))
      throw TrainingError("non-finite gradient in parameter '" + p.name + "'");
    sq_norm += s;
  }
  double rescale = 1.0;
  if (cfg.clip_norm > 0.0) {
    const double norm = std::sqrt(sq_norm);
    if (norm > cfg.clip_norm) rescale = cfg.clip_norm / norm;
  }

  for (const NamedParam& p : params) {
    Tape& tape = *p.tensor.tape();
    State& st = states_[p.tensor.id()];
    const Matrix& g = tape.grad_of(p.tensor.id());
    Matrix& value = tape.mutable_value(p.tensor.id());
    if (st.t == 0) {
      st.m = Matrix::Zero(value.rows(), value.cols());
      st.v = Matrix::Zero(value.rows(), value.cols());
    }
    if (st.m.rows() != value.rows() || st.m.cols() != value.cols())
      throw DimensionError("adam state shape does not match parameter '" + p.name + "'");
    st.t += 1;
    st.m = cfg.beta1 * st.m + (1.0 - cfg.beta1) * rescale * g;
    st.v.array() = cfg.beta2 * st.v.array() +
                   (1.0 - cfg.beta2) * (rescale * g.array()).square();
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
    value.array() -=
        cfg.lr * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + cfg.eps);
    if (cfg.weight_decay > 0.0) value -= cfg.lr * cfg.weight_decay * value;
  }
}

long Adam::step_count(const Tensor& param) const {
  auto it = states_.find(param.id());
  return it == states_.end() ? 0 : it->second.t;
}

}  // namespace edgedis
