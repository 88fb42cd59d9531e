#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "edgedis/tensor.hpp"

namespace edgedis {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  // Global-norm clip over the parameter set being updated; <= 0 disables.
  double clip_norm = 5.0;
};

/// Adam with decoupled weight decay. Moment buffers are keyed by tensor id,
/// so a subset of parameters can be stepped without disturbing the state of
/// the others (the alternating schedule relies on this).
class Adam {
 public:
  /// One update over `params` using the gradients currently in their .grad
  /// buffers. Throws TrainingError naming the parameter if a gradient is
  /// non-finite.
  void step(const std::vector<NamedParam>& params, const AdamConfig& cfg);

  long step_count(const Tensor& param) const;

 private:
  struct State {
    Matrix m, v;
    long t = 0;
  };
  std::unordered_map<int, State> states_;
};

}  // namespace edgedis
