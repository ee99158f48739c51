#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mulaaip/autodiff.hpp"

namespace mulaaip::nn {

/// Adam with bias correction. Moments are keyed by position in the
/// parameter list, so every step() must receive the same list.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<Parameter* const> params);
  std::uint64_t step_count() const { return t_; }
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

/// Checkpoint bytes: "MLPK", u32 version, u32 count, then per parameter
/// u32 name length, name, u32 rank, rank x u32 dims, float64 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const ParameterStore& store);
/// Loads values into an already-built store; names and shapes must match.
void decode_checkpoint(std::string_view bytes, ParameterStore& store);

void save_checkpoint(const ParameterStore& store, const std::string& path);
void load_checkpoint(const std::string& path, ParameterStore& store);

}  // namespace mulaaip::nn
