#include "mulaaip/optim.hpp"

#include <cmath>
#include <filesystem>

#include "mulaaip/binary_io.hpp"
#include "mulaaip/error.hpp"

namespace mulaaip::nn {

void Adam::step(std::span<Parameter* const> params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.shape(), 0.0);
      v_.emplace_back(p->value.shape(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "Adam::step called with a different parameter list");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    auto& m = m_[k].values();
    auto& v = v_[k].values();
    auto& w = p.value.values();
    const auto& g = p.grad.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

std::string encode_checkpoint(const ParameterStore& store) {
  ByteWriter w;
  w.bytes("MLPK");
  w.u32(kCheckpointVersion);
  const auto params = store.all();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    w.str(p->name);
    w.u32(static_cast<std::uint32_t>(p->value.rank()));
    for (std::size_t d : p->value.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : p->value.values()) w.f64(v);
  }
  return std::move(w).take();
}

void decode_checkpoint(std::string_view bytes, ParameterStore& store) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != "MLPK") throw Error(ErrorCode::BadMagic, "not a checkpoint file");
  if (const auto version = r.u32(); version != kCheckpointVersion) {
    throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  if (count != store.size()) {
    throw Error(ErrorCode::ShapeMismatch, "checkpoint holds " + std::to_string(count) +
                                              " parameters, model has " + std::to_string(store.size()));
  }
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.str();
    Parameter* p = store.find(name);
    if (!p) throw Error(ErrorCode::ShapeMismatch, "checkpoint parameter '" + name + "' not in model");
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = r.u32();
    Tensor value(shape, 0.0);
    if (!value.same_shape(p->value)) {
      throw Error(ErrorCode::ShapeMismatch, "checkpoint shape " + value.shape_string() + " for '" + name +
                                                "', model expects " + p->value.shape_string());
    }
    for (auto& v : value.values()) v = r.f64();
    p->value = std::move(value);
  }
  if (!r.at_end()) throw Error(ErrorCode::TruncatedRecord, "trailing bytes after checkpoint");
}

void save_checkpoint(const ParameterStore& store, const std::string& path) {
  write_file(path, encode_checkpoint(store));
}

void load_checkpoint(const std::string& path, ParameterStore& store) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingCheckpoint, "no checkpoint at '" + path + "'");
  decode_checkpoint(read_file(path), store);
}

}  // namespace mulaaip::nn
