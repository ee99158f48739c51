#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "mulaaip/autodiff.hpp"
#include "mulaaip/data.hpp"
#include "mulaaip/graphs.hpp"
#include "mulaaip/rng.hpp"
#include "mulaaip/structure.hpp"
#include "mulaaip/synthetic.hpp"
#include "mulaaip/vec3.hpp"

namespace testing {

using mulaaip::Rng;
using mulaaip::Vec3;

struct Rotation {
  double m[3][3];
  Vec3 apply(const Vec3& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z, m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }
};

// Uniform random rotation from a unit quaternion.
inline Rotation random_rotation(Rng& rng) {
  double q[4];
  double n = 0.0;
  do {
    n = 0.0;
    for (double& x : q) {
      x = rng.normal();
      n += x * x;
    }
  } while (n < 1e-6);
  n = std::sqrt(n);
  for (double& x : q) x /= n;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

inline Rotation axis_rotation(Vec3 axis, double angle) {
  axis = mulaaip::normalized(axis);
  const double c = std::cos(angle), s = std::sin(angle), t = 1 - c;
  const double x = axis.x, y = axis.y, z = axis.z;
  return {{{t * x * x + c, t * x * y - s * z, t * x * z + s * y},
           {t * x * y + s * z, t * y * y + c, t * y * z - s * x},
           {t * x * z - s * y, t * y * z + s * x, t * z * z + c}}};
}

template <typename F>
mulaaip::ProteinStructure map_positions(mulaaip::ProteinStructure s, F&& f) {
  for (auto& chain : s.chains) {
    for (auto& r : chain.residues) {
      for (auto& a : r.atoms) a.position = f(a.position);
      r.anchor = f(r.anchor);
    }
  }
  return s;
}

inline mulaaip::ProteinStructure rigid_transform(const mulaaip::ProteinStructure& s, const Rotation& rot,
                                                 const Vec3& shift) {
  return map_positions(s, [&](const Vec3& p) { return rot.apply(p) + shift; });
}

inline double rel_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;  // parameter[index]
  std::size_t checked = 0;
};

// Central differences of `loss` with respect to every entry of every
// trainable parameter, against one backward pass.
inline GradCheck finite_difference_check(mulaaip::nn::ParameterStore& store,
                                         const std::function<mulaaip::nn::Var(mulaaip::nn::Tape&)>& loss,
                                         double step = 1e-5, double floor = 1e-6) {
  using namespace mulaaip::nn;
  store.zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  auto eval = [&] {
    Tape tape(false);
    return loss(tape).value()[0];
  };
  GradCheck out;
  for (Parameter* p : store.trainable()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double keep = p->value[i];
      p->value[i] = keep + step;
      const double up = eval();
      p->value[i] = keep - step;
      const double down = eval();
      p->value[i] = keep;
      const double numeric = (up - down) / (2 * step);
      const double err = rel_error(p->grad[i], numeric, floor);
      ++out.checked;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

inline mulaaip::nn::Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                                         double hi = 1.0) {
  mulaaip::nn::Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Synthetic pairs featurised in memory, without touching the disk.
inline mulaaip::model::Dataset toy_dataset(const mulaaip::synthetic::Options& opt,
                                           const mulaaip::basis::BasisConfig& basis) {
  using namespace mulaaip;
  const auto set = synthetic::generate(opt);
  std::map<std::string, std::string> files(set.files.begin(), set.files.end());
  const data::StructureLookup lookup = [&](const std::string& path, const std::vector<std::string>& chains) {
    const auto s = parse_pdb(files.at(path), path).structure;
    return std::make_shared<const graphs::StructuralGraph>(
        graphs::build_structural_graph(select_chains(s, chains), basis));
  };
  return data::assemble_dataset(set.records, set.embeddings, lookup, opt.task);
}

}  // namespace testing
