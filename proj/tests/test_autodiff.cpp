#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>

#include "mulaaip/autodiff.hpp"
#include "mulaaip/binary_io.hpp"
#include "mulaaip/error.hpp"
#include "mulaaip/optim.hpp"
#include "support.hpp"

using namespace mulaaip;
using namespace mulaaip::nn;

namespace {

// Weighted sum with fixed random weights, so every output entry matters.
Var probe(Tape& tape, Var x, std::uint64_t seed) {
  Rng rng(seed);
  Var w = tape.constant(testing::random_tensor(rng, x.rows(), x.cols()));
  return sum_all(mul(x, w));
}

Parameter& param(ParameterStore& s, const std::string& name, Rng& rng, std::size_t r, std::size_t c,
                 double lo = -1.0, double hi = 1.0) {
  return s.add(name, testing::random_tensor(rng, r, c, lo, hi));
}

void check_gradients(ParameterStore& store, const std::function<Var(Tape&)>& loss) {
  const auto r = testing::finite_difference_check(store, loss);
  INFO("worst " << r.worst << " rel " << r.max_rel_error);
  CHECK(r.checked > 0);
  CHECK(r.max_rel_error < 1e-6);
}

}  // namespace

TEST_CASE("op examples") {
  Tape tape;
  const Var x = tape.constant(Tensor(1, 2, std::vector<double>{-1, 3}));
  const Var y = leaky_relu(x, 0.2);
  CHECK(y.value()[0] == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(y.value()[1] == 3.0);

  const Var logits = tape.constant(Tensor(3, 1, 0.0));
  const std::vector<std::size_t> seg{0, 0, 0};
  const Var sm = softmax_segmented(logits, seg, 1);
  for (int i = 0; i < 3; ++i) CHECK(sm.value()[i] == doctest::Approx(1.0 / 3).epsilon(1e-15));

  const Var a = tape.constant(Tensor(2, 2, std::vector<double>{1, 2, 3, 4}));
  const Var b = tape.constant(Tensor(2, 1, 1.0));
  CHECK(matmul(a, b).value() == Tensor(2, 1, std::vector<double>{3, 7}));
  CHECK_THROWS_AS(matmul(b, b), Error);
  CHECK_THROWS_AS(add(a, b), Error);
  CHECK(sigmoid(tape.constant(Tensor::scalar(0))).value().item() == 0.5);
  CHECK(mean_rows(a).value() == Tensor(1, 2, std::vector<double>{2, 3}));
  CHECK(sum_cols(a).value() == Tensor(2, 1, std::vector<double>{3, 7}));
}

TEST_CASE("non-finite values fault immediately") {
  Tape tape;
  const Var z = tape.constant(Tensor::scalar(0.0));
  try {
    log(z);
    FAIL("expected NonFinite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
  }
}

TEST_CASE("every op passes a central finite-difference check") {
  Rng rng(99);
  ParameterStore s;
  Parameter& a = param(s, "a", rng, 4, 3);
  Parameter& b = param(s, "b", rng, 3, 5);
  Parameter& c = param(s, "c", rng, 4, 3);
  Parameter& row = param(s, "row", rng, 1, 3);
  Parameter& col = param(s, "col", rng, 4, 1);
  Parameter& sc = param(s, "sc", rng, 1, 1);
  Parameter& pos = param(s, "pos", rng, 4, 3, 0.5, 2.0);
  Parameter& logit = param(s, "logit", rng, 5, 1);
  // Keep entries away from kinks of abs / leaky / max / clamp.
  for (double& v : a.value.values())
    if (std::abs(v) < 0.1) v += 0.2;

  const std::vector<std::pair<const char*, std::function<Var(Tape&)>>> cases = {
      {"matmul", [&](Tape& t) { return probe(t, matmul(t.parameter(a), t.parameter(b)), 1); }},
      {"add", [&](Tape& t) { return probe(t, add(t.parameter(a), t.parameter(c)), 2); }},
      {"sub", [&](Tape& t) { return probe(t, sub(t.parameter(a), t.parameter(c)), 3); }},
      {"mul", [&](Tape& t) { return probe(t, mul(t.parameter(a), t.parameter(c)), 4); }},
      {"add_row", [&](Tape& t) { return probe(t, add_row(t.parameter(a), t.parameter(row)), 5); }},
      {"mul_col", [&](Tape& t) { return probe(t, mul_col(t.parameter(a), t.parameter(col)), 6); }},
      {"mul_scalar", [&](Tape& t) { return probe(t, mul_scalar(t.parameter(a), t.parameter(sc)), 7); }},
      {"scale", [&](Tape& t) { return probe(t, scale(add_scalar(t.parameter(a), 0.3), -1.7), 8); }},
      {"concat_cols", [&](Tape& t) { return probe(t, concat_cols({t.parameter(a), t.parameter(col)}), 9); }},
      {"concat_rows", [&](Tape& t) { return probe(t, concat_rows({t.parameter(a), t.parameter(row)}), 10); }},
      {"mean_rows", [&](Tape& t) { return probe(t, mean_rows(t.parameter(a)), 11); }},
      {"sum_rows", [&](Tape& t) { return probe(t, sum_rows(t.parameter(a)), 12); }},
      {"sum_cols", [&](Tape& t) { return probe(t, sum_cols(t.parameter(a)), 13); }},
      {"leaky_relu", [&](Tape& t) { return probe(t, leaky_relu(t.parameter(a), 0.2), 14); }},
      {"sigmoid", [&](Tape& t) { return probe(t, sigmoid(t.parameter(a)), 15); }},
      {"log", [&](Tape& t) { return probe(t, log(t.parameter(pos)), 16); }},
      {"abs", [&](Tape& t) { return probe(t, abs(t.parameter(a)), 17); }},
      {"square", [&](Tape& t) { return probe(t, square(t.parameter(a)), 18); }},
      {"pow", [&](Tape& t) { return probe(t, pow(t.parameter(pos), -0.5), 19); }},
      {"max_scalar", [&](Tape& t) { return probe(t, max_scalar(t.parameter(a), 0.0), 20); }},
      {"clamp", [&](Tape& t) { return probe(t, clamp(t.parameter(a), -0.5, 0.5), 21); }},
      {"softmax_segmented",
       [&](Tape& t) {
         const std::vector<std::size_t> seg{0, 1, 0, 1, 1};
         return probe(t, softmax_segmented(t.parameter(logit), seg, 2), 22);
       }},
      {"gather_rows",
       [&](Tape& t) {
         const std::vector<std::size_t> idx{3, 0, 3, 1};
         return probe(t, gather_rows(t.parameter(a), idx), 23);
       }},
      {"scatter_add_rows",
       [&](Tape& t) {
         const std::vector<std::size_t> idx{2, 0, 2, 4};
         return probe(t, scatter_add_rows(t.parameter(a), idx, 5), 24);
       }},
      {"dropout",
       [&](Tape& t) {
         Rng local(7);
         return probe(t, dropout(t.parameter(a), 0.4, local, true), 25);
       }},
  };
  for (const auto& [name, fn] : cases) {
    INFO(name);
    check_gradients(s, fn);
  }
}

TEST_CASE("gradient of sum(W x) is the outer-product structure") {
  Rng rng(1);
  ParameterStore s;
  Parameter& w = s.add("w", testing::random_tensor(rng, 3, 2));
  const Tensor x(2, 1, std::vector<double>{0.5, -2.0});
  Tape tape;
  tape.backward(sum_all(matmul(tape.parameter(w), tape.constant(x))));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(w.grad(i, 0) == 0.5);
    CHECK(w.grad(i, 1) == -2.0);
  }
  check_gradients(s, [&](Tape& t) { return sum_all(matmul(t.parameter(w), t.constant(x))); });
}

TEST_CASE("backward contracts") {
  Rng rng(2);
  ParameterStore s;
  Parameter& used = s.add("used", testing::random_tensor(rng, 2, 2));
  Parameter& unused = s.add("unused", testing::random_tensor(rng, 2, 2));
  s.zero_grad();
  auto run = [&] {
    Tape tape;
    Var u = tape.parameter(used);
    tape.parameter(unused);
    tape.backward(sum_all(square(u)));
  };
  run();
  const Tensor once = used.grad;
  for (double g : unused.grad.values()) CHECK(g == 0.0);
  run();
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(used.grad[i] == 2 * once[i]);

  Tape tape;
  try {
    tape.backward(tape.parameter(used));
    FAIL("expected NotScalar");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotScalar);
  }
}

TEST_CASE("evaluation tapes record no gradients") {
  ParameterStore s;
  Parameter& p = s.add("p", Tensor::scalar(2.0));
  s.zero_grad();
  Tape tape(false);
  const Var v = tape.parameter(p);
  CHECK_FALSE(tape.requires_grad(v));
  CHECK(square(v).value().item() == 4.0);
}

TEST_CASE("Adam") {
  SUBCASE("first step moves by the learning rate") {
    ParameterStore s;
    Parameter& p = s.add("p", Tensor::scalar(1.0));
    p.grad = Tensor::scalar(1.0);
    Adam adam(0.1);
    auto params = s.all();
    adam.step(params);
    CHECK(p.value.item() == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-15));
    CHECK(std::abs(p.value.item() - 0.9) < 1e-8);
    CHECK(adam.step_count() == 1);
  }
  SUBCASE("zero gradient leaves the value unchanged") {
    ParameterStore s;
    Parameter& p = s.add("p", Tensor::scalar(1.0));
    p.grad = Tensor::scalar(0.0);
    Adam adam(0.1);
    auto params = s.all();
    for (int i = 0; i < 3; ++i) adam.step(params);
    CHECK(p.value.item() == 1.0);
  }
  SUBCASE("trajectories are reproducible") {
    auto trajectory = [] {
      Rng rng(5);
      ParameterStore s;
      Parameter& w = s.add_xavier("w", 4, 3, rng);
      const Tensor x = testing::random_tensor(rng, 2, 4);
      Adam adam(0.01);
      auto params = s.trainable();
      for (int i = 0; i < 10; ++i) {
        s.zero_grad();
        Tape tape;
        tape.backward(sum_all(square(matmul(tape.constant(x), tape.parameter(w)))));
        adam.step(params);
      }
      return w.value;
    };
    CHECK(trajectory() == trajectory());
  }
}

TEST_CASE("Xavier initialisation stays within its bound") {
  Rng rng(3);
  ParameterStore s;
  const Parameter& w = s.add_xavier("w", 30, 20, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  for (double v : w.value.values()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("dropout preserves the expectation") {
  Rng rng(11);
  const std::size_t n = 100000;
  Tape tape(false);
  const Var x = tape.constant(Tensor(1, n, 2.0));
  const Var y = dropout(x, 0.3, rng, true);
  double mean = 0;
  std::size_t zeros = 0;
  for (double v : y.value().values()) {
    mean += v / 2.0;
    if (v == 0.0) ++zeros;
  }
  mean /= n;
  CHECK(std::abs(mean - 1.0) < 0.01);
  CHECK(std::abs(static_cast<double>(zeros) / n - 0.3) < 0.01);
  CHECK(dropout(x, 0.3, rng, false).value() == x.value());
}

TEST_CASE("segmented softmax sums to one per segment") {
  Rng rng(12);
  Tape tape(false);
  const std::size_t n = 40, groups = 7;
  std::vector<std::size_t> seg(n);
  for (auto& g : seg) g = rng.below(groups);
  const Var x = tape.constant(testing::random_tensor(rng, n, 1, -30, 30));
  const auto& p = softmax_segmented(x, seg, groups).value();
  std::vector<double> total(groups, 0.0);
  std::vector<bool> seen(groups, false);
  for (std::size_t i = 0; i < n; ++i) {
    total[seg[i]] += p[i];
    seen[seg[i]] = true;
  }
  for (std::size_t g = 0; g < groups; ++g)
    if (seen[g]) CHECK(std::abs(total[g] - 1.0) < 1e-12);
}

TEST_CASE("checkpoint round trip and errors") {
  Rng rng(4);
  ParameterStore a;
  a.add_xavier("w", 3, 4, rng);
  a.add_zeros("b", 1, 4);
  a.add("stat", Tensor::scalar(2.5), false, false);
  const std::string bytes = encode_checkpoint(a);
  CHECK(bytes.substr(0, 4) == "MLPK");

  ParameterStore b;
  b.add("w", Tensor(3, 4));
  b.add("b", Tensor(1, 4));
  b.add("stat", Tensor::scalar(0));
  decode_checkpoint(bytes, b);
  CHECK(b.at("w").value == a.at("w").value);
  CHECK(b.at("stat").value.item() == 2.5);
  CHECK(encode_checkpoint(b) == bytes);

  const auto path = (std::filesystem::temp_directory_path() / "mulaaip_ckpt_test.ckpt").string();
  save_checkpoint(a, path);
  ParameterStore c;
  c.add("w", Tensor(3, 4));
  c.add("b", Tensor(1, 4));
  c.add("stat", Tensor::scalar(0));
  load_checkpoint(path, c);
  CHECK(encode_checkpoint(c) == bytes);
  std::filesystem::remove(path);

  ParameterStore wrong_shape;
  wrong_shape.add("w", Tensor(4, 3));
  wrong_shape.add("b", Tensor(1, 4));
  wrong_shape.add("stat", Tensor::scalar(0));
  CHECK_THROWS_AS(decode_checkpoint(bytes, wrong_shape), Error);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, 20), b), Error);
  std::string magic = bytes;
  magic[1] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(magic, b), Error);
  try {
    load_checkpoint("/nonexistent/model.ckpt", b);
    FAIL("expected MissingCheckpoint");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingCheckpoint);
  }
}

TEST_CASE("snapshot and restore") {
  Rng rng(6);
  ParameterStore s;
  Parameter& w = s.add_xavier("w", 2, 2, rng);
  const auto snap = s.snapshot();
  w.value.fill(9.0);
  s.restore(snap);
  CHECK(w.value == snap[0]);
}

TEST_CASE("random streams are reproducible and forks differ") {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(Rng(42).fork(0).next_u64() != Rng(42).fork(1).next_u64());
  Rng r(7);
  for (int i = 0; i < 1000; ++i) CHECK(r.below(13) < 13u);
}
