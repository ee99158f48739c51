#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mulaaip/basis.hpp"
#include "mulaaip/error.hpp"
#include "support.hpp"

using namespace mulaaip;
using namespace mulaaip::basis;
using std::numbers::pi;

namespace {

// Real harmonic from the standard library's normalised Legendre function,
// which carries the (-1)^m phase that this basis omits.
double oracle_harmonic(int l, int m, double theta, double phi) {
  const unsigned am = static_cast<unsigned>(std::abs(m));
  const double sign = (am % 2 == 0) ? 1.0 : -1.0;
  const double base = sign * std::sph_legendre(static_cast<unsigned>(l), am, phi);
  if (m == 0) return base;
  return std::sqrt(2.0) * base * (m > 0 ? std::cos(m * theta) : std::sin(am * theta));
}

BasisConfig no_envelope() {
  BasisConfig c;
  c.envelope_enabled = false;
  return c;
}

}  // namespace

TEST_CASE("spherical Bessel functions") {
  CHECK(std::abs(spherical_bessel(0, pi)) < 1e-12);
  CHECK(spherical_bessel(0, 1.0) == doctest::Approx(0.8414709848).epsilon(1e-10));
  CHECK(spherical_bessel(0, 0.0) == 1.0);
  CHECK(spherical_bessel(3, 0.0) == 0.0);
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const double x = rng.uniform(1e-3, 30.0);
    CHECK(std::abs(spherical_bessel(1, x) - (std::sin(x) / (x * x) - std::cos(x) / x)) < 1e-10);
  }
  for (int l = 0; l <= 7; ++l) {
    for (double x : {1e-6, 1e-3, 0.5, 1.0, 2.5, 7.0, 15.0, 29.0}) {
      const double expect = std::sph_bessel(static_cast<unsigned>(l), x);
      CHECK(std::abs(spherical_bessel(l, x) - expect) <= 1e-10 * std::max(1.0, std::abs(expect)));
    }
  }
}

TEST_CASE("Bessel roots") {
  const auto r0 = bessel_roots(0, 6);
  for (int n = 0; n < 6; ++n) CHECK(std::abs(r0[n] - (n + 1) * pi) < 1e-12);
  CHECK(std::abs(bessel_roots(1, 1)[0] - 4.493409458) < 1e-8);
  for (int l = 0; l <= 7; ++l) {
    const auto r = bessel_roots(l, 6);
    REQUIRE(r.size() == 6);
    for (std::size_t i = 0; i < r.size(); ++i) {
      CHECK(r[i] > 0);
      if (i) CHECK(r[i] > r[i - 1]);
      CHECK(std::abs(spherical_bessel(l, r[i])) < 1e-10);
    }
  }
}

TEST_CASE("real spherical harmonics") {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    CHECK(spherical_harmonic(0, 0, rng.uniform(-pi, pi), rng.uniform(0, pi)) ==
          doctest::Approx(0.28209479177387814).epsilon(1e-15));
  }
  CHECK(spherical_harmonic(1, 0, 0.3, 0.0) == doctest::Approx(0.4886025119029199).epsilon(1e-15));
  for (int l = 0; l <= 6; ++l) {
    for (int m = -l; m <= l; ++m) {
      for (int t = 0; t < 10; ++t) {
        const double theta = rng.uniform(-pi, pi);
        const double phi = rng.uniform(0, pi);
        CHECK(std::abs(spherical_harmonic(l, m, theta, phi) - oracle_harmonic(l, m, theta, phi)) < 1e-10);
      }
    }
  }
}

TEST_CASE("harmonic power per order integrates to 2l+1") {
  Rng rng(6);
  const int samples = 200000;
  std::vector<double> total(5, 0.0);
  for (int s = 0; s < samples; ++s) {
    const double theta = rng.uniform(-pi, pi);
    const double phi = std::acos(rng.uniform(-1.0, 1.0));
    for (int l = 0; l < 5; ++l) {
      for (int m = -l; m <= l; ++m) {
        const double y = spherical_harmonic(l, m, theta, phi);
        total[l] += y * y;
      }
    }
  }
  for (int l = 0; l < 5; ++l) {
    const double integral = 4 * pi * total[l] / samples;
    CHECK(std::abs(integral - (2 * l + 1)) / (2 * l + 1) < 0.02);
  }
}

TEST_CASE("envelope") {
  CHECK(envelope(0.0, 6) == 1.0);
  CHECK(std::abs(envelope(1.0, 6)) < 1e-15);
  CHECK(envelope(1.5, 6) == 0.0);
  CHECK(envelope(0.5, 6) == doctest::Approx(0.85546875).epsilon(1e-15));
  const double h = 1e-6;
  const double slope = (envelope(1.0, 6) - envelope(1.0 - h, 6)) / h;
  CHECK(std::abs(slope) < 1e-6);
}

TEST_CASE("radial basis") {
  const BasisConfig cfg = no_envelope();
  const auto at_c = encode_rbf(10.0, cfg);
  for (double v : at_c) CHECK(std::abs(v) < 1e-15);
  CHECK(encode_rbf(5.0, cfg)[0] == doctest::Approx(0.0894427191).epsilon(1e-10));
  for (double d : {1e-6, 1e-5, 1e-4, 1e-3}) {
    for (double v : encode_rbf(d, BasisConfig{})) CHECK(std::isfinite(v));
  }
  // sinc limit: sqrt(2/c) * n pi / c
  CHECK(encode_rbf(1e-9, cfg)[2] == doctest::Approx(std::sqrt(0.2) * 3 * pi / 10).epsilon(1e-9));
  try {
    encode_rbf(10.5, cfg);
    FAIL("expected OutOfCutoff");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfCutoff);
  }
}

TEST_CASE("radial basis is orthonormal under the d^2 measure") {
  const BasisConfig cfg = no_envelope();
  const int steps = 20000;  // Simpson, even
  const double h = cfg.cutoff / steps;
  std::vector<std::vector<double>> samples(steps + 1);
  for (int i = 0; i <= steps; ++i) samples[i] = encode_rbf(std::max(i * h, 1e-12), cfg);
  for (int n = 0; n < cfg.num_radial; ++n) {
    for (int m = 0; m < cfg.num_radial; ++m) {
      double sum = 0;
      for (int i = 0; i <= steps; ++i) {
        const double w = (i == 0 || i == steps) ? 1 : (i % 2 ? 4 : 2);
        const double d = i * h;
        sum += w * samples[i][n] * samples[i][m] * d * d;
      }
      const double integral = sum * h / 3;
      CHECK(std::abs(integral - (n == m ? 1.0 : 0.0)) < 1e-3);
    }
  }
}

TEST_CASE("spherical basis") {
  const BasisConfig cfg = no_envelope();
  for (double v : encode_sbf(10.0, 0.7, cfg)) CHECK(std::abs(v) < 1e-12);
  // j_1(pi) = 1/pi, j_0(pi/2) = 2/pi, Y_0^0 = 1/(2 sqrt(pi))
  const double j1 = 1 / pi, j0 = 2 / pi, y00 = 1 / (2 * std::sqrt(pi));
  const double expect = std::sqrt(2.0 / (1000.0 * j1 * j1)) * j0 * y00;
  CHECK(expect == doctest::Approx(0.025231325220201604).epsilon(1e-14));
  for (double a : {0.0, 1.0, 2.5}) {
    CHECK(encode_sbf(5.0, a, cfg)[0] == doctest::Approx(expect).epsilon(1e-12));
  }
  for (int n : {1, 3}) {
    for (int m : {1, 4, 7}) {
      BasisConfig c;
      c.num_radial = n;
      c.num_spherical = m;
      CHECK(encode_sbf(3.0, 0.5, c).size() == static_cast<std::size_t>(n * m));
      CHECK(encode_tbf(3.0, 0.5, 1.0, c).size() == static_cast<std::size_t>(n * m * m));
    }
  }
  CHECK_THROWS_AS(encode_sbf(11.0, 0.5, cfg), Error);
}

TEST_CASE("spherical basis against independent Bessel and Legendre functions") {
  const BasisConfig cfg = no_envelope();
  Rng rng(10);
  for (int t = 0; t < 20; ++t) {
    const double d = rng.uniform(0.5, 10.0);
    const double a = rng.uniform(0, pi);
    const auto sbf = encode_sbf(d, a, cfg);
    for (int l = 0; l < cfg.num_spherical; ++l) {
      const auto roots = bessel_roots(l, cfg.num_radial);
      for (int n = 0; n < cfg.num_radial; ++n) {
        const double z = roots[n];
        const double jn = std::sph_bessel(static_cast<unsigned>(l + 1), z);
        const double norm = std::sqrt(2.0 / (1000.0 * jn * jn));
        const double expect = norm * std::sph_bessel(static_cast<unsigned>(l), z * d / 10.0) *
                              oracle_harmonic(l, 0, 0.0, a);
        CHECK(std::abs(sbf[l * cfg.num_radial + n] - expect) < 1e-9 * std::max(1.0, std::abs(expect)));
      }
    }
  }
}

TEST_CASE("tensor basis") {
  const BasisConfig cfg = no_envelope();
  for (double v : encode_tbf(10.0, 0.3, 1.1, cfg)) CHECK(std::abs(v) < 1e-12);
  Rng rng(12);
  const double ref = encode_sbf(4.0, 0.0, cfg)[0];
  for (int t = 0; t < 10; ++t) {
    CHECK(encode_tbf(4.0, rng.uniform(-pi, pi), rng.uniform(0, pi), cfg)[0] == doctest::Approx(ref).epsilon(1e-14));
  }
  const std::size_t N = static_cast<std::size_t>(cfg.num_radial);
  for (int t = 0; t < 20; ++t) {
    const double d = rng.uniform(0.1, 10.0), theta = rng.uniform(-pi, pi), phi = rng.uniform(0, pi);
    for (const BasisConfig& c : {cfg, BasisConfig{}}) {
      const auto tbf = encode_tbf(d, theta, phi, c);
      const auto sbf = encode_sbf(d, phi, c);
      for (std::size_t l = 0; l < static_cast<std::size_t>(c.num_spherical); ++l) {
        for (std::size_t n = 0; n < N; ++n) {
          CHECK(std::abs(tbf[(l * l + l) * N + n] - sbf[l * N + n]) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("envelope drives every encoder to zero at the cutoff") {
  const BasisConfig cfg;
  double prev = 1e9;
  for (double d : {9.9, 9.99, 9.999}) {
    double mx = 0;
    for (double v : encode_tbf(d, 0.4, 1.3, cfg)) mx = std::max(mx, std::abs(v));
    for (double v : encode_sbf(d, 1.3, cfg)) mx = std::max(mx, std::abs(v));
    for (double v : encode_rbf(d, cfg)) mx = std::max(mx, std::abs(v));
    CHECK(mx < prev);
    prev = mx;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("encoders are deterministic") {
  const BasisConfig cfg;
  CHECK(encode_tbf(3.3, 0.1, 0.2, cfg) == encode_tbf(3.3, 0.1, 0.2, cfg));
  CHECK(cached_basis(cfg).get() == cached_basis(cfg).get());
}

TEST_CASE("invalid basis configuration") {
  BasisConfig c;
  c.cutoff = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = BasisConfig{};
  c.num_radial = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}
