#include "mulaaip/basis.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "mulaaip/error.hpp"

namespace mulaaip::basis {
namespace {

constexpr double kPi = std::numbers::pi;

// Power series around 0; accurate to rounding for x <= 1 at any order.
double bessel_series(int l, double x) {
  double prefactor = 1.0;
  for (int i = 1; i <= l; ++i) prefactor *= x / (2.0 * i + 1.0);
  const double half_x2 = -0.5 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    term *= half_x2 / (k * (2.0 * l + 2.0 * k + 1.0));
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return prefactor * sum;
}

double bessel_upward(int l, double x) {
  const double s = std::sin(x);
  const double c = std::cos(x);
  double prev = s / x;
  if (l == 0) return prev;
  double cur = s / (x * x) - c / x;
  for (int n = 1; n < l; ++n) {
    const double next = (2.0 * n + 1.0) / x * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

// Miller's backward recurrence, normalised against whichever of the closed
// forms j_0, j_1 is better conditioned at x.
double bessel_downward(int l, double x) {
  const int start = l + 30 + static_cast<int>(std::sqrt(40.0 * l));
  double next = 0.0;
  double cur = 1e-30;
  double at_l = 0.0;
  double j1 = 0.0;
  for (int n = start; n > 0; --n) {
    const double prev = (2.0 * n + 1.0) / x * cur - next;
    next = cur;
    cur = prev;
    if (n - 1 == l) at_l = cur;
    if (n - 1 == 1) j1 = cur;
    if (std::abs(cur) > 1e250) {
      cur *= 1e-250;
      next *= 1e-250;
      at_l *= 1e-250;
      j1 *= 1e-250;
    }
  }
  if (l == 0) at_l = cur;
  const double j0_true = std::sin(x) / x;
  const double j1_true = std::sin(x) / (x * x) - std::cos(x) / x;
  if (std::abs(j0_true) >= std::abs(j1_true)) return at_l * (j0_true / cur);
  return at_l * (j1_true / j1);
}

double assoc_legendre(int l, int m, double x) {
  double pmm = 1.0;
  if (m > 0) {
    const double somx2 = std::sqrt((1.0 - x) * (1.0 + x));
    double fact = 1.0;
    for (int i = 1; i <= m; ++i) {
      pmm *= fact * somx2;
      fact += 2.0;
    }
  }
  if (l == m) return pmm;
  double pmmp1 = x * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pmmp1;
  double pll = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pll = (x * (2.0 * ll - 1.0) * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
    pmm = pmmp1;
    pmmp1 = pll;
  }
  return pll;
}

double harmonic_norm(int l, int m) {
  double ratio = 1.0;  // (l-m)!/(l+m)!
  for (int k = l - m + 1; k <= l + m; ++k) ratio /= k;
  return std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * ratio);
}

// sin(x)/x with the series branch near zero.
double sinc(double x) {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

}  // namespace

void BasisConfig::validate() const {
  if (!(cutoff > 0.0) || !std::isfinite(cutoff)) {
    throw Error(ErrorCode::ConfigError, "cutoff must be positive");
  }
  if (num_radial < 1) throw Error(ErrorCode::ConfigError, "num_radial must be >= 1");
  if (num_spherical < 1) throw Error(ErrorCode::ConfigError, "num_spherical must be >= 1");
  if (envelope_exponent < 1) throw Error(ErrorCode::ConfigError, "envelope_exponent must be >= 1");
}

double spherical_bessel(int l, double x) {
  if (l < 0 || !(x >= 0.0)) throw std::invalid_argument("spherical_bessel: need l >= 0, x >= 0");
  if (x == 0.0) return l == 0 ? 1.0 : 0.0;
  if (x <= 1.0) return bessel_series(l, x);
  if (x >= l) return bessel_upward(l, x);
  return bessel_downward(l, x);
}

std::vector<double> bessel_roots(int l, int count) {
  if (l < 0 || count < 1) throw std::invalid_argument("bessel_roots: need l >= 0, count >= 1");
  std::vector<double> roots;
  roots.reserve(static_cast<std::size_t>(count));
  if (l == 0) {
    for (int n = 1; n <= count; ++n) roots.push_back(n * kPi);
    return roots;
  }
  // j_l has no zero in (0, l]; successive zeros are more than pi apart.
  constexpr double kStep = 0.1;
  double lo = static_cast<double>(l);
  double f_lo = spherical_bessel(l, lo);
  while (static_cast<int>(roots.size()) < count) {
    const double hi = lo + kStep;
    const double f_hi = spherical_bessel(l, hi);
    if (f_lo == 0.0) {
      roots.push_back(lo);
    } else if ((f_lo < 0.0) != (f_hi < 0.0)) {
      double a = lo;
      double b = hi;
      double fa = f_lo;
      while (b - a > 1e-13) {
        const double mid = 0.5 * (a + b);
        if (mid <= a || mid >= b) break;
        const double fm = spherical_bessel(l, mid);
        if (fm == 0.0) {
          a = b = mid;
          break;
        }
        if ((fa < 0.0) == (fm < 0.0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    lo = hi;
    f_lo = f_hi;
  }
  return roots;
}

double spherical_harmonic(int l, int m, double theta, double phi) {
  if (l < 0 || std::abs(m) > l) throw std::invalid_argument("spherical_harmonic: need |m| <= l");
  const int am = std::abs(m);
  const double base = harmonic_norm(l, am) * assoc_legendre(l, am, std::cos(phi));
  if (m == 0) return base;
  if (m > 0) return std::numbers::sqrt2 * base * std::cos(m * theta);
  return std::numbers::sqrt2 * base * std::sin(am * theta);
}

double envelope(double x, int p) {
  if (x >= 1.0) return 0.0;
  const double xp = std::pow(x, p);
  return 1.0 - 0.5 * (p + 1.0) * (p + 2.0) * xp + p * (p + 2.0) * xp * x -
         0.5 * p * (p + 1.0) * xp * x * x;
}

FourierBesselBasis::FourierBesselBasis(const BasisConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const double c3 = cfg_.cutoff * cfg_.cutoff * cfg_.cutoff;
  roots_.resize(static_cast<std::size_t>(cfg_.num_spherical * cfg_.num_radial));
  norms_.resize(roots_.size());
  for (int l = 0; l < cfg_.num_spherical; ++l) {
    const auto zs = bessel_roots(l, cfg_.num_radial);
    for (int n = 1; n <= cfg_.num_radial; ++n) {
      const double z = zs[static_cast<std::size_t>(n - 1)];
      const double jn1 = spherical_bessel(l + 1, z);
      roots_[idx(l, n)] = z;
      norms_[idx(l, n)] = std::sqrt(2.0 / (c3 * jn1 * jn1));
    }
  }
}

void FourierBesselBasis::check_distance(double d) const {
  if (!(d > 0.0) || d > cfg_.cutoff) {
    throw Error(ErrorCode::OutOfCutoff,
                "distance " + std::to_string(d) + " outside (0, " + std::to_string(cfg_.cutoff) + "]");
  }
}

double FourierBesselBasis::envelope_at(double d) const {
  return cfg_.envelope_enabled ? envelope(d / cfg_.cutoff, cfg_.envelope_exponent) : 1.0;
}

void FourierBesselBasis::radial(double d, std::vector<double>& out) const {
  const double env = envelope_at(d);
  out.resize(roots_.size());
  for (int l = 0; l < cfg_.num_spherical; ++l) {
    for (int n = 1; n <= cfg_.num_radial; ++n) {
      const std::size_t k = idx(l, n);
      out[k] = norms_[k] * spherical_bessel(l, roots_[k] * d / cfg_.cutoff) * env;
    }
  }
}

void FourierBesselBasis::append_rbf(double d, std::vector<double>& out) const {
  check_distance(d);
  const double c = cfg_.cutoff;
  const double scale = std::sqrt(2.0 / c) * envelope_at(d);
  for (int n = 1; n <= cfg_.num_radial; ++n) {
    const double k = n * kPi / c;
    out.push_back(scale * k * sinc(k * d));
  }
}

void FourierBesselBasis::append_sbf(double d, double angle, std::vector<double>& out) const {
  check_distance(d);
  std::vector<double> rad;
  radial(d, rad);
  for (int l = 0; l < cfg_.num_spherical; ++l) {
    const double y = spherical_harmonic(l, 0, 0.0, angle);
    for (int n = 1; n <= cfg_.num_radial; ++n) out.push_back(rad[idx(l, n)] * y);
  }
}

void FourierBesselBasis::append_tbf(double d, double theta, double phi,
                                    std::vector<double>& out) const {
  check_distance(d);
  std::vector<double> rad;
  radial(d, rad);
  for (int l = 0; l < cfg_.num_spherical; ++l) {
    for (int m = -l; m <= l; ++m) {
      const double y = spherical_harmonic(l, m, theta, phi);
      for (int n = 1; n <= cfg_.num_radial; ++n) out.push_back(rad[idx(l, n)] * y);
    }
  }
}

std::vector<double> FourierBesselBasis::rbf(double d) const {
  std::vector<double> out;
  out.reserve(cfg_.rbf_size());
  append_rbf(d, out);
  return out;
}

std::vector<double> FourierBesselBasis::sbf(double d, double angle) const {
  std::vector<double> out;
  out.reserve(cfg_.sbf_size());
  append_sbf(d, angle, out);
  return out;
}

std::vector<double> FourierBesselBasis::tbf(double d, double theta, double phi) const {
  std::vector<double> out;
  out.reserve(cfg_.tbf_size());
  append_tbf(d, theta, phi, out);
  return out;
}

std::shared_ptr<const FourierBesselBasis> cached_basis(const BasisConfig& cfg) {
  static std::mutex mutex;
  static std::vector<std::pair<BasisConfig, std::shared_ptr<const FourierBesselBasis>>> cache;
  std::lock_guard lock(mutex);
  for (const auto& [key, value] : cache) {
    if (key == cfg) return value;
  }
  auto basis = std::make_shared<const FourierBesselBasis>(cfg);
  cache.emplace_back(cfg, basis);
  return basis;
}

std::vector<double> encode_rbf(double d, const BasisConfig& cfg) { return cached_basis(cfg)->rbf(d); }

std::vector<double> encode_sbf(double d, double angle, const BasisConfig& cfg) {
  return cached_basis(cfg)->sbf(d, angle);
}

std::vector<double> encode_tbf(double d, double theta, double phi, const BasisConfig& cfg) {
  return cached_basis(cfg)->tbf(d, theta, phi);
}

}  // namespace mulaaip::basis
