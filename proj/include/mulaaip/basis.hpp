#pragma once

#include <memory>
#include <vector>

namespace mulaaip::basis {

struct BasisConfig {
  double cutoff = 10.0;  // Å
  int num_radial = 6;    // N
  int num_spherical = 7; // M
  int envelope_exponent = 6;
  bool envelope_enabled = true;

  /// Throws Error{ConfigError} on non-positive cutoff or counts.
  void validate() const;

  std::size_t rbf_size() const { return static_cast<std::size_t>(num_radial); }
  std::size_t sbf_size() const { return static_cast<std::size_t>(num_radial * num_spherical); }
  std::size_t tbf_size() const {
    return static_cast<std::size_t>(num_radial * num_spherical * num_spherical);
  }

  bool operator==(const BasisConfig&) const = default;
};

/// Spherical Bessel function of the first kind j_l(x), x >= 0.
double spherical_bessel(int l, double x);

/// First `count` positive zeros of j_l, increasing.
std::vector<double> bessel_roots(int l, int count);

/// Real spherical harmonic of order l and degree m (|m| <= l) at azimuth
/// `theta` and polar angle `phi`. No Condon-Shortley phase; m > 0 carries
/// cos(m theta), m < 0 carries sin(|m| theta), both scaled by sqrt(2).
double spherical_harmonic(int l, int m, double theta, double phi);

/// Smooth polynomial cutoff: 1 at 0, 0 with zero slope at 1, 0 beyond.
double envelope(double scaled_distance, int exponent);

/// Precomputed zeros and normalisation constants for one configuration.
class FourierBesselBasis {
 public:
  explicit FourierBesselBasis(const BasisConfig& cfg);

  const BasisConfig& config() const { return cfg_; }

  /// sqrt(2/c) sin(n pi d / c) / d, n = 1..N. Throws Error{OutOfCutoff}.
  std::vector<double> rbf(double d) const;
  /// Index l*N + (n-1).
  std::vector<double> sbf(double d, double angle) const;
  /// Index (l*l + m + l)*N + (n-1).
  std::vector<double> tbf(double d, double theta, double phi) const;

  void append_rbf(double d, std::vector<double>& out) const;
  void append_sbf(double d, double angle, std::vector<double>& out) const;
  void append_tbf(double d, double theta, double phi, std::vector<double>& out) const;

  double root(int l, int n) const { return roots_[idx(l, n)]; }

 private:
  std::size_t idx(int l, int n) const {
    return static_cast<std::size_t>(l * cfg_.num_radial + (n - 1));
  }
  double envelope_at(double d) const;
  void check_distance(double d) const;
  // radial(l, n) factor including normalisation and envelope
  void radial(double d, std::vector<double>& out) const;

  BasisConfig cfg_;
  std::vector<double> roots_;  // z_{l n}
  std::vector<double> norms_;  // sqrt(2 / (c^3 j_{l+1}(z_{l n})^2))
};

/// Shared immutable basis for a configuration, built once per distinct config.
std::shared_ptr<const FourierBesselBasis> cached_basis(const BasisConfig& cfg);

std::vector<double> encode_rbf(double d, const BasisConfig& cfg);
std::vector<double> encode_sbf(double d, double angle, const BasisConfig& cfg);
std::vector<double> encode_tbf(double d, double theta, double phi, const BasisConfig& cfg);

}  // namespace mulaaip::basis
