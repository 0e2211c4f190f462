#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "mmtwin/dual.hpp"

namespace mmtwin::mat {

inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m
inline constexpr double kSpeedOfLight = 299792458.0;             // m/s

struct RadioMaterial {
  std::string label;
  std::vector<std::string> synonyms;
  double eps_r = 1.0;   // relative permittivity, >= 1
  double sigma = 0.0;   // conductivity S/m, > 0
  double s_lo = 0.0, s_hi = 0.0;  // scattering coefficient interval in [0,1]
  double band_lo_ghz = 0.0, band_hi_ghz = 1e9;

  double s_mid() const { return 0.5 * (s_lo + s_hi); }
};

/// Label -> material map with case-insensitive label and synonym lookup.
class MaterialDb {
 public:
  static MaterialDb load(const std::string& path);
  static MaterialDb from_entries(std::vector<RadioMaterial> entries);

  const RadioMaterial& lookup(const std::string& label_or_synonym) const;
  bool contains(const std::string& label_or_synonym) const;
  const std::vector<RadioMaterial>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<RadioMaterial> entries_;
  std::map<std::string, std::size_t> index_;  // lowercased label/synonym
};

/// Shared fixed read-out vectors w1..w3 mapping a latent embedding to
/// (sigma, eps_r, S). Not trained; sampled orthonormal per run seed.
struct ReadoutWeights {
  std::size_t dim = 0;
  std::vector<double> w1, w2, w3;

  static ReadoutWeights random_orthonormal(std::size_t latent_dim, std::uint64_t seed);
};

struct MaterialEmbedding {
  std::vector<double> v;
};

template <class T>
struct MaterialParamsT {
  T sigma{};       // S/m
  T eps_r{};       // dimensionless
  T scattering{};  // S in (0,1)
};
using MaterialParams = MaterialParamsT<double>;

template <class T>
T sigmoid(const T& x) {
  T s = T(1.0) / (T(1.0) + exp(-x));
  // exp() under/overflow can push the quotient onto the open interval's ends;
  // keep S strictly inside (0, 1).
  if (value_of(s) >= 1.0) s = s - T(1e-12);
  if (value_of(s) <= 0.0) s = s + T(1e-300);
  return s;
}

/// sigma = exp(v.w1); eps_r = 1 + exp(v.w2); S = sigmoid(v.w3).
template <class T>
MaterialParamsT<T> params_from_projections(const T& p1, const T& p2, const T& p3) {
  return {exp(p1), T(1.0) + exp(p2), sigmoid(p3)};
}

MaterialParams params_from_embedding(const MaterialEmbedding& e, const ReadoutWeights& w);

/// Minimum-norm embedding whose read-out reproduces (sigma, eps_r, S).
/// S at 0/1 and eps_r at 1 are clamped inside a small margin; a note is
/// appended to `warnings` when clamping fires.
MaterialEmbedding embedding_from_params(double sigma, double eps_r, double scattering,
                                        const ReadoutWeights& w,
                                        std::vector<std::string>* warnings = nullptr);

/// eta = eps_r - j sigma / (2 pi f eps0); e^{+j w t} convention, Im(eta) <= 0.
template <class T>
Cpx<T> complex_permittivity(const T& eps_r, const T& sigma, double f_hz) {
  return {eps_r, -sigma / (2.0 * 3.14159265358979323846 * f_hz * kVacuumPermittivity)};
}

}  // namespace mmtwin::mat
