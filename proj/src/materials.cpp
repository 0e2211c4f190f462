#include "mmtwin/materials.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace mmtwin::mat {

namespace {

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

void validate(const RadioMaterial& m) {
  if (m.label.empty()) throw std::runtime_error("material with empty label");
  if (m.eps_r < 1.0) throw std::runtime_error("material '" + m.label + "': eps_r must be >= 1");
  if (m.sigma <= 0.0) throw std::runtime_error("material '" + m.label + "': sigma must be > 0");
  if (m.s_lo < 0.0 || m.s_hi > 1.0 || m.s_lo > m.s_hi)
    throw std::runtime_error("material '" + m.label + "': invalid S interval");
}

}  // namespace

MaterialDb MaterialDb::from_entries(std::vector<RadioMaterial> entries) {
  MaterialDb db;
  db.entries_ = std::move(entries);
  for (std::size_t i = 0; i < db.entries_.size(); ++i) {
    const RadioMaterial& m = db.entries_[i];
    validate(m);
    if (!db.index_.emplace(lowercase(m.label), i).second)
      throw std::runtime_error("duplicate material label: " + m.label);
    for (const std::string& syn : m.synonyms)
      if (!db.index_.emplace(lowercase(syn), i).second)
        throw std::runtime_error("duplicate material label/synonym: " + syn);
  }
  return db;
}

MaterialDb MaterialDb::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open material database: " + path);
  nlohmann::json j;
  in >> j;
  std::vector<RadioMaterial> entries;
  for (const auto& e : j.at("materials")) {
    RadioMaterial m;
    m.label = e.at("label").get<std::string>();
    if (e.contains("synonyms")) m.synonyms = e["synonyms"].get<std::vector<std::string>>();
    m.eps_r = e.at("eps_r").get<double>();
    m.sigma = e.at("sigma").get<double>();
    auto s = e.at("s_range");
    m.s_lo = s.at(0).get<double>();
    m.s_hi = s.at(1).get<double>();
    if (e.contains("band_ghz")) {
      m.band_lo_ghz = e["band_ghz"].at(0).get<double>();
      m.band_hi_ghz = e["band_ghz"].at(1).get<double>();
    }
    entries.push_back(std::move(m));
  }
  return from_entries(std::move(entries));
}

const RadioMaterial& MaterialDb::lookup(const std::string& label_or_synonym) const {
  auto it = index_.find(lowercase(label_or_synonym));
  if (it == index_.end())
    throw std::runtime_error("material not found: " + label_or_synonym);
  return entries_[it->second];
}

bool MaterialDb::contains(const std::string& label_or_synonym) const {
  return index_.count(lowercase(label_or_synonym)) > 0;
}

ReadoutWeights ReadoutWeights::random_orthonormal(std::size_t latent_dim, std::uint64_t seed) {
  if (latent_dim < 3) throw std::runtime_error("latent dimension must be >= 3");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> w(3, std::vector<double>(latent_dim));
  for (auto& row : w) {
    for (double& x : row) x = gauss(rng);
  }
  // Gram-Schmidt.
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < i; ++k) {
      double proj = 0.0;
      for (std::size_t d = 0; d < latent_dim; ++d) proj += w[i][d] * w[k][d];
      for (std::size_t d = 0; d < latent_dim; ++d) w[i][d] -= proj * w[k][d];
    }
    double norm = 0.0;
    for (double x : w[i]) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-9) throw std::runtime_error("degenerate read-out weight sample");
    for (double& x : w[i]) x /= norm;
  }
  return {latent_dim, std::move(w[0]), std::move(w[1]), std::move(w[2])};
}

namespace {

double dot_vec(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

MaterialParams params_from_embedding(const MaterialEmbedding& e, const ReadoutWeights& w) {
  if (e.v.size() != w.dim) throw std::runtime_error("embedding/read-out dimension mismatch");
  return params_from_projections(dot_vec(e.v, w.w1), dot_vec(e.v, w.w2), dot_vec(e.v, w.w3));
}

MaterialEmbedding embedding_from_params(double sigma, double eps_r, double scattering,
                                        const ReadoutWeights& w,
                                        std::vector<std::string>* warnings) {
  if (sigma <= 0.0) throw std::runtime_error("embedding_from_params: sigma must be > 0");
  constexpr double kEpsMargin = 1e-9;
  constexpr double kSMargin = 1e-6;
  if (eps_r <= 1.0) {
    if (warnings) warnings->push_back("eps_r clamped to 1 + margin");
    eps_r = 1.0 + kEpsMargin;
  }
  if (scattering <= 0.0) {
    if (warnings) warnings->push_back("S clamped above 0");
    scattering = kSMargin;
  } else if (scattering >= 1.0) {
    if (warnings) warnings->push_back("S clamped below 1");
    scattering = 1.0 - kSMargin;
  }

  double t1 = std::log(sigma);
  double t2 = std::log(eps_r - 1.0);
  double t3 = std::log(scattering / (1.0 - scattering));

  // Minimum-norm solution of W v = t: v = W^T (W W^T)^{-1} t.
  const std::vector<double>* rows[3] = {&w.w1, &w.w2, &w.w3};
  double g[3][3];
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) g[i][k] = dot_vec(*rows[i], *rows[k]);
  double t[3] = {t1, t2, t3};

  // Solve the 3x3 system g * y = t by Gaussian elimination with pivoting.
  double a[3][4];
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) a[i][k] = g[i][k];
    a[i][3] = t[i];
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < 1e-12)
      throw std::runtime_error("read-out weights are not linearly independent");
    std::swap(a[col], a[piv]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      double f = a[r][col] / a[col][col];
      for (int k = col; k < 4; ++k) a[r][k] -= f * a[col][k];
    }
  }
  double y[3];
  for (int i = 0; i < 3; ++i) y[i] = a[i][3] / a[i][i];

  MaterialEmbedding out;
  out.v.assign(w.dim, 0.0);
  for (std::size_t d = 0; d < w.dim; ++d)
    out.v[d] = y[0] * w.w1[d] + y[1] * w.w2[d] + y[2] * w.w3[d];
  return out;
}

}  // namespace mmtwin::mat
