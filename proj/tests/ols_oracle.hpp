#pragma once

// Plain-loop OLS and clustered sandwich, kept free of Eigen so it can check
// the library's implementation.

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace testing {

using Matrix = std::vector<std::vector<double>>;

inline Matrix invert(Matrix a) {
  const std::size_t n = a.size();
  Matrix inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t pivot = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[pivot][c])) pivot = r;
    if (std::abs(a[pivot][c]) < 1e-14) throw std::runtime_error("singular");
    std::swap(a[c], a[pivot]);
    std::swap(inv[c], inv[pivot]);
    const double d = a[c][c];
    for (std::size_t j = 0; j < n; ++j) {
      a[c][j] /= d;
      inv[c][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c];
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[c][j];
        inv[r][j] -= f * inv[c][j];
      }
    }
  }
  return inv;
}

struct OracleFit {
  std::vector<double> beta;
  std::vector<double> se;
};

/// beta = (X'X)^-1 X'y; V = c (X'X)^-1 [sum_g (X_g'u_g)(X_g'u_g)'] (X'X)^-1,
/// c = G/(G-1) (n-1)/(n-k).
inline OracleFit brute_force_cluster_ols(const Matrix& x, const std::vector<double>& y, const std::vector<int>& g) {
  const std::size_t n = x.size(), k = x[0].size();
  Matrix xtx(k, std::vector<double>(k, 0.0));
  std::vector<double> xty(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < k; ++a) {
      xty[a] += x[i][a] * y[i];
      for (std::size_t b = 0; b < k; ++b) xtx[a][b] += x[i][a] * x[i][b];
    }
  const Matrix bread = invert(xtx);
  OracleFit out;
  out.beta.assign(k, 0.0);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) out.beta[a] += bread[a][b] * xty[b];

  std::map<int, std::vector<double>> score;
  for (std::size_t i = 0; i < n; ++i) {
    double fitted = 0.0;
    for (std::size_t a = 0; a < k; ++a) fitted += x[i][a] * out.beta[a];
    auto& s = score[g[i]];
    s.resize(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) s[a] += x[i][a] * (y[i] - fitted);
  }
  Matrix meat(k, std::vector<double>(k, 0.0));
  for (const auto& [label, s] : score)
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) meat[a][b] += s[a] * s[b];
  const double groups = static_cast<double>(score.size());
  const double c = groups / (groups - 1) * double(n - 1) / double(n - k);
  for (std::size_t a = 0; a < k; ++a) {
    double v = 0.0;
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t q = 0; q < k; ++q) v += bread[a][p] * meat[p][q] * bread[q][a];
    out.se.push_back(std::sqrt(c * v));
  }
  return out;
}

}  // namespace testing
