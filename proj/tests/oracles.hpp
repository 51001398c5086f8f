#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the library's numerical kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "air/dataset.hpp"
#include "air/matrix.hpp"
#include "air/random.hpp"

namespace oracle {

using air::Matrix;

/// w(j, c) sits at column c * p + j of the dense operator.
inline std::size_t wcol(std::size_t j, std::size_t c, std::size_t p) { return c * p + j; }

/// Dense F with one row per (active group, feature). `groups` lists group ids
/// g = i * C + c in row-block order.
inline Matrix dense_f(const Matrix& x, std::size_t C, const std::vector<std::size_t>& groups) {
  const std::size_t p = x.cols();
  Matrix f(groups.size() * p, p * C, 0.0);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const std::size_t i = groups[k] / C, c = groups[k] % C;
    for (std::size_t j = 0; j < p; ++j) f(k * p + j, wcol(j, c, p)) = x(i, j);
  }
  return f;
}

inline std::vector<std::size_t> all_groups(std::size_t n, std::size_t C) {
  std::vector<std::size_t> g(n * C);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = k;
  return g;
}

inline std::vector<double> vec(const Matrix& w) {
  std::vector<double> out(w.size());
  for (std::size_t j = 0; j < w.rows(); ++j)
    for (std::size_t c = 0; c < w.cols(); ++c) out[wcol(j, c, w.rows())] = w(j, c);
  return out;
}

inline Matrix unvec(const std::vector<double>& v, std::size_t p, std::size_t C) {
  Matrix w(p, C);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t c = 0; c < C; ++c) w(j, c) = v[wcol(j, c, p)];
  return w;
}

inline std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) y[r] += a(r, c) * x[c];
  return y;
}

inline std::vector<double> matvec_t(const Matrix& a, const std::vector<double>& x) {
  std::vector<double> y(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) y[c] += a(r, c) * x[r];
  return y;
}

inline Matrix gram(const Matrix& a) {
  Matrix g(a.cols(), a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t i = 0; i < a.cols(); ++i)
      for (std::size_t j = 0; j < a.cols(); ++j) g(i, j) += a(r, i) * a(r, j);
  return g;
}

/// Cross-entropy written straight from its definition (no max shift, so only
/// use with moderate scores).
inline double naive_softmax_loss(const Matrix& w, const air::Dataset& d, const std::vector<std::size_t>& idx) {
  double total = 0.0;
  for (std::size_t i : idx) {
    std::vector<double> s(d.num_classes, 0.0);
    for (std::size_t c = 0; c < d.num_classes; ++c)
      for (std::size_t j = 0; j < d.dim(); ++j) s[c] += w(j, c) * d.x()(i, j);
    double denom = 0.0;
    for (double v : s) denom += std::exp(v);
    total -= std::log(std::exp(s[d.label(i)]) / denom);
  }
  return total;
}

inline double naive_hinge_loss(const Matrix& w, const air::Dataset& d, const std::vector<std::size_t>& idx,
                               double margin) {
  double total = 0.0;
  for (std::size_t i : idx)
    for (std::size_t c = 0; c < d.num_classes; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d.dim(); ++j) s += w(j, c) * d.x()(i, j);
      const double sign = c == d.label(i) ? 1.0 : -1.0;
      total += std::max(0.0, margin - sign * s);
    }
  return total;
}

/// Central differences of f at w with step h.
inline Matrix finite_difference(const std::function<double(const Matrix&)>& f, const Matrix& w, double h) {
  Matrix g(w.rows(), w.cols());
  for (std::size_t e = 0; e < w.size(); ++e) {
    Matrix a = w, b = w;
    a.values()[e] += h;
    b.values()[e] -= h;
    g.values()[e] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline double max_relative_error(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t e = 0; e < a.size(); ++e) {
    const double x = a.values()[e], y = b.values()[e];
    const double scale = std::max({1.0, std::abs(x), std::abs(y)});
    worst = std::max(worst, std::abs(x - y) / scale);
  }
  return worst;
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> solve(Matrix a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(piv, c));
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= a(r, c) * x[c];
    x[r] = s / a(r, r);
  }
  return x;
}

/// argmin_y alpha ||y|| + 0.5 ||y - z||^2 by damped Newton on the smoothed
/// objective alpha sqrt(||y||^2 + mu^2) + 0.5 ||y - z||^2. The smoothing
/// moves the minimizer by at most sqrt(2 alpha mu).
inline std::vector<double> brute_force_prox(const std::vector<double>& z, double alpha, double mu = 1e-15) {
  const std::size_t d = z.size();
  auto objective = [&](const std::vector<double>& y) {
    double ny = 0.0, dz = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      ny += y[i] * y[i];
      dz += (y[i] - z[i]) * (y[i] - z[i]);
    }
    return alpha * std::sqrt(ny + mu * mu) + 0.5 * dz;
  };
  std::vector<double> y = z;
  for (int it = 0; it < 500; ++it) {
    double ny = 0.0;
    for (double v : y) ny += v * v;
    const double s = std::sqrt(ny + mu * mu);
    std::vector<double> grad(d);
    Matrix hess(d, d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      grad[i] = alpha * y[i] / s + (y[i] - z[i]);
      for (std::size_t j = 0; j < d; ++j)
        hess(i, j) = (i == j ? 1.0 + alpha / s : 0.0) - alpha * y[i] * y[j] / (s * s * s);
    }
    double gn = 0.0;
    for (double g : grad) gn += g * g;
    if (std::sqrt(gn) < 1e-14) break;
    const auto step = solve(hess, grad);
    const double f0 = objective(y);
    double t = 1.0;
    std::vector<double> cand(d);
    for (int ls = 0; ls < 80; ++ls, t *= 0.5) {
      for (std::size_t i = 0; i < d; ++i) cand[i] = y[i] - t * step[i];
      if (objective(cand) <= f0) break;
    }
    if (cand == y) break;
    y = cand;
  }
  return y;
}

/// Group soft-thresholding written from the case analysis of its optimality
/// condition, kept separate from the library routine.
inline std::vector<double> reference_prox(const std::vector<double>& z, double alpha) {
  double nz = 0.0;
  for (double v : z) nz += v * v;
  nz = std::sqrt(nz);
  std::vector<double> out(z.size(), 0.0);
  if (nz <= alpha) return out;
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - alpha * z[i] / nz;
  return out;
}

/// Full AIR objective from scratch: softmax loss + lambda1 ||w||^2 +
/// sum over all (i, c) of lambda_g ||x_i .* w_c||.
inline double air_objective(const Matrix& w, const air::Dataset& d, double lambda1, double lambda_g) {
  std::vector<std::size_t> all(d.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  double f = naive_softmax_loss(w, d, all);
  for (double v : w.values()) f += lambda1 * v * v;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t c = 0; c < d.num_classes; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d.dim(); ++j) s += std::pow(d.x()(i, j) * w(j, c), 2);
      f += lambda_g * std::sqrt(s);
    }
  return f;
}

/// Deterministic proximal-subgradient method on the AIR objective: a
/// subgradient step on loss + group norm with step a / sqrt(k + 1), then the
/// exact prox of the ridge term. Returns the best objective seen.
inline double proximal_subgradient_reference(const air::Dataset& d, double lambda1, double lambda_g,
                                             std::size_t iterations, double a = 0.05) {
  const std::size_t n = d.size(), p = d.dim(), C = d.num_classes;
  Matrix w(p, C, 0.0);
  double best = air_objective(w, d, lambda1, lambda_g);
  Matrix g(p, C);
  std::vector<double> s(C);
  for (std::size_t k = 0; k < iterations; ++k) {
    g.fill(0.0);
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -1e300;
      for (std::size_t c = 0; c < C; ++c) {
        s[c] = 0.0;
        for (std::size_t j = 0; j < p; ++j) s[c] += w(j, c) * d.x()(i, j);
        mx = std::max(mx, s[c]);
      }
      double z = 0.0;
      for (std::size_t c = 0; c < C; ++c) z += std::exp(s[c] - mx);
      f += std::log(z) + mx - s[d.label(i)];
      for (std::size_t c = 0; c < C; ++c) {
        const double r = std::exp(s[c] - mx) / z - (c == d.label(i) ? 1.0 : 0.0);
        double gn = 0.0;
        for (std::size_t j = 0; j < p; ++j) gn += std::pow(d.x()(i, j) * w(j, c), 2);
        gn = std::sqrt(gn);
        f += lambda_g * gn;
        for (std::size_t j = 0; j < p; ++j) {
          g(j, c) += r * d.x()(i, j);
          if (gn > 0.0) g(j, c) += lambda_g * d.x()(i, j) * d.x()(i, j) * w(j, c) / gn;
        }
      }
    }
    for (double v : w.values()) f += lambda1 * v * v;
    best = std::min(best, f);
    const double step = a / std::sqrt(static_cast<double>(k) + 1.0);
    for (std::size_t e = 0; e < w.size(); ++e)
      w.values()[e] = (w.values()[e] - step * g.values()[e]) / (1.0 + 2.0 * step * lambda1);
  }
  return std::min(best, air_objective(w, d, lambda1, lambda_g));
}

inline Matrix random_matrix(air::Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (auto& v : m.values()) v = scale * rng.normal();
  return m;
}

inline air::Dataset random_dataset(air::Rng& rng, std::size_t n, std::size_t p, std::size_t C, double scale = 1.0) {
  Matrix x = random_matrix(rng, n, p, scale);
  std::vector<air::Label> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<air::Label>(i < C ? i : rng.index(C));
  return air::Dataset::single_label(std::move(x), y, C);
}

}  // namespace oracle
