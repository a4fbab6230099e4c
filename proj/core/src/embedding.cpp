#include "supcon/embedding.hpp"

#include <cmath>
#include <string>

#include "supcon/errors.hpp"

namespace supcon {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

UnitRows::UnitRows(Matrix m) : m_(std::move(m)) {
  for (std::size_t i = 0; i < m_.rows; ++i) {
    const double n = norm(m_.row(i));
    if (std::abs(n - 1.0) > 1e-12) {
      throw Error("UnitRows: row " + std::to_string(i) + " has norm " +
                  std::to_string(n));
    }
  }
}

UnitRows normalize_rows(const Matrix& w, double eps) {
  Matrix out(w.rows, w.cols);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const auto row = w.row(i);
    for (double v : row) {
      if (!std::isfinite(v)) {
        throw Error("normalize_rows: non-finite entry in row " +
                    std::to_string(i));
      }
    }
    const double n = norm(row);
    if (n < eps) throw DegenerateRowError(i);
    auto dst = out.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) dst[k] = row[k] / n;
  }
  return UnitRows(std::move(out), UnitRows::AlreadyNormalized{});
}

Matrix pairwise_inner(const UnitRows& z) {
  const Matrix& m = z.matrix();
  Matrix out(m.rows, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double s = dot(m.row(i), m.row(j));
      out.at(i, j) = s;
      out.at(j, i) = s;
    }
  }
  return out;
}

std::vector<double> normalization_jacobian_apply(std::span<const double> w,
                                                 std::span<const double> g_z,
                                                 double eps) {
  const double n = norm(w);
  if (n < eps) throw DegenerateRowError(0);
  // z = w/|w|; out = (g_z - (z.g_z) z) / |w|
  std::vector<double> out(w.size());
  double zg = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) zg += (w[k] / n) * g_z[k];
  for (std::size_t k = 0; k < w.size(); ++k) {
    out[k] = (g_z[k] - zg * (w[k] / n)) / n;
  }
  return out;
}

}  // namespace supcon
