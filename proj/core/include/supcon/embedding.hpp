#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace supcon {

// Norm guard: rows with Euclidean norm below this cannot be normalized.
inline constexpr double kNormEps = 1e-12;

// Dense row-major matrix of 64-bit floats.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows * cols entries, row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }

  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }
};

// A matrix whose rows all have unit Euclidean norm (within 1e-12).
class UnitRows {
 public:
  // Validates the row norms; throws Error if any row is off the sphere.
  explicit UnitRows(Matrix m);

  const Matrix& matrix() const { return m_; }
  std::size_t rows() const { return m_.rows; }
  std::size_t cols() const { return m_.cols; }
  std::span<const double> row(std::size_t i) const { return m_.row(i); }

 private:
  struct AlreadyNormalized {};
  UnitRows(Matrix m, AlreadyNormalized) : m_(std::move(m)) {}
  friend UnitRows normalize_rows(const Matrix&, double);

  Matrix m_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

// Scales every row of w onto the unit sphere. Rows with norm below eps are
// rejected with DegenerateRowError; non-finite entries are rejected too.
UnitRows normalize_rows(const Matrix& w, double eps = kNormEps);

// Gram matrix of the rows: out[i][j] = z_i . z_j.
Matrix pairwise_inner(const UnitRows& z);

// Applies the Jacobian of w -> w/|w| to an upstream gradient g_z:
// returns (g_z - (z . g_z) z) / |w| with z = w/|w|. The result is
// orthogonal to w.
std::vector<double> normalization_jacobian_apply(std::span<const double> w,
                                                 std::span<const double> g_z,
                                                 double eps = kNormEps);

}  // namespace supcon
