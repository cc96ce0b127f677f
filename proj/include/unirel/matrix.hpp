#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace unirel {

// Dense row-major matrix of doubles. All public operations in linalg.hpp keep
// entries finite; shape errors throw Error(Errc::Contract).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> init);

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return rows * cols; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  static Matrix identity(std::size_t n);
};

bool operator==(const Matrix& a, const Matrix& b);

// True when every entry is finite (no NaN / infinity).
bool is_finite(const Matrix& m);

// Throws a contract error naming both shapes unless a and b have equal shape.
void require_same_shape(const char* op, const Matrix& a, const Matrix& b);

}  // namespace unirel
