#include "unirel/matrix.hpp"

#include <cmath>
#include <sstream>

#include "unirel/error.hpp"

namespace unirel {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> init) {
  rows = init.size();
  cols = rows ? init.begin()->size() : 0;
  data.reserve(rows * cols);
  for (const auto& row : init) {
    if (row.size() != cols) throw contract_error("matrix literal has ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

bool operator==(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

bool is_finite(const Matrix& m) {
  for (double v : m.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.same_shape(b)) return;
  std::ostringstream os;
  os << op << ": shape mismatch, " << a.rows << "x" << a.cols << " vs " << b.rows << "x" << b.cols;
  throw contract_error(os.str());
}

}  // namespace unirel
