#include "unirel/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include "unirel/error.hpp"

namespace unirel {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    std::ostringstream os;
    os << "matmul: inner dimensions differ, " << a.rows << "x" << a.cols << " vs " << b.rows
       << "x" << b.cols;
    throw contract_error(os.str());
  }
  Matrix c(a.rows, b.cols);
  const std::int64_t n = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static) if (a.rows * b.cols * a.cols > 4096)
  for (std::int64_t i = 0; i < n; ++i) {
    const double* arow = a.data.data() + static_cast<std::size_t>(i) * a.cols;
    double* crow = c.data.data() + static_cast<std::size_t>(i) * c.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.data.data() + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
  return t;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  const std::int64_t n = static_cast<std::int64_t>(m.rows);
#pragma omp parallel for schedule(static) if (m.rows * m.cols > 4096)
  for (std::int64_t i = 0; i < n; ++i) {
    const double* src = m.data.data() + static_cast<std::size_t>(i) * m.cols;
    double* dst = out.data.data() + static_cast<std::size_t>(i) * m.cols;
    double mx = src[0];
    for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, src[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) {
      dst[j] = std::exp(src[j] - mx);
      sum += dst[j];
    }
    for (std::size_t j = 0; j < m.cols; ++j) dst[j] /= sum;
  }
  return out;
}

std::vector<double> softmax_masked(std::span<const double> logits,
                                   std::span<const std::uint8_t> valid) {
  if (logits.size() != valid.size()) throw contract_error("softmax_masked: mask length mismatch");
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < logits.size(); ++j)
    if (valid[j]) mx = std::max(mx, logits[j]);
  if (mx == -std::numeric_limits<double>::infinity())
    throw contract_error("softmax_masked: no valid positions");
  std::vector<double> out(logits.size(), 0.0);
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (!valid[j]) continue;
    out[j] = std::exp(logits[j] - mx);
    sum += out[j];
  }
  for (std::size_t j = 0; j < logits.size(); ++j)
    if (valid[j]) out[j] /= sum;
  return out;
}

double hadamard_sum(const Matrix& a, const Matrix& b) {
  require_same_shape("hadamard_sum", a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) sum += a.data[i] * b.data[i];
  return sum;
}

RankOneFit row_constant_rank_one(const Matrix& a) {
  std::vector<double> mean(a.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) mean[j] += a.at(i, j);
  for (double& v : mean) v /= static_cast<double>(a.rows);

  RankOneFit fit;
  fit.approx = Matrix(a.rows, a.cols);
  double fro = 0.0;
  double one_inf = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double row_l1 = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) {
      fit.approx.at(i, j) = mean[j];
      const double r = a.at(i, j) - mean[j];
      fro += r * r;
      row_l1 += std::abs(r);
    }
    one_inf = std::max(one_inf, row_l1);
  }
  fit.resid_frobenius = std::sqrt(fro);
  fit.resid_one_inf = one_inf;
  return fit;
}

double norm_frobenius(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data) s += v * v;
  return std::sqrt(s);
}

double norm_one_inf(const Matrix& m) {
  double best = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) row += std::abs(m.at(i, j));
    best = std::max(best, row);
  }
  return best;
}

double norm_one(const Matrix& m) {
  double best = 0.0;
  for (std::size_t j = 0; j < m.cols; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) col += std::abs(m.at(i, j));
    best = std::max(best, col);
  }
  return best;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape("add", a, b);
  Matrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
  return c;
}

Matrix scale(const Matrix& m, double s) {
  Matrix c = m;
  for (double& v : c.data) v *= s;
  return c;
}

Matrix outer(std::span<const double> u, std::span<const double> v) {
  Matrix m(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) m.at(i, j) = u[i] * v[j];
  return m;
}

std::vector<double> matvec(const Matrix& m, std::span<const double> v) {
  if (m.cols != v.size()) {
    std::ostringstream os;
    os << "matvec: " << m.rows << "x" << m.cols << " vs vector of length " << v.size();
    throw contract_error(os.str());
  }
  std::vector<double> out(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += m.at(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw contract_error("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> column(const Matrix& m, std::size_t j) {
  std::vector<double> v(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) v[i] = m.at(i, j);
  return v;
}

void set_column(Matrix& m, std::size_t j, std::span<const double> v) {
  if (v.size() != m.rows) throw contract_error("set_column: length mismatch");
  for (std::size_t i = 0; i < m.rows; ++i) m.at(i, j) = v[i];
}

}  // namespace unirel
