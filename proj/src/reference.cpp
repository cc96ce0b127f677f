#include "unirel/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "unirel/error.hpp"

namespace unirel::ref {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw contract_error("ref::matmul: inner dimensions differ");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  return c;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    long double mx = m.at(i, 0);
    for (std::size_t j = 1; j < m.cols; ++j) mx = std::max<long double>(mx, m.at(i, j));
    // log-space: log(sum exp(x - mx)), then exponentiate per entry
    long double sum = 0.0L;
    for (std::size_t j = 0; j < m.cols; ++j) sum += expl(static_cast<long double>(m.at(i, j)) - mx);
    const long double logz = logl(sum) + mx;
    for (std::size_t j = 0; j < m.cols; ++j)
      out.at(i, j) = static_cast<double>(expl(static_cast<long double>(m.at(i, j)) - logz));
  }
  return out;
}

double hadamard_sum(const Matrix& a, const Matrix& b) {
  require_same_shape("ref::hadamard_sum", a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) s += a.at(i, j) * b.at(i, j);
  return s;
}

double rel_unified(const Matrix& d_like, const Matrix& q, const Matrix& a, double z) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) {
      double dq = 0.0;
      for (std::size_t k = 0; k < d_like.rows; ++k) dq += d_like.at(k, i) * q.at(k, j);
      s += dq * a.at(i, j);
    }
  return s / z;
}

std::vector<std::size_t> nearest_rows(const Matrix& pool, std::span<const double> probe,
                                      std::size_t k) {
  std::vector<double> score(pool.rows);
  for (std::size_t i = 0; i < pool.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < pool.cols; ++j) s += pool.at(i, j) * probe[j];
    score[i] = s;
  }
  std::vector<std::size_t> order(pool.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  order.resize(std::min(k, order.size()));
  return order;
}

}  // namespace unirel::ref
