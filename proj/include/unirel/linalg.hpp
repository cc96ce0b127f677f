#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "unirel/matrix.hpp"

namespace unirel {

// Production kernels. Loops over independent output elements are OpenMP
// parallel; every element is computed by a single thread with a fixed-order
// inner loop, so results do not depend on the thread count.

// Standard matrix product. Throws on a.cols != b.rows, naming both shapes.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

// Row-wise softmax, stabilized by subtracting the row maximum. Tie rows
// (all-equal logits) come out exactly uniform.
Matrix softmax_rows(const Matrix& m);

// Softmax of `logits` restricted to positions with valid != 0; masked
// positions get exactly 0. Requires at least one valid position.
std::vector<double> softmax_masked(std::span<const double> logits,
                                   std::span<const std::uint8_t> valid);

// sum_ij a_ij * b_ij. Throws on shape mismatch.
double hadamard_sum(const Matrix& a, const Matrix& b);

struct RankOneFit {
  Matrix approx;          // every row equals the column-wise mean of the input
  double resid_frobenius; // ||A - R||_F
  double resid_one_inf;   // max over rows of the row l1 norm of A - R
};

// Frobenius-optimal row-constant rank-one approximation R = 1 r^T with r the
// column mean, plus the residual in both norms.
RankOneFit row_constant_rank_one(const Matrix& a);

double norm_frobenius(const Matrix& m);
// max over rows of the row l1 norm
double norm_one_inf(const Matrix& m);
// induced 1-norm: max over columns of the column l1 norm
double norm_one(const Matrix& m);

Matrix add(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double s);

// rank-one outer product u v^T
Matrix outer(std::span<const double> u, std::span<const double> v);

std::vector<double> matvec(const Matrix& m, std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);

std::vector<double> column(const Matrix& m, std::size_t j);
void set_column(Matrix& m, std::size_t j, std::span<const double> v);

}  // namespace unirel
