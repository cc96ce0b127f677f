#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "unirel/matrix.hpp"

namespace unirel::ref {

// Serial naive implementations, written independently of the kernels in
// linalg.hpp. Tests compare the two paths; the benchmark tool times them.

Matrix matmul(const Matrix& a, const Matrix& b);

// Softmax computed in log space with long-double accumulation: the
// extended-precision oracle for stability checks.
Matrix softmax_rows(const Matrix& m);

double hadamard_sum(const Matrix& a, const Matrix& b);

// Brute-force unified relevance: (1/z) * sum_ij d_i . q_j * a_ij over an
// explicit triple loop. d_like and q are d x M / d x N column-per-token.
double rel_unified(const Matrix& d_like, const Matrix& q, const Matrix& a, double z);

// Exhaustive scan for the k highest-dot-product rows of `pool` against
// `probe`; ties broken by lowest row index.
std::vector<std::size_t> nearest_rows(const Matrix& pool, std::span<const double> probe,
                                      std::size_t k);

}  // namespace unirel::ref
