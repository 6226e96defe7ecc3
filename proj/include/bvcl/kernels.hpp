#pragma once

#include "bvcl/matrix.hpp"
#include "bvcl/random.hpp"

namespace bvcl::kernels {

// OpenMP-parallel dense kernels. Each output element is computed by exactly
// one thread with a fixed summation order, so results are bit-identical to
// the serial reference for any thread count.
//
// Raw variants operate on row-major buffers so callers can pass views into
// larger parameter arrays.

// C (ar x bc) = A (ar x ac) * B (ac x bc)
void matmul(const double* a, std::size_t ar, std::size_t ac, const double* b,
            std::size_t bc, double* c);
// C (ac x bc) = A^T, A (ar x ac), B (ar x bc)
void matmul_at(const double* a, std::size_t ar, std::size_t ac, const double* b,
               std::size_t bc, double* c);
// C (ar x br) = A (ar x ac) * B^T, B (br x ac)
void matmul_bt(const double* a, std::size_t ar, std::size_t ac, const double* b,
               std::size_t br, double* c);

void matmul(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_at(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_bt(const Matrix& a, const Matrix& b, Matrix& c);

// Fill with standard normals; element i uses ticks (counter + 2i, counter + 2i + 1).
void fill_normal(RandomStream& rs, Matrix& m);

// Serial reference implementations, kept for testing and benchmarking.
namespace serial {
void matmul(const double* a, std::size_t ar, std::size_t ac, const double* b,
            std::size_t bc, double* c);
void matmul_at(const double* a, std::size_t ar, std::size_t ac, const double* b,
               std::size_t bc, double* c);
void matmul_bt(const double* a, std::size_t ar, std::size_t ac, const double* b,
               std::size_t br, double* c);
void matmul(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_at(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_bt(const Matrix& a, const Matrix& b, Matrix& c);
void fill_normal(RandomStream& rs, Matrix& m);
}  // namespace serial

}  // namespace bvcl::kernels
