#include "bvcl/kernels.hpp"

#include <stdexcept>

namespace bvcl::kernels {

void matmul(const double* a, std::size_t ar, std::size_t ac, const double* b,
            std::size_t bc, double* c) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(ar); ++i) {
        double* crow = c + static_cast<std::size_t>(i) * bc;
        for (std::size_t j = 0; j < bc; ++j) crow[j] = 0.0;
        const double* arow = a + static_cast<std::size_t>(i) * ac;
        for (std::size_t k = 0; k < ac; ++k) {
            const double av = arow[k];
            const double* brow = b + k * bc;
            for (std::size_t j = 0; j < bc; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_at(const double* a, std::size_t ar, std::size_t ac, const double* b,
               std::size_t bc, double* c) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(ac); ++i) {
        double* crow = c + static_cast<std::size_t>(i) * bc;
        for (std::size_t j = 0; j < bc; ++j) crow[j] = 0.0;
        for (std::size_t r = 0; r < ar; ++r) {
            const double av = a[r * ac + static_cast<std::size_t>(i)];
            const double* brow = b + r * bc;
            for (std::size_t j = 0; j < bc; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_bt(const double* a, std::size_t ar, std::size_t ac, const double* b,
               std::size_t br, double* c) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(ar); ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * ac;
        double* crow = c + static_cast<std::size_t>(i) * br;
        for (std::size_t j = 0; j < br; ++j) {
            const double* brow = b + j * ac;
            double acc = 0.0;
            for (std::size_t k = 0; k < ac; ++k) acc += arow[k] * brow[k];
            crow[j] = acc;
        }
    }
}

namespace {

void check_shapes(std::size_t need_rows, std::size_t need_cols, const Matrix& c) {
    if (c.rows != need_rows || c.cols != need_cols)
        throw std::invalid_argument("matmul: output shape mismatch");
}

}  // namespace

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimension mismatch");
    check_shapes(a.rows, b.cols, c);
    matmul(a.data.data(), a.rows, a.cols, b.data.data(), b.cols, c.data.data());
}

void matmul_at(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_at: row count mismatch");
    check_shapes(a.cols, b.cols, c);
    matmul_at(a.data.data(), a.rows, a.cols, b.data.data(), b.cols, c.data.data());
}

void matmul_bt(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_bt: column count mismatch");
    check_shapes(a.rows, b.rows, c);
    matmul_bt(a.data.data(), a.rows, a.cols, b.data.data(), b.rows, c.data.data());
}

void fill_normal(RandomStream& rs, Matrix& m) {
    const std::uint64_t base = rs.counter();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(m.size()); ++i) {
        m.data[static_cast<std::size_t>(i)] =
            rs.normal_at(base + 2 * static_cast<std::uint64_t>(i));
    }
    rs.skip(2 * static_cast<std::uint64_t>(m.size()));
}

namespace serial {

void matmul(const double* a, std::size_t ar, std::size_t ac, const double* b,
            std::size_t bc, double* c) {
    for (std::size_t i = 0; i < ar; ++i) {
        double* crow = c + i * bc;
        for (std::size_t j = 0; j < bc; ++j) crow[j] = 0.0;
        const double* arow = a + i * ac;
        for (std::size_t k = 0; k < ac; ++k) {
            const double av = arow[k];
            const double* brow = b + k * bc;
            for (std::size_t j = 0; j < bc; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_at(const double* a, std::size_t ar, std::size_t ac, const double* b,
               std::size_t bc, double* c) {
    for (std::size_t i = 0; i < ac; ++i) {
        double* crow = c + i * bc;
        for (std::size_t j = 0; j < bc; ++j) crow[j] = 0.0;
        for (std::size_t r = 0; r < ar; ++r) {
            const double av = a[r * ac + i];
            const double* brow = b + r * bc;
            for (std::size_t j = 0; j < bc; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_bt(const double* a, std::size_t ar, std::size_t ac, const double* b,
               std::size_t br, double* c) {
    for (std::size_t i = 0; i < ar; ++i) {
        const double* arow = a + i * ac;
        double* crow = c + i * br;
        for (std::size_t j = 0; j < br; ++j) {
            const double* brow = b + j * ac;
            double acc = 0.0;
            for (std::size_t k = 0; k < ac; ++k) acc += arow[k] * brow[k];
            crow[j] = acc;
        }
    }
}

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimension mismatch");
    check_shapes(a.rows, b.cols, c);
    matmul(a.data.data(), a.rows, a.cols, b.data.data(), b.cols, c.data.data());
}

void matmul_at(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_at: row count mismatch");
    check_shapes(a.cols, b.cols, c);
    matmul_at(a.data.data(), a.rows, a.cols, b.data.data(), b.cols, c.data.data());
}

void matmul_bt(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_bt: column count mismatch");
    check_shapes(a.rows, b.rows, c);
    matmul_bt(a.data.data(), a.rows, a.cols, b.data.data(), b.rows, c.data.data());
}

void fill_normal(RandomStream& rs, Matrix& m) {
    const std::uint64_t base = rs.counter();
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data[i] = rs.normal_at(base + 2 * static_cast<std::uint64_t>(i));
    rs.skip(2 * static_cast<std::uint64_t>(m.size()));
}

}  // namespace serial

}  // namespace bvcl::kernels
