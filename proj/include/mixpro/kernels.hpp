#pragma once

#include <cstddef>

// Dense kernels backing the tape ops. Every kernel exists twice: a plain serial
// reference under kernels::serial and an OpenMP version under kernels::parallel.
// The parallel loops split work over independent output elements only, leaving
// each element's inner reduction order untouched, so both backends produce
// bitwise-identical results. The unqualified entry points dispatch on the
// process-wide mode (default: parallel).
namespace mixpro::kernels {

enum class Mode { serial, parallel };

Mode mode();
void set_mode(Mode m);

namespace serial {

// c[m x n] = a[m x k] * b[k x n]
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
// c[m x n] = a[m x k] * b[n x k]^T
void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
// c[m x n] = a[k x m]^T * b[k x n]
void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void add(const double* a, const double* b, double* c, std::size_t n);
void mul(const double* a, const double* b, double* c, std::size_t n);
void axpby(double alpha, const double* a, double beta, const double* b, double* c, std::size_t n);
void scale(double alpha, const double* a, double* c, std::size_t n);
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols);
// keep[j] (keep_stride == 0) or keep[r*cols + j] (keep_stride == cols) selects
// which columns row r may attend to; dropped columns get probability 0.
// Each row must keep at least one column.
void masked_softmax_rows(const double* x, const double* keep, std::size_t keep_stride, double* y,
                         std::size_t rows, std::size_t cols);
// y = gamma * xhat + beta per row; xhat and rstd are saved for the backward pass.
void layer_norm_rows(const double* x, const double* gamma, const double* beta, double eps, double* y,
                     double* xhat, double* rstd, std::size_t rows, std::size_t cols);
void gelu(const double* x, double* y, std::size_t n);
void gelu_backward(const double* x, const double* dy, double* dx, std::size_t n);

}  // namespace serial

namespace parallel {

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void add(const double* a, const double* b, double* c, std::size_t n);
void mul(const double* a, const double* b, double* c, std::size_t n);
void axpby(double alpha, const double* a, double beta, const double* b, double* c, std::size_t n);
void scale(double alpha, const double* a, double* c, std::size_t n);
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols);
void masked_softmax_rows(const double* x, const double* keep, std::size_t keep_stride, double* y,
                         std::size_t rows, std::size_t cols);
void layer_norm_rows(const double* x, const double* gamma, const double* beta, double eps, double* y,
                     double* xhat, double* rstd, std::size_t rows, std::size_t cols);
void gelu(const double* x, double* y, std::size_t n);
void gelu_backward(const double* x, const double* dy, double* dx, std::size_t n);

}  // namespace parallel

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void add(const double* a, const double* b, double* c, std::size_t n);
void mul(const double* a, const double* b, double* c, std::size_t n);
void axpby(double alpha, const double* a, double beta, const double* b, double* c, std::size_t n);
void scale(double alpha, const double* a, double* c, std::size_t n);
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols);
void masked_softmax_rows(const double* x, const double* keep, std::size_t keep_stride, double* y,
                         std::size_t rows, std::size_t cols);
void layer_norm_rows(const double* x, const double* gamma, const double* beta, double eps, double* y,
                     double* xhat, double* rstd, std::size_t rows, std::size_t cols);
void gelu(const double* x, double* y, std::size_t n);
void gelu_backward(const double* x, const double* dy, double* dx, std::size_t n);

}  // namespace mixpro::kernels
