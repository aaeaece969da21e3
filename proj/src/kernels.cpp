#include <atomic>

#include "mixpro/kernels.hpp"

namespace mixpro::kernels {

namespace {
std::atomic<Mode> g_mode{Mode::parallel};
}

Mode mode() { return g_mode.load(std::memory_order_relaxed); }

void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }

#define MIXPRO_DISPATCH(call)                \
    if (mode() == Mode::parallel) {          \
        parallel::call;                      \
    } else {                                 \
        serial::call;                        \
    }

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    MIXPRO_DISPATCH(matmul(a, b, c, m, k, n))
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    MIXPRO_DISPATCH(matmul_nt(a, b, c, m, k, n))
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    MIXPRO_DISPATCH(matmul_tn(a, b, c, m, k, n))
}

void add(const double* a, const double* b, double* c, std::size_t n) { MIXPRO_DISPATCH(add(a, b, c, n)) }

void mul(const double* a, const double* b, double* c, std::size_t n) { MIXPRO_DISPATCH(mul(a, b, c, n)) }

void axpby(double alpha, const double* a, double beta, const double* b, double* c, std::size_t n) {
    MIXPRO_DISPATCH(axpby(alpha, a, beta, b, c, n))
}

void scale(double alpha, const double* a, double* c, std::size_t n) {
    MIXPRO_DISPATCH(scale(alpha, a, c, n))
}

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols) {
    MIXPRO_DISPATCH(softmax_rows(x, y, rows, cols))
}

void masked_softmax_rows(const double* x, const double* keep, std::size_t keep_stride, double* y,
                         std::size_t rows, std::size_t cols) {
    MIXPRO_DISPATCH(masked_softmax_rows(x, keep, keep_stride, y, rows, cols))
}

void layer_norm_rows(const double* x, const double* gamma, const double* beta, double eps, double* y,
                     double* xhat, double* rstd, std::size_t rows, std::size_t cols) {
    MIXPRO_DISPATCH(layer_norm_rows(x, gamma, beta, eps, y, xhat, rstd, rows, cols))
}

void gelu(const double* x, double* y, std::size_t n) { MIXPRO_DISPATCH(gelu(x, y, n)) }

void gelu_backward(const double* x, const double* dy, double* dx, std::size_t n) {
    MIXPRO_DISPATCH(gelu_backward(x, dy, dx, n))
}

#undef MIXPRO_DISPATCH

}  // namespace mixpro::kernels
