#include <cmath>
#include <cstdint>

#include "mixpro/kernels.hpp"

// Same arithmetic as kernels::serial, with the outer (independent-output) loop
// handed to OpenMP. Inner reductions keep the serial order, so results are
// bitwise-identical to the reference. Tiny workloads skip the fork via if().
namespace mixpro::kernels::parallel {

namespace {
constexpr std::int64_t kMinWork = 16 * 1024;
}

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    const auto im = static_cast<std::int64_t>(m);
    const std::int64_t work = im * static_cast<std::int64_t>(k * n);
#pragma omp parallel for schedule(static) if (work >= kMinWork)
    for (std::int64_t i = 0; i < im; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    const auto im = static_cast<std::int64_t>(m);
    const std::int64_t work = im * static_cast<std::int64_t>(k * n);
#pragma omp parallel for schedule(static) if (work >= kMinWork)
    for (std::int64_t i = 0; i < im; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * n + j] = acc;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    const auto im = static_cast<std::int64_t>(m);
    const std::int64_t work = im * static_cast<std::int64_t>(k * n);
#pragma omp parallel for schedule(static) if (work >= kMinWork)
    for (std::int64_t i = 0; i < im; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

void add(const double* a, const double* b, double* c, std::size_t n) {
    const auto in = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (in >= kMinWork)
    for (std::int64_t i = 0; i < in; ++i) c[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* c, std::size_t n) {
    const auto in = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (in >= kMinWork)
    for (std::int64_t i = 0; i < in; ++i) c[i] = a[i] * b[i];
}

void axpby(double alpha, const double* a, double beta, const double* b, double* c, std::size_t n) {
    const auto in = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (in >= kMinWork)
    for (std::int64_t i = 0; i < in; ++i) c[i] = alpha * a[i] + beta * b[i];
}

void scale(double alpha, const double* a, double* c, std::size_t n) {
    const auto in = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (in >= kMinWork)
    for (std::int64_t i = 0; i < in; ++i) c[i] = alpha * a[i];
}

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols) {
    const auto ir = static_cast<std::int64_t>(rows);
    const std::int64_t work = ir * static_cast<std::int64_t>(cols);
#pragma omp parallel for schedule(static) if (work >= kMinWork)
    for (std::int64_t r = 0; r < ir; ++r) {
        const double* xr = x + r * cols;
        double* yr = y + r * cols;
        double mx = xr[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        for (std::size_t j = 0; j < cols; ++j) yr[j] /= sum;
    }
}

void masked_softmax_rows(const double* x, const double* keep, std::size_t keep_stride, double* y,
                         std::size_t rows, std::size_t cols) {
    const auto ir = static_cast<std::int64_t>(rows);
    const std::int64_t work = ir * static_cast<std::int64_t>(cols);
#pragma omp parallel for schedule(static) if (work >= kMinWork)
    for (std::int64_t r = 0; r < ir; ++r) {
        const double* xr = x + r * cols;
        const double* kr = keep + r * keep_stride;
        double* yr = y + r * cols;
        double mx = -1e300;
        for (std::size_t j = 0; j < cols; ++j) {
            if (kr[j] != 0.0 && xr[j] > mx) mx = xr[j];
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            yr[j] = (kr[j] != 0.0) ? std::exp(xr[j] - mx) : 0.0;
            sum += yr[j];
        }
        for (std::size_t j = 0; j < cols; ++j) yr[j] /= sum;
    }
}

void layer_norm_rows(const double* x, const double* gamma, const double* beta, double eps, double* y,
                     double* xhat, double* rstd, std::size_t rows, std::size_t cols) {
    const auto ir = static_cast<std::int64_t>(rows);
    const std::int64_t work = ir * static_cast<std::int64_t>(cols);
#pragma omp parallel for schedule(static) if (work >= kMinWork)
    for (std::int64_t r = 0; r < ir; ++r) {
        const double* xr = x + r * cols;
        double* yr = y + r * cols;
        double* hr = xhat + r * cols;
        double mean = 0.0;
        for (std::size_t j = 0; j < cols; ++j) mean += xr[j];
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            double d = xr[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        double rs = 1.0 / std::sqrt(var + eps);
        rstd[r] = rs;
        for (std::size_t j = 0; j < cols; ++j) {
            hr[j] = (xr[j] - mean) * rs;
            yr[j] = gamma[j] * hr[j] + beta[j];
        }
    }
}

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

void gelu(const double* x, double* y, std::size_t n) {
    const auto in = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (in >= kMinWork)
    for (std::int64_t i = 0; i < in; ++i) {
        y[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * kInvSqrt2));
    }
}

void gelu_backward(const double* x, const double* dy, double* dx, std::size_t n) {
    const auto in = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (in >= kMinWork)
    for (std::int64_t i = 0; i < in; ++i) {
        double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
        dx[i] = dy[i] * (cdf + x[i] * pdf);
    }
}

}  // namespace mixpro::kernels::parallel
