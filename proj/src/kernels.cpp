#include <atomic>

#include <omp.h>

#include "c2f/kernels.hpp"

namespace c2f::kern {

namespace {
std::atomic<Backend> g_backend{Backend::parallel};
}

Backend backend() { return g_backend.load(std::memory_order_relaxed); }
void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

#define C2F_DISPATCH(fn, ...)                  \
  do {                                         \
    if (backend() == Backend::parallel) {      \
      omp::fn(__VA_ARGS__);                    \
    } else {                                   \
      serial::fn(__VA_ARGS__);                 \
    }                                          \
  } while (0)

void matmul(const double* a, const double* b, double* out, int m, int k, int n) {
  C2F_DISPATCH(matmul, a, b, out, m, k, n);
}
void matmul_acc_da(const double* gout, const double* b, double* da, int m, int k, int n) {
  C2F_DISPATCH(matmul_acc_da, gout, b, da, m, k, n);
}
void matmul_acc_db(const double* a, const double* gout, double* db, int m, int k, int n) {
  C2F_DISPATCH(matmul_acc_db, a, gout, db, m, k, n);
}
void matvec(const double* w, const double* x, double* out, int m, int k) {
  C2F_DISPATCH(matvec, w, x, out, m, k);
}
void matvec_acc_dw(const double* g, const double* x, double* dw, int m, int k) {
  C2F_DISPATCH(matvec_acc_dw, g, x, dw, m, k);
}
void matvec_acc_dx(const double* w, const double* g, double* dx, int m, int k) {
  C2F_DISPATCH(matvec_acc_dx, w, g, dx, m, k);
}
void conv2d(const double* in, const double* w, const double* bias, double* out, const ConvDims& d) {
  C2F_DISPATCH(conv2d, in, w, bias, out, d);
}
void conv2d_acc_din(const double* gout, const double* w, double* din, const ConvDims& d) {
  C2F_DISPATCH(conv2d_acc_din, gout, w, din, d);
}
void conv2d_acc_dw(const double* gout, const double* in, double* dw, const ConvDims& d) {
  C2F_DISPATCH(conv2d_acc_dw, gout, in, dw, d);
}
void conv2d_acc_dbias(const double* gout, double* dbias, const ConvDims& d) {
  C2F_DISPATCH(conv2d_acc_dbias, gout, dbias, d);
}
void maxpool2x2(const double* in, double* out, std::int32_t* argmax, int c, int h, int w) {
  C2F_DISPATCH(maxpool2x2, in, out, argmax, c, h, w);
}
void maxpool2x2_acc_din(const double* gout, const std::int32_t* argmax, double* din, int c, int out_h, int out_w) {
  C2F_DISPATCH(maxpool2x2_acc_din, gout, argmax, din, c, out_h, out_w);
}
void upsample_nearest(const double* in, double* out, int c, int h, int w, int factor) {
  C2F_DISPATCH(upsample_nearest, in, out, c, h, w, factor);
}
void upsample_nearest_acc_din(const double* gout, double* din, int c, int h, int w, int factor) {
  C2F_DISPATCH(upsample_nearest_acc_din, gout, din, c, h, w, factor);
}
void relu(const double* x, double* y, std::int64_t n) { C2F_DISPATCH(relu, x, y, n); }
void relu_acc_dx(const double* g, const double* x, double* dx, std::int64_t n) {
  C2F_DISPATCH(relu_acc_dx, g, x, dx, n);
}
void sigmoid(const double* x, double* y, std::int64_t n) { C2F_DISPATCH(sigmoid, x, y, n); }
void sigmoid_acc_dx(const double* g, const double* y, double* dx, std::int64_t n) {
  C2F_DISPATCH(sigmoid_acc_dx, g, y, dx, n);
}
void tanh(const double* x, double* y, std::int64_t n) { C2F_DISPATCH(tanh, x, y, n); }
void tanh_acc_dx(const double* g, const double* y, double* dx, std::int64_t n) {
  C2F_DISPATCH(tanh_acc_dx, g, y, dx, n);
}
void add(const double* a, const double* b, double* out, std::int64_t n) { C2F_DISPATCH(add, a, b, out, n); }
void mul(const double* a, const double* b, double* out, std::int64_t n) { C2F_DISPATCH(mul, a, b, out, n); }
void scale(const double* a, double s, double* out, std::int64_t n) { C2F_DISPATCH(scale, a, s, out, n); }
void acc(const double* x, double* y, std::int64_t n) { C2F_DISPATCH(acc, x, y, n); }
void acc_scaled(const double* x, double s, double* y, std::int64_t n) { C2F_DISPATCH(acc_scaled, x, s, y, n); }
void acc_mul(const double* a, const double* b, double* y, std::int64_t n) { C2F_DISPATCH(acc_mul, a, b, y, n); }

#undef C2F_DISPATCH

double sum(const double* x, std::int64_t n) {
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double dot(const double* a, const double* b, std::int64_t n) {
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace c2f::kern
