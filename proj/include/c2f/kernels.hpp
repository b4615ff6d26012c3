#pragma once

#include <cstdint>

namespace c2f::kern {

/// Geometry of one 2-D cross-correlation. Output extents are derived by
/// the caller: out_h = (in_h + 2*pad - k)/stride + 1, likewise out_w.
struct ConvDims {
  int in_c, in_h, in_w;
  int out_c, k, stride, pad;
  int out_h, out_w;
};

enum class Backend { serial, parallel };

Backend backend();
void set_backend(Backend b);
/// Convenience: 0 keeps the OpenMP default thread count.
void set_threads(int n);

// Dispatch layer. All buffers are row-major double arrays sized by the
// caller. Functions named *_acc_* accumulate (+=) into their destination;
// the rest overwrite. Parallel and serial backends produce bit-identical
// results: parallelism is only ever across independent output elements
// and the per-element accumulation order is shared by both.

void matmul(const double* a, const double* b, double* out, int m, int k, int n);
void matmul_acc_da(const double* gout, const double* b, double* da, int m, int k, int n);
void matmul_acc_db(const double* a, const double* gout, double* db, int m, int k, int n);

void matvec(const double* w, const double* x, double* out, int m, int k);
void matvec_acc_dw(const double* g, const double* x, double* dw, int m, int k);
void matvec_acc_dx(const double* w, const double* g, double* dx, int m, int k);

void conv2d(const double* in, const double* w, const double* bias, double* out, const ConvDims& d);
void conv2d_acc_din(const double* gout, const double* w, double* din, const ConvDims& d);
void conv2d_acc_dw(const double* gout, const double* in, double* dw, const ConvDims& d);
void conv2d_acc_dbias(const double* gout, double* dbias, const ConvDims& d);

void maxpool2x2(const double* in, double* out, std::int32_t* argmax, int c, int h, int w);
void maxpool2x2_acc_din(const double* gout, const std::int32_t* argmax, double* din, int c, int out_h, int out_w);

void upsample_nearest(const double* in, double* out, int c, int h, int w, int factor);
void upsample_nearest_acc_din(const double* gout, double* din, int c, int h, int w, int factor);

void relu(const double* x, double* y, std::int64_t n);
void relu_acc_dx(const double* g, const double* x, double* dx, std::int64_t n);
void sigmoid(const double* x, double* y, std::int64_t n);
void sigmoid_acc_dx(const double* g, const double* y, double* dx, std::int64_t n);
void tanh(const double* x, double* y, std::int64_t n);
void tanh_acc_dx(const double* g, const double* y, double* dx, std::int64_t n);

void add(const double* a, const double* b, double* out, std::int64_t n);
void mul(const double* a, const double* b, double* out, std::int64_t n);
void scale(const double* a, double s, double* out, std::int64_t n);
void acc(const double* x, double* y, std::int64_t n);                    // y += x
void acc_scaled(const double* x, double s, double* y, std::int64_t n);   // y += s*x
void acc_mul(const double* a, const double* b, double* y, std::int64_t n);  // y += a*b

// Reductions are kept serial in both backends so results never depend on
// the thread count.
double sum(const double* x, std::int64_t n);
double dot(const double* a, const double* b, std::int64_t n);

// The serial reference implementations, exposed for tests and benchmarks.
namespace serial {
void matmul(const double* a, const double* b, double* out, int m, int k, int n);
void matmul_acc_da(const double* gout, const double* b, double* da, int m, int k, int n);
void matmul_acc_db(const double* a, const double* gout, double* db, int m, int k, int n);
void matvec(const double* w, const double* x, double* out, int m, int k);
void matvec_acc_dw(const double* g, const double* x, double* dw, int m, int k);
void matvec_acc_dx(const double* w, const double* g, double* dx, int m, int k);
void conv2d(const double* in, const double* w, const double* bias, double* out, const ConvDims& d);
void conv2d_acc_din(const double* gout, const double* w, double* din, const ConvDims& d);
void conv2d_acc_dw(const double* gout, const double* in, double* dw, const ConvDims& d);
void conv2d_acc_dbias(const double* gout, double* dbias, const ConvDims& d);
void maxpool2x2(const double* in, double* out, std::int32_t* argmax, int c, int h, int w);
void maxpool2x2_acc_din(const double* gout, const std::int32_t* argmax, double* din, int c, int out_h, int out_w);
void upsample_nearest(const double* in, double* out, int c, int h, int w, int factor);
void upsample_nearest_acc_din(const double* gout, double* din, int c, int h, int w, int factor);
void relu(const double* x, double* y, std::int64_t n);
void relu_acc_dx(const double* g, const double* x, double* dx, std::int64_t n);
void sigmoid(const double* x, double* y, std::int64_t n);
void sigmoid_acc_dx(const double* g, const double* y, double* dx, std::int64_t n);
void tanh(const double* x, double* y, std::int64_t n);
void tanh_acc_dx(const double* g, const double* y, double* dx, std::int64_t n);
void add(const double* a, const double* b, double* out, std::int64_t n);
void mul(const double* a, const double* b, double* out, std::int64_t n);
void scale(const double* a, double s, double* out, std::int64_t n);
void acc(const double* x, double* y, std::int64_t n);
void acc_scaled(const double* x, double s, double* y, std::int64_t n);
void acc_mul(const double* a, const double* b, double* y, std::int64_t n);
}  // namespace serial

// OpenMP implementations with the same contracts.
namespace omp {
void matmul(const double* a, const double* b, double* out, int m, int k, int n);
void matmul_acc_da(const double* gout, const double* b, double* da, int m, int k, int n);
void matmul_acc_db(const double* a, const double* gout, double* db, int m, int k, int n);
void matvec(const double* w, const double* x, double* out, int m, int k);
void matvec_acc_dw(const double* g, const double* x, double* dw, int m, int k);
void matvec_acc_dx(const double* w, const double* g, double* dx, int m, int k);
void conv2d(const double* in, const double* w, const double* bias, double* out, const ConvDims& d);
void conv2d_acc_din(const double* gout, const double* w, double* din, const ConvDims& d);
void conv2d_acc_dw(const double* gout, const double* in, double* dw, const ConvDims& d);
void conv2d_acc_dbias(const double* gout, double* dbias, const ConvDims& d);
void maxpool2x2(const double* in, double* out, std::int32_t* argmax, int c, int h, int w);
void maxpool2x2_acc_din(const double* gout, const std::int32_t* argmax, double* din, int c, int out_h, int out_w);
void upsample_nearest(const double* in, double* out, int c, int h, int w, int factor);
void upsample_nearest_acc_din(const double* gout, double* din, int c, int h, int w, int factor);
void relu(const double* x, double* y, std::int64_t n);
void relu_acc_dx(const double* g, const double* x, double* dx, std::int64_t n);
void sigmoid(const double* x, double* y, std::int64_t n);
void sigmoid_acc_dx(const double* g, const double* y, double* dx, std::int64_t n);
void tanh(const double* x, double* y, std::int64_t n);
void tanh_acc_dx(const double* g, const double* y, double* dx, std::int64_t n);
void add(const double* a, const double* b, double* out, std::int64_t n);
void mul(const double* a, const double* b, double* out, std::int64_t n);
void scale(const double* a, double s, double* out, std::int64_t n);
void acc(const double* x, double* y, std::int64_t n);
void acc_scaled(const double* x, double s, double* y, std::int64_t n);
void acc_mul(const double* a, const double* b, double* y, std::int64_t n);
}  // namespace omp

}  // namespace c2f::kern
