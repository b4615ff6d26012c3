#include <algorithm>
#include <cmath>

#include "c2f/kernels.hpp"

// OpenMP backend. Work is split only across independent output slices
// (rows, channels, elements); the accumulation order within each output
// element is the same as in the serial reference, so results are
// bit-identical for any thread count.

namespace c2f::kern {

namespace {
inline int div_ceil(int a, int b) { return a > 0 ? (a + b - 1) / b : a / b; }
inline int div_floor(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }
}  // namespace

namespace omp {

void matmul(const double* a, const double* b, double* out, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (m > 1 && static_cast<std::int64_t>(m) * k * n > 16384)
  for (int i = 0; i < m; ++i) {
    double* out_row = out + static_cast<std::int64_t>(i) * n;
    std::fill(out_row, out_row + n, 0.0);
    const double* a_row = a + static_cast<std::int64_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double aip = a_row[p];
      const double* b_row = b + static_cast<std::int64_t>(p) * n;
      for (int j = 0; j < n; ++j) out_row[j] += aip * b_row[j];
    }
  }
}

void matmul_acc_da(const double* gout, const double* b, double* da, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (m > 1 && static_cast<std::int64_t>(m) * k * n > 16384)
  for (int i = 0; i < m; ++i) {
    const double* g_row = gout + static_cast<std::int64_t>(i) * n;
    double* da_row = da + static_cast<std::int64_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double* b_row = b + static_cast<std::int64_t>(p) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += g_row[j] * b_row[j];
      da_row[p] += acc;
    }
  }
}

void matmul_acc_db(const double* a, const double* gout, double* db, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (k > 1 && static_cast<std::int64_t>(m) * k * n > 16384)
  for (int p = 0; p < k; ++p) {
    double* db_row = db + static_cast<std::int64_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double aip = a[static_cast<std::int64_t>(i) * k + p];
      const double* g_row = gout + static_cast<std::int64_t>(i) * n;
      for (int j = 0; j < n; ++j) db_row[j] += aip * g_row[j];
    }
  }
}

void matvec(const double* w, const double* x, double* out, int m, int k) {
#pragma omp parallel for schedule(static) if (static_cast<std::int64_t>(m) * k > 16384)
  for (int i = 0; i < m; ++i) {
    const double* w_row = w + static_cast<std::int64_t>(i) * k;
    double acc = 0.0;
    for (int j = 0; j < k; ++j) acc += w_row[j] * x[j];
    out[i] = acc;
  }
}

void matvec_acc_dw(const double* g, const double* x, double* dw, int m, int k) {
#pragma omp parallel for schedule(static) if (static_cast<std::int64_t>(m) * k > 16384)
  for (int i = 0; i < m; ++i) {
    const double gi = g[i];
    double* dw_row = dw + static_cast<std::int64_t>(i) * k;
    for (int j = 0; j < k; ++j) dw_row[j] += gi * x[j];
  }
}

void matvec_acc_dx(const double* w, const double* g, double* dx, int m, int k) {
#pragma omp parallel for schedule(static) if (static_cast<std::int64_t>(m) * k > 16384)
  for (int j = 0; j < k; ++j) {
    double acc = 0.0;
    for (int i = 0; i < m; ++i) acc += w[static_cast<std::int64_t>(i) * k + j] * g[i];
    dx[j] += acc;
  }
}

void conv2d(const double* in, const double* w, const double* bias, double* out, const ConvDims& d) {
  const std::int64_t in_plane = static_cast<std::int64_t>(d.in_h) * d.in_w;
  const std::int64_t out_plane = static_cast<std::int64_t>(d.out_h) * d.out_w;
#pragma omp parallel for schedule(static) if (d.out_c > 1)
  for (int oc = 0; oc < d.out_c; ++oc) {
    double* out_c = out + oc * out_plane;
    const double bv = bias ? bias[oc] : 0.0;
    std::fill(out_c, out_c + out_plane, bv);
    for (int ic = 0; ic < d.in_c; ++ic) {
      const double* in_c = in + ic * in_plane;
      const double* w_cc = w + ((static_cast<std::int64_t>(oc) * d.in_c + ic) * d.k) * d.k;
      for (int ky = 0; ky < d.k; ++ky) {
        const int oy_lo = std::max(0, div_ceil(d.pad - ky, d.stride));
        const int oy_hi = std::min(d.out_h - 1, div_floor(d.in_h - 1 + d.pad - ky, d.stride));
        for (int kx = 0; kx < d.k; ++kx) {
          const double wv = w_cc[ky * d.k + kx];
          const int ox_lo = std::max(0, div_ceil(d.pad - kx, d.stride));
          const int ox_hi = std::min(d.out_w - 1, div_floor(d.in_w - 1 + d.pad - kx, d.stride));
          for (int oy = oy_lo; oy <= oy_hi; ++oy) {
            const int iy = oy * d.stride + ky - d.pad;
            const double* in_row = in_c + static_cast<std::int64_t>(iy) * d.in_w;
            double* out_row = out_c + static_cast<std::int64_t>(oy) * d.out_w;
            for (int ox = ox_lo; ox <= ox_hi; ++ox) {
              out_row[ox] += wv * in_row[ox * d.stride + kx - d.pad];
            }
          }
        }
      }
    }
  }
}

void conv2d_acc_din(const double* gout, const double* w, double* din, const ConvDims& d) {
  const std::int64_t in_plane = static_cast<std::int64_t>(d.in_h) * d.in_w;
  const std::int64_t out_plane = static_cast<std::int64_t>(d.out_h) * d.out_w;
#pragma omp parallel for schedule(static) if (d.in_c > 1)
  for (int ic = 0; ic < d.in_c; ++ic) {
    double* din_c = din + ic * in_plane;
    for (int oc = 0; oc < d.out_c; ++oc) {
      const double* g_c = gout + oc * out_plane;
      const double* w_cc = w + ((static_cast<std::int64_t>(oc) * d.in_c + ic) * d.k) * d.k;
      for (int ky = 0; ky < d.k; ++ky) {
        const int oy_lo = std::max(0, div_ceil(d.pad - ky, d.stride));
        const int oy_hi = std::min(d.out_h - 1, div_floor(d.in_h - 1 + d.pad - ky, d.stride));
        for (int kx = 0; kx < d.k; ++kx) {
          const double wv = w_cc[ky * d.k + kx];
          const int ox_lo = std::max(0, div_ceil(d.pad - kx, d.stride));
          const int ox_hi = std::min(d.out_w - 1, div_floor(d.in_w - 1 + d.pad - kx, d.stride));
          for (int oy = oy_lo; oy <= oy_hi; ++oy) {
            const int iy = oy * d.stride + ky - d.pad;
            double* din_row = din_c + static_cast<std::int64_t>(iy) * d.in_w;
            const double* g_row = g_c + static_cast<std::int64_t>(oy) * d.out_w;
            for (int ox = ox_lo; ox <= ox_hi; ++ox) {
              din_row[ox * d.stride + kx - d.pad] += wv * g_row[ox];
            }
          }
        }
      }
    }
  }
}

void conv2d_acc_dw(const double* gout, const double* in, double* dw, const ConvDims& d) {
  const std::int64_t in_plane = static_cast<std::int64_t>(d.in_h) * d.in_w;
  const std::int64_t out_plane = static_cast<std::int64_t>(d.out_h) * d.out_w;
#pragma omp parallel for schedule(static) if (d.out_c > 1)
  for (int oc = 0; oc < d.out_c; ++oc) {
    const double* g_c = gout + oc * out_plane;
    for (int ic = 0; ic < d.in_c; ++ic) {
      const double* in_c = in + ic * in_plane;
      double* dw_cc = dw + ((static_cast<std::int64_t>(oc) * d.in_c + ic) * d.k) * d.k;
      for (int ky = 0; ky < d.k; ++ky) {
        const int oy_lo = std::max(0, div_ceil(d.pad - ky, d.stride));
        const int oy_hi = std::min(d.out_h - 1, div_floor(d.in_h - 1 + d.pad - ky, d.stride));
        for (int kx = 0; kx < d.k; ++kx) {
          const int ox_lo = std::max(0, div_ceil(d.pad - kx, d.stride));
          const int ox_hi = std::min(d.out_w - 1, div_floor(d.in_w - 1 + d.pad - kx, d.stride));
          double acc = 0.0;
          for (int oy = oy_lo; oy <= oy_hi; ++oy) {
            const int iy = oy * d.stride + ky - d.pad;
            const double* in_row = in_c + static_cast<std::int64_t>(iy) * d.in_w;
            const double* g_row = g_c + static_cast<std::int64_t>(oy) * d.out_w;
            for (int ox = ox_lo; ox <= ox_hi; ++ox) {
              acc += g_row[ox] * in_row[ox * d.stride + kx - d.pad];
            }
          }
          dw_cc[ky * d.k + kx] += acc;
        }
      }
    }
  }
}

void conv2d_acc_dbias(const double* gout, double* dbias, const ConvDims& d) {
  const std::int64_t out_plane = static_cast<std::int64_t>(d.out_h) * d.out_w;
#pragma omp parallel for schedule(static) if (d.out_c > 1)
  for (int oc = 0; oc < d.out_c; ++oc) {
    const double* g_c = gout + oc * out_plane;
    double acc = 0.0;
    for (std::int64_t i = 0; i < out_plane; ++i) acc += g_c[i];
    dbias[oc] += acc;
  }
}

void maxpool2x2(const double* in, double* out, std::int32_t* argmax, int c, int h, int w) {
  const int oh = h / 2, ow = w / 2;
  const std::int64_t in_plane = static_cast<std::int64_t>(h) * w;
  const std::int64_t out_plane = static_cast<std::int64_t>(oh) * ow;
#pragma omp parallel for schedule(static) if (c > 1)
  for (int ch = 0; ch < c; ++ch) {
    const double* in_c = in + ch * in_plane;
    double* out_c = out + ch * out_plane;
    std::int32_t* am_c = argmax + ch * out_plane;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const int iy = 2 * oy, ix = 2 * ox;
        std::int64_t best = static_cast<std::int64_t>(iy) * w + ix;
        double bv = in_c[best];
        for (int ky = 0; ky < 2; ++ky) {
          for (int kx = 0; kx < 2; ++kx) {
            const std::int64_t idx = static_cast<std::int64_t>(iy + ky) * w + (ix + kx);
            if (in_c[idx] > bv) {
              bv = in_c[idx];
              best = idx;
            }
          }
        }
        out_c[static_cast<std::int64_t>(oy) * ow + ox] = bv;
        am_c[static_cast<std::int64_t>(oy) * ow + ox] = static_cast<std::int32_t>(ch * in_plane + best);
      }
    }
  }
}

void maxpool2x2_acc_din(const double* gout, const std::int32_t* argmax, double* din, int c, int out_h, int out_w) {
  // Pool windows are disjoint, so argmax targets are unique per output.
  const std::int64_t n = static_cast<std::int64_t>(c) * out_h * out_w;
#pragma omp parallel for schedule(static) if (n > 2048)
  for (std::int64_t i = 0; i < n; ++i) din[argmax[i]] += gout[i];
}

void upsample_nearest(const double* in, double* out, int c, int h, int w, int factor) {
  const int oh = h * factor, ow = w * factor;
#pragma omp parallel for schedule(static) if (c > 1)
  for (int ch = 0; ch < c; ++ch) {
    const double* in_c = in + static_cast<std::int64_t>(ch) * h * w;
    double* out_c = out + static_cast<std::int64_t>(ch) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      const double* in_row = in_c + static_cast<std::int64_t>(y / factor) * w;
      double* out_row = out_c + static_cast<std::int64_t>(y) * ow;
      for (int x = 0; x < ow; ++x) out_row[x] = in_row[x / factor];
    }
  }
}

void upsample_nearest_acc_din(const double* gout, double* din, int c, int h, int w, int factor) {
  const int ow = w * factor;
#pragma omp parallel for schedule(static) if (c > 1)
  for (int ch = 0; ch < c; ++ch) {
    const double* g_c = gout + static_cast<std::int64_t>(ch) * h * factor * ow;
    double* din_c = din + static_cast<std::int64_t>(ch) * h * w;
    for (int iy = 0; iy < h; ++iy) {
      for (int ix = 0; ix < w; ++ix) {
        double acc = 0.0;
        for (int fy = 0; fy < factor; ++fy) {
          const double* g_row = g_c + static_cast<std::int64_t>(iy * factor + fy) * ow;
          for (int fx = 0; fx < factor; ++fx) acc += g_row[ix * factor + fx];
        }
        din_c[static_cast<std::int64_t>(iy) * w + ix] += acc;
      }
    }
  }
}

void relu(const double* x, double* y, std::int64_t n) {
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_acc_dx(const double* g, const double* x, double* dx, std::int64_t n) {
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) dx[i] += g[i];
  }
}

void sigmoid(const double* x, double* y, std::int64_t n) {
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void sigmoid_acc_dx(const double* g, const double* y, double* dx, std::int64_t n) {
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
}

void tanh(const double* x, double* y, std::int64_t n) {
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void tanh_acc_dx(const double* g, const double* y, double* dx, std::int64_t n) {
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) dx[i] += g[i] * (1.0 - y[i] * y[i]);
}

void add(const double* a, const double* b, double* out, std::int64_t n) {
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* out, std::int64_t n) {
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(const double* a, double s, double* out, std::int64_t n) {
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) out[i] = s * a[i];
}

void acc(const double* x, double* y, std::int64_t n) {
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) y[i] += x[i];
}

void acc_scaled(const double* x, double s, double* y, std::int64_t n) {
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) y[i] += s * x[i];
}

void acc_mul(const double* a, const double* b, double* y, std::int64_t n) {
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

}  // namespace omp
}  // namespace c2f::kern
