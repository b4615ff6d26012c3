#include <cstring>
#include <vector>

#include <omp.h>

#include "c2f/kernels.hpp"
#include "c2f/rng.hpp"
#include "doctest.h"

using namespace c2f;

namespace {

std::vector<double> rand_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("matmul kernels agree with a naive triple loop") {
  Rng rng(1);
  const int m = 7, k = 5, n = 9;
  auto a = rand_vec(m * k, rng), b = rand_vec(k * n, rng);
  std::vector<double> out(m * n), naive(m * n, 0.0);
  kern::serial::matmul(a.data(), b.data(), out.data(), m, k, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < k; ++p) naive[i * n + j] += a[i * k + p] * b[p * n + j];
  for (int i = 0; i < m * n; ++i) CHECK(out[i] == doctest::Approx(naive[i]).epsilon(1e-12));
}

TEST_CASE("serial and parallel backends are bit-identical") {
  // Force several worker threads even on a single-core host so the
  // parallel paths genuinely interleave.
  omp_set_num_threads(4);

  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Rng rng(seed + 100);

    SUBCASE("") {}  // keep one body per seed

    // matmul family
    {
      const int m = 17, k = 13, n = 11;
      auto a = rand_vec(m * k, rng), b = rand_vec(k * n, rng), g = rand_vec(m * n, rng);
      std::vector<double> o1(m * n), o2(m * n);
      kern::serial::matmul(a.data(), b.data(), o1.data(), m, k, n);
      kern::omp::matmul(a.data(), b.data(), o2.data(), m, k, n);
      CHECK(bit_equal(o1, o2));

      auto da1 = rand_vec(m * k, rng);
      auto da2 = da1;
      kern::serial::matmul_acc_da(g.data(), b.data(), da1.data(), m, k, n);
      kern::omp::matmul_acc_da(g.data(), b.data(), da2.data(), m, k, n);
      CHECK(bit_equal(da1, da2));

      auto db1 = rand_vec(k * n, rng);
      auto db2 = db1;
      kern::serial::matmul_acc_db(a.data(), g.data(), db1.data(), m, k, n);
      kern::omp::matmul_acc_db(a.data(), g.data(), db2.data(), m, k, n);
      CHECK(bit_equal(db1, db2));
    }

    // matvec family
    {
      const int m = 33, k = 21;
      auto w = rand_vec(m * k, rng), x = rand_vec(k, rng), g = rand_vec(m, rng);
      std::vector<double> o1(m), o2(m);
      kern::serial::matvec(w.data(), x.data(), o1.data(), m, k);
      kern::omp::matvec(w.data(), x.data(), o2.data(), m, k);
      CHECK(bit_equal(o1, o2));

      auto dw1 = rand_vec(m * k, rng);
      auto dw2 = dw1;
      kern::serial::matvec_acc_dw(g.data(), x.data(), dw1.data(), m, k);
      kern::omp::matvec_acc_dw(g.data(), x.data(), dw2.data(), m, k);
      CHECK(bit_equal(dw1, dw2));

      auto dx1 = rand_vec(k, rng);
      auto dx2 = dx1;
      kern::serial::matvec_acc_dx(w.data(), g.data(), dx1.data(), m, k);
      kern::omp::matvec_acc_dx(w.data(), g.data(), dx2.data(), m, k);
      CHECK(bit_equal(dx1, dx2));
    }

    // conv2d family over a few geometries
    for (const auto& [stride, pad] : {std::pair{1, 0}, std::pair{1, 1}, std::pair{2, 1}}) {
      kern::ConvDims d;
      d.in_c = 3;
      d.in_h = 11;
      d.in_w = 9;
      d.out_c = 4;
      d.k = 3;
      d.stride = stride;
      d.pad = pad;
      d.out_h = (d.in_h + 2 * pad - d.k) / stride + 1;
      d.out_w = (d.in_w + 2 * pad - d.k) / stride + 1;
      auto in = rand_vec(d.in_c * d.in_h * d.in_w, rng);
      auto w = rand_vec(d.out_c * d.in_c * d.k * d.k, rng);
      auto bias = rand_vec(d.out_c, rng);
      auto g = rand_vec(d.out_c * d.out_h * d.out_w, rng);

      std::vector<double> o1(g.size()), o2(g.size());
      kern::serial::conv2d(in.data(), w.data(), bias.data(), o1.data(), d);
      kern::omp::conv2d(in.data(), w.data(), bias.data(), o2.data(), d);
      CHECK(bit_equal(o1, o2));

      auto din1 = rand_vec(in.size(), rng);
      auto din2 = din1;
      kern::serial::conv2d_acc_din(g.data(), w.data(), din1.data(), d);
      kern::omp::conv2d_acc_din(g.data(), w.data(), din2.data(), d);
      CHECK(bit_equal(din1, din2));

      auto dw1 = rand_vec(w.size(), rng);
      auto dw2 = dw1;
      kern::serial::conv2d_acc_dw(g.data(), in.data(), dw1.data(), d);
      kern::omp::conv2d_acc_dw(g.data(), in.data(), dw2.data(), d);
      CHECK(bit_equal(dw1, dw2));

      auto db1 = rand_vec(d.out_c, rng);
      auto db2 = db1;
      kern::serial::conv2d_acc_dbias(g.data(), db1.data(), d);
      kern::omp::conv2d_acc_dbias(g.data(), db2.data(), d);
      CHECK(bit_equal(db1, db2));
    }

    // pooling, upsampling, elementwise
    {
      const int c = 5, h = 12, w = 10;
      auto in = rand_vec(c * h * w, rng);
      std::vector<double> o1(c * (h / 2) * (w / 2)), o2 = o1;
      std::vector<std::int32_t> am1(o1.size()), am2(o1.size());
      kern::serial::maxpool2x2(in.data(), o1.data(), am1.data(), c, h, w);
      kern::omp::maxpool2x2(in.data(), o2.data(), am2.data(), c, h, w);
      CHECK(bit_equal(o1, o2));
      CHECK(am1 == am2);

      auto g = rand_vec(o1.size(), rng);
      auto din1 = rand_vec(in.size(), rng);
      auto din2 = din1;
      kern::serial::maxpool2x2_acc_din(g.data(), am1.data(), din1.data(), c, h / 2, w / 2);
      kern::omp::maxpool2x2_acc_din(g.data(), am2.data(), din2.data(), c, h / 2, w / 2);
      CHECK(bit_equal(din1, din2));

      std::vector<double> u1(c * h * 3 * w * 3), u2(u1.size());
      kern::serial::upsample_nearest(in.data(), u1.data(), c, h, w, 3);
      kern::omp::upsample_nearest(in.data(), u2.data(), c, h, w, 3);
      CHECK(bit_equal(u1, u2));

      auto gu = rand_vec(u1.size(), rng);
      auto du1 = rand_vec(in.size(), rng);
      auto du2 = du1;
      kern::serial::upsample_nearest_acc_din(gu.data(), du1.data(), c, h, w, 3);
      kern::omp::upsample_nearest_acc_din(gu.data(), du2.data(), c, h, w, 3);
      CHECK(bit_equal(du1, du2));

      const std::int64_t n = 9001;  // above the parallel threshold
      auto x = rand_vec(n, rng), y = rand_vec(n, rng), gg = rand_vec(n, rng);
      std::vector<double> e1(n), e2(n);
      kern::serial::sigmoid(x.data(), e1.data(), n);
      kern::omp::sigmoid(x.data(), e2.data(), n);
      CHECK(bit_equal(e1, e2));
      kern::serial::tanh(x.data(), e1.data(), n);
      kern::omp::tanh(x.data(), e2.data(), n);
      CHECK(bit_equal(e1, e2));
      kern::serial::relu(x.data(), e1.data(), n);
      kern::omp::relu(x.data(), e2.data(), n);
      CHECK(bit_equal(e1, e2));

      auto acc1 = rand_vec(n, rng);
      auto acc2 = acc1;
      kern::serial::acc_mul(x.data(), y.data(), acc1.data(), n);
      kern::omp::acc_mul(x.data(), y.data(), acc2.data(), n);
      CHECK(bit_equal(acc1, acc2));
      kern::serial::relu_acc_dx(gg.data(), x.data(), acc1.data(), n);
      kern::omp::relu_acc_dx(gg.data(), x.data(), acc2.data(), n);
      CHECK(bit_equal(acc1, acc2));
    }
  }
}

TEST_CASE("backend dispatch respects the configured backend") {
  const auto saved = kern::backend();
  kern::set_backend(kern::Backend::serial);
  CHECK(kern::backend() == kern::Backend::serial);
  kern::set_backend(kern::Backend::parallel);
  CHECK(kern::backend() == kern::Backend::parallel);
  kern::set_backend(saved);
}
