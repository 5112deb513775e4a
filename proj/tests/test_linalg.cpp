#include "doctest.h"

#include <cmath>

#include "beamlearn/linalg.hpp"
#include "beamlearn/rng.hpp"
#include "beamlearn/tensor.hpp"

using namespace beamlearn;

namespace {

CTensor random_complex(Shape shape, Rng& rng) {
  CTensor t{shape};
  for (std::size_t i = 0; i < t.numel(); ++i) t.at(i) = rng.cgauss(1.0);
  return t;
}

double max_abs_diff(const CTensor& a, const CTensor& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

}  // namespace

TEST_CASE("broadcast add and reduce round trip") {
  CTensor a{Shape{2, 3}};
  for (std::size_t i = 0; i < 6; ++i) a.at(i) = static_cast<double>(i);
  CTensor row{Shape{3}};
  row.at(0) = 10;
  row.at(1) = 20;
  row.at(2) = 30;
  CTensor s = la::add(a, row);
  CHECK(s(1, 2) == cplx(35.0, 0.0));
  CHECK(s(0, 0) == cplx(10.0, 0.0));
  // reduce the broadcast gradient back to the row shape
  CTensor ones{Shape{2, 3}, cplx(1.0, 0.0)};
  CTensor red = reduce_to_shape(ones, Shape{3});
  CHECK(red.at(0) == cplx(2.0, 0.0));
  CHECK_THROWS_AS(la::add(a, CTensor{Shape{4}}), ShapeMismatch);
}

TEST_CASE("matmul matches hand computation and broadcasts batches") {
  CTensor a{Shape{2, 2}};
  a(0, 0) = {1, 1};
  a(0, 1) = {2, 0};
  a(1, 0) = {0, -1};
  a(1, 1) = {1, 0};
  CTensor b{Shape{2, 1}};
  b(0, 0) = {1, 0};
  b(1, 0) = {0, 1};
  CTensor c = la::matmul(a, b);
  CHECK(std::abs(c.at(0) - cplx(1, 3)) < 1e-15);
  CHECK(std::abs(c.at(1) - cplx(0, 0)) < 1e-15);

  Rng rng(7);
  CTensor big = random_complex(Shape{4, 3, 2}, rng);     // batch of 4
  CTensor w = random_complex(Shape{2, 5}, rng);           // unbatched rhs
  CTensor out = la::matmul(big, w);
  CHECK(out.shape() == Shape{4, 3, 5});
  // check one batch element against the 2-D product
  CTensor one{Shape{3, 2}};
  for (std::size_t i = 0; i < 6; ++i) one.at(i) = big.at(2 * 6 + i);
  CTensor ref = la::matmul(one, w);
  for (std::size_t i = 0; i < 15; ++i) CHECK(std::abs(out.at(2 * 15 + i) - ref.at(i)) < 1e-14);
}

TEST_CASE("lu_inverse identity and diagonal cases") {
  CTensor i3 = CTensor::eye(3);
  auto r = la::lu_inverse(i3);
  CHECK(max_abs_diff(r.inv, i3) < 1e-15);

  CTensor d{Shape{2, 2}};
  d(0, 0) = 2.0;
  d(1, 1) = 4.0;
  auto rd = la::lu_inverse(d);
  CHECK(std::abs(rd.inv(0, 0) - cplx(0.5, 0)) < 1e-15);
  CHECK(std::abs(rd.inv(1, 1) - cplx(0.25, 0)) < 1e-15);
}

TEST_CASE("lu_inverse residual on random well-conditioned matrices") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    CTensor a = random_complex(Shape{5, 5}, rng);
    // push away from singularity
    for (std::size_t i = 0; i < 5; ++i) a(i, i) += 3.0;
    auto r = la::lu_inverse(a);
    CTensor res = la::sub(la::matmul(r.inv, a), CTensor::eye(5));
    CHECK(res.max_abs() < 1e-10);
  }
}

TEST_CASE("lu_inverse throws SingularMatrix") {
  CTensor a{Shape{2, 2}};
  a(0, 0) = 1.0;
  a(0, 1) = 2.0;
  a(1, 0) = 2.0;
  a(1, 1) = 4.0;
  CHECK_THROWS_AS(la::lu_inverse(a), SingularMatrix);
}

TEST_CASE("batched inverse inverts each block") {
  Rng rng(3);
  CTensor a = random_complex(Shape{6, 4, 4}, rng);
  for (std::size_t b = 0; b < 6; ++b)
    for (std::size_t i = 0; i < 4; ++i) a.at(b * 16 + i * 4 + i) += 4.0;
  double rc = 0.0;
  CTensor inv = la::batched_inverse(a, &rc);
  CHECK(rc > 0.0);
  CTensor prod = la::matmul(inv, a);
  for (std::size_t b = 0; b < 6; ++b) {
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        cplx want = (i == j) ? cplx(1, 0) : cplx(0, 0);
        CHECK(std::abs(prod.at(b * 16 + i * 4 + j) - want) < 1e-10);
      }
  }
}

TEST_CASE("hermitian_eig reconstructs the matrix") {
  Rng rng(11);
  for (std::size_t n : {2u, 5u, 9u}) {
    CTensor g = random_complex(Shape{n, n}, rng);
    CTensor a = la::matmul(la::adjoint(g), g);  // Hermitian PSD
    auto e = la::hermitian_eig(a);
    // U diag(lambda) U^H == A
    CTensor lam{Shape{n, n}};
    for (std::size_t i = 0; i < n; ++i) lam(i, i) = e.lambda[i];
    CTensor rec = la::matmul(la::matmul(e.u, lam), la::adjoint(e.u));
    CHECK(max_abs_diff(rec, a) < 1e-10 * std::max(1.0, a.max_abs()));
    // unitary eigenvectors
    CTensor uhu = la::matmul(la::adjoint(e.u), e.u);
    CHECK(max_abs_diff(uhu, CTensor::eye(n)) < 1e-12);
    // descending order
    for (std::size_t i = 1; i < n; ++i) CHECK(e.lambda[i - 1] >= e.lambda[i] - 1e-12);
  }
}

TEST_CASE("haar_unitary is unitary to 1e-10") {
  Rng rng(5);
  for (std::size_t n : {2u, 8u, 16u}) {
    CTensor q = la::haar_unitary(n, rng);
    CTensor qhq = la::matmul(la::adjoint(q), q);
    CHECK(max_abs_diff(qhq, CTensor::eye(n)) < 1e-10);
  }
}

TEST_CASE("reshape and bitwise equality") {
  Rng rng(9);
  CTensor a = random_complex(Shape{3, 4}, rng);
  CTensor b = a.reshaped(Shape{2, 6});
  CHECK(b.numel() == 12);
  CHECK_THROWS_AS(a.reshaped(Shape{5}), ShapeMismatch);
  CHECK(bitwise_equal(a, a));
  CTensor c = a;
  c.at(0) += 1e-9;
  CHECK(!bitwise_equal(a, c));
}
