#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <functional>

#include "beamlearn/graph.hpp"
#include "beamlearn/linalg.hpp"
#include "beamlearn/optim.hpp"
#include "beamlearn/rng.hpp"

using namespace beamlearn;

namespace {

using Builder = std::function<NodeId(Graph&)>;

CTensor random_complex(Shape shape, Rng& rng) {
  CTensor t{shape};
  for (std::size_t i = 0; i < t.numel(); ++i) t.at(i) = rng.cgauss(1.0);
  return t;
}

CTensor random_real(Shape shape, Rng& rng) {
  CTensor t{shape};
  for (std::size_t i = 0; i < t.numel(); ++i) t.at(i) = rng.normal();
  return t;
}

double eval_loss(Params& p, const Builder& b) {
  Graph g(&p, 1234);
  NodeId l = b(g);
  return g.value(l).at(0).real();
}

void analytic_grads(Params& p, const Builder& b) {
  p.zero_grads();
  Graph g(&p, 1234);
  NodeId l = b(g);
  auto grads = g.backward(l);
  g.accumulate_param_grads(grads);
}

// Central finite differences over every real degree of freedom of every
// parameter; returns max |g_ad - g_fd| / max(||g_fd||_inf, floor).
double fd_rel_err(Params& p, const Builder& b, double h = 1e-5) {
  analytic_grads(p, b);
  std::map<std::string, CTensor> ad;
  for (const auto& name : p.names()) ad[name] = p.entry(name).grad;
  double max_diff = 0.0, fd_scale = 0.0;
  for (const auto& name : p.names()) {
    auto& e = p.entry(name);
    if (!e.trainable) continue;
    for (std::size_t i = 0; i < e.value.numel(); ++i) {
      int comps = e.real_only ? 1 : 2;
      for (int c = 0; c < comps; ++c) {
        cplx save = e.value.at(i);
        cplx dh = (c == 0) ? cplx(h, 0.0) : cplx(0.0, h);
        e.value.at(i) = save + dh;
        double fp = eval_loss(p, b);
        e.value.at(i) = save - dh;
        double fm = eval_loss(p, b);
        e.value.at(i) = save;
        double fd = (fp - fm) / (2.0 * h);
        double adv = (c == 0) ? ad[name].at(i).real() : ad[name].at(i).imag();
        max_diff = std::max(max_diff, std::abs(adv - fd));
        fd_scale = std::max(fd_scale, std::abs(fd));
      }
    }
  }
  return max_diff / std::max(fd_scale, 1e-10);
}

}  // namespace

TEST_CASE("gradient of squared norm is 2x") {
  Params p;
  p.create("x", CTensor::from_real({1.0, 0.0}, Shape{2, 1}));
  Builder b = [](Graph& g) { return g.sum_all(g.abs2(g.param("x"))); };
  analytic_grads(p, b);
  CHECK(p.entry("x").grad.at(0).real() == doctest::Approx(2.0));
  CHECK(p.entry("x").grad.at(0).imag() == doctest::Approx(0.0));
  CHECK(p.entry("x").grad.at(1).real() == doctest::Approx(0.0));
}

TEST_CASE("gradient of Re(tr(inverse)) at diag(2) is -1/4") {
  Params p;
  CTensor a{Shape{1, 1}};
  a.at(0) = 2.0;
  p.create("a", a);
  Builder b = [](Graph& g) {
    return g.sum_all(g.real_part(g.diag_part(g.inverse(g.param("a")))));
  };
  analytic_grads(p, b);
  CHECK(p.entry("a").grad.at(0).real() == doctest::Approx(-0.25));
}

TEST_CASE("finite differences: matmul, adjoint, inverse, norm chain") {
  Rng rng(17);
  Params p;
  p.create("a", random_complex(Shape{3, 3}, rng));
  p.create("b", random_complex(Shape{3, 3}, rng));
  Builder b = [](Graph& g) {
    NodeId a = g.param("a");
    NodeId bb = g.param("b");
    NodeId m = g.matmul(a, g.adjoint(bb));
    NodeId shifted = g.add(m, g.constant(la::scale(CTensor::eye(3), 4.0)));
    NodeId inv = g.inverse(shifted);
    return g.sum_all(g.abs2(inv));
  };
  CHECK(fd_rel_err(p, b) < 1e-4);
}

TEST_CASE("finite differences: elementwise complex ops") {
  Rng rng(23);
  Params p;
  p.create("x", random_complex(Shape{4, 2}, rng));
  p.create("y", random_complex(Shape{4, 2}, rng));
  Builder b = [](Graph& g) {
    NodeId x = g.param("x");
    NodeId y = g.param("y");
    NodeId m = g.mul(x, g.conj(y));
    NodeId t = g.reshape(g.transpose_last2(y), Shape{4, 2});
    NodeId s = g.add(g.scale(m, cplx(0.3, -0.7)), t);
    return g.sum_all(g.abs2(s));
  };
  CHECK(fd_rel_err(p, b) < 1e-4);
}

TEST_CASE("finite differences: real network ops") {
  Rng rng(31);
  Params p;
  p.create("w", random_real(Shape{6, 5}, rng), true, true);
  p.create("b", random_real(Shape{5}, rng), true, true);
  p.create("g", CTensor::full(Shape{5}, 1.0), true, true);
  p.create("be", CTensor::zeros(Shape{5}), true, true);
  p.create("bn.running_mean", CTensor::zeros(Shape{5}), false, true);
  p.create("bn.running_var", CTensor::full(Shape{5}, 1.0), false, true);
  CTensor x{Shape{8, 6}};
  Rng rx(99);
  for (std::size_t i = 0; i < x.numel(); ++i) x.at(i) = rx.normal();
  Builder b = [x](Graph& g) {
    NodeId in = g.constant(x);
    NodeId z = g.add(g.matmul(in, g.param("w")), g.param("b"));
    NodeId bn = g.batch_norm(z, g.param("g"), g.param("be"), "bn", true, 0);
    NodeId t = g.tanh_real(bn);
    NodeId r = g.relu(g.scale(t, 3.0));
    NodeId sm = g.softmax_lastdim(r);
    NodeId lg = g.log_real(sm);
    return g.scale(g.sum_all(g.mul(lg, lg)), 1.0 / 8.0);
  };
  CHECK(fd_rel_err(p, b) < 1e-4);
}

TEST_CASE("finite differences: dropout with fixed seed, sqrt, div, slices") {
  Rng rng(37);
  Params p;
  p.create("w", random_real(Shape{4, 6}, rng), true, true);
  CTensor x{Shape{5, 4}};
  Rng rx(7);
  for (std::size_t i = 0; i < x.numel(); ++i) x.at(i) = 0.5 + std::abs(rx.normal());
  Builder b = [x](Graph& g) {
    NodeId in = g.constant(x);
    NodeId z = g.matmul(in, g.param("w"));
    NodeId d = g.dropout(z, 0.4, true);
    NodeId a = g.abs2(d);
    NodeId left = g.slice_lastdim(a, 0, 3);
    NodeId right = g.slice_lastdim(a, 3, 3);
    NodeId num = g.add(g.sqrt_real(g.add(left, g.constant_scalar(1.0))), g.constant_scalar(0.5));
    NodeId den = g.add(right, g.constant_scalar(2.0));
    NodeId q = g.div_real(num, den);
    NodeId cat = g.concat_lastdim({q, g.relu(q)});
    return g.mean_all(cat);
  };
  CHECK(fd_rel_err(p, b) < 1e-4);
}

TEST_CASE("finite differences: conv1d and imag/make_complex") {
  Rng rng(41);
  Params p;
  p.create("cw", random_real(Shape{3, 2, 3}, rng), true, true);
  p.create("cb", random_real(Shape{3}, rng), true, true);
  p.create("z", random_complex(Shape{2, 10}, rng));
  Builder b = [](Graph& g) {
    NodeId z = g.param("z");
    NodeId re = g.real_part(z);
    NodeId im = g.imag_part(z);
    NodeId x = g.reshape(g.concat_lastdim({re, im}), Shape{2, 2, 10});
    NodeId c = g.conv1d(x, g.param("cw"), g.param("cb"));
    NodeId back = g.make_complex(g.slice_lastdim(g.reshape(c, Shape{2, 30}), 0, 10),
                                 g.slice_lastdim(g.reshape(c, Shape{2, 30}), 10, 10));
    return g.mean_all(g.abs2(back));
  };
  CHECK(fd_rel_err(p, b) < 1e-4);
}

TEST_CASE("softmax rows are positive and sum to one") {
  Rng rng(53);
  Params p;
  Graph g(&p);
  CTensor x = random_real(Shape{7, 9}, rng);
  NodeId sm = g.softmax_lastdim(g.constant(la::scale(x, 4.0)));
  const CTensor& v = g.value(sm);
  for (std::size_t r = 0; r < 7; ++r) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
      double y = v.at(r * 9 + i).real();
      CHECK(y > 0.0);
      sum += y;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("two backward passes are bitwise identical") {
  Rng rng(61);
  Params p;
  p.create("a", random_complex(Shape{4, 4}, rng));
  Graph g(&p, 5);
  NodeId a = g.param("a");
  NodeId shifted = g.add(a, g.constant(la::scale(CTensor::eye(4), 3.0)));
  NodeId loss = g.sum_all(g.abs2(g.inverse(shifted)));
  auto g1 = g.backward(loss);
  auto g2 = g.backward(loss);
  REQUIRE(g1.size() == g2.size());
  for (std::size_t i = 0; i < g1.size(); ++i) {
    if (g1[i].empty()) {
      CHECK(g2[i].empty());
      continue;
    }
    CHECK(bitwise_equal(g1[i], g2[i]));
  }
}

TEST_CASE("gradient of unused parameter stays empty") {
  Rng rng(67);
  Params p;
  p.create("used", random_complex(Shape{2, 2}, rng));
  p.create("unused", random_complex(Shape{2, 2}, rng));
  p.zero_grads();
  Graph g(&p);
  NodeId u = g.param("used");
  g.param("unused");  // present in the graph, not on the loss path
  NodeId loss = g.sum_all(g.abs2(u));
  auto grads = g.backward(loss);
  g.accumulate_param_grads(grads);
  CHECK(p.entry("unused").grad.max_abs() == 0.0);
  CHECK(p.entry("used").grad.max_abs() > 0.0);
}

TEST_CASE("backward rejects non-scalar and complex losses") {
  Rng rng(71);
  Params p;
  p.create("a", random_complex(Shape{2, 2}, rng));
  Graph g(&p);
  NodeId a = g.param("a");
  CHECK_THROWS_AS(g.backward(a), NotScalar);
  NodeId s = g.sum_all(a);  // complex scalar
  CHECK_THROWS_AS(g.backward(s), NotScalar);
}

TEST_CASE("inverse records a condition estimate and rejects singular input") {
  Params p;
  Graph g(&p);
  NodeId ok = g.inverse(g.constant(CTensor::eye(3)));
  CHECK(g.inverse_rcond(ok) == doctest::Approx(1.0));
  CTensor sing{Shape{2, 2}};
  sing(0, 0) = 1.0;
  sing(0, 1) = 1.0;
  sing(1, 0) = 1.0;
  sing(1, 1) = 1.0;
  CHECK_THROWS_AS(g.inverse(g.constant(sing)), SingularMatrix);
}

TEST_CASE("batch norm eval mode uses running buffers") {
  Params p;
  p.create("g", CTensor::full(Shape{3}, 1.0), true, true);
  p.create("b", CTensor::zeros(Shape{3}), true, true);
  p.create("bn.running_mean", CTensor::zeros(Shape{3}), false, true);
  p.create("bn.running_var", CTensor::full(Shape{3}, 1.0), false, true);
  Rng rng(3);
  CTensor x = random_real(Shape{16, 3}, rng);
  {
    Graph g(&p);
    g.batch_norm(g.constant(x), g.param("g"), g.param("b"), "bn", true, 0);
  }
  // buffers moved toward the batch statistics
  CHECK(p.value("bn.running_mean").max_abs() > 0.0);
  Graph g(&p);
  NodeId y = g.batch_norm(g.constant(x), g.param("g"), g.param("b"), "bn", false, 0);
  CHECK(g.value(y).all_finite());
}

TEST_CASE("dropout is deterministic under a fixed seed") {
  Params p;
  Rng rng(11);
  CTensor x = random_real(Shape{10, 10}, rng);
  Graph g1(&p, 77), g2(&p, 77), g3(&p, 78);
  NodeId d1 = g1.dropout(g1.constant(x), 0.5, true);
  NodeId d2 = g2.dropout(g2.constant(x), 0.5, true);
  NodeId d3 = g3.dropout(g3.constant(x), 0.5, true);
  CHECK(bitwise_equal(g1.value(d1), g2.value(d2)));
  CHECK(!bitwise_equal(g1.value(d1), g3.value(d3)));
}

TEST_CASE("sgd step: lr 0.1, param 1, grad 2 gives 0.8; zero grad no-op") {
  Params p;
  p.create("x", CTensor::scalar(1.0));
  p.zero_grads();
  p.entry("x").grad.at(0) = 2.0;
  sgd_step(p, SgdConfig{0.1});
  CHECK(p.value("x").at(0).real() == doctest::Approx(0.8));

  Params q;
  q.create("x", CTensor::scalar(1.5));
  q.zero_grads();
  adam_step(q, AdamConfig{});
  CHECK(q.value("x").at(0).real() == doctest::Approx(1.5));
  sgd_step(q, SgdConfig{0.1});
  CHECK(q.value("x").at(0).real() == doctest::Approx(1.5));
}

TEST_CASE("adam converges on a convex quadratic in 200 steps") {
  Params p;
  Rng rng(19);
  p.create("x", random_complex(Shape{4}, rng));
  CTensor target = random_complex(Shape{4}, rng);
  AdamConfig cfg;
  cfg.lr = 0.05;
  for (int step = 0; step < 200; ++step) {
    p.zero_grads();
    Graph g(&p);
    NodeId diff = g.sub(g.param("x"), g.constant(target));
    NodeId loss = g.sum_all(g.abs2(diff));
    auto grads = g.backward(loss);
    g.accumulate_param_grads(grads);
    adam_step(p, cfg);
  }
  CTensor diff = la::sub(p.value("x"), target);
  CHECK(la::fro_norm(diff) < 1e-3);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Params p;
  Rng rng(29);
  p.create("net.w0", random_complex(Shape{3, 4}, rng));
  p.create("net.b0", random_real(Shape{4}, rng), true, true);
  p.create("bn.running_var", random_real(Shape{4}, rng), false, true);
  // attach adam state
  p.zero_grads();
  for (auto& [k, e] : p.table())
    for (std::size_t i = 0; i < e.grad.numel(); ++i) e.grad.at(i) = rng.cgauss();
  adam_step(p, AdamConfig{});
  std::string path = "/tmp/beamlearn_ckpt_test.blc";
  save_checkpoint(p, path, {{"epoch", "12"}, {"tag", "unit"}});
  std::map<std::string, std::string> meta;
  Params q = load_checkpoint(path, &meta);
  CHECK(meta.at("epoch") == "12");
  CHECK(q.step == p.step);
  REQUIRE(q.names() == p.names());
  for (const auto& name : p.names()) {
    CHECK(bitwise_equal(p.value(name), q.value(name)));
    CHECK(p.entry(name).trainable == q.entry(name).trainable);
    CHECK(p.entry(name).real_only == q.entry(name).real_only);
    if (!p.entry(name).adam_m.empty()) {
      CHECK(bitwise_equal(p.entry(name).adam_m, q.entry(name).adam_m));
      CHECK(bitwise_equal(p.entry(name).adam_v, q.entry(name).adam_v));
    }
  }
  std::remove(path.c_str());
}
