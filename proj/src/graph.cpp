#include "beamlearn/graph.hpp"

#include <algorithm>
#include <cmath>

#include "beamlearn/linalg.hpp"

namespace beamlearn {

namespace {

void require_real(const CTensor& v, const char* who) {
  double scale = std::max(1.0, v.max_abs());
  if (v.max_imag_abs() > 1e-9 * scale) {
    throw NotRealTensor(std::string(who) + ": operand has imaginary magnitude " +
                        std::to_string(v.max_imag_abs()));
  }
}

void acc(CTensor& dst, const CTensor& delta) {
  if (dst.empty() && delta.numel() > 0) {
    dst = delta;
    return;
  }
  for (std::size_t i = 0; i < dst.numel(); ++i) dst.at(i) += delta.at(i);
}

CTensor elemwise(const CTensor& a, const std::function<cplx(cplx)>& f) {
  CTensor out{a.shape()};
  for (std::size_t i = 0; i < a.numel(); ++i) out.at(i) = f(a.at(i));
  return out;
}

}  // namespace

Graph::Graph(Params* params, std::uint64_t dropout_seed)
    : params_(params), dropout_rng_(dropout_seed) {}

NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::constant(CTensor v) {
  Node n;
  n.op = Op::kConst;
  n.value = std::move(v);
  return push(std::move(n));
}

NodeId Graph::param(const std::string& name) {
  if (!params_) throw Error("graph has no parameter store");
  Node n;
  n.op = Op::kParam;
  n.name = name;
  n.value = params_->value(name);
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kAdd;
  n.parents = {a, b};
  n.value = broadcast_binary(node(a).value, node(b).value,
                             [](cplx x, cplx y) { return x + y; });
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) { return add(a, scale(b, -1.0)); }

NodeId Graph::mul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kMul;
  n.parents = {a, b};
  n.value = broadcast_binary(node(a).value, node(b).value,
                             [](cplx x, cplx y) { return x * y; });
  return push(std::move(n));
}

NodeId Graph::scale(NodeId a, cplx s) {
  Node n;
  n.op = Op::kScale;
  n.parents = {a};
  n.scalar = s;
  n.value = la::scale(node(a).value, s);
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kMatMul;
  n.parents = {a, b};
  n.value = la::matmul(node(a).value, node(b).value);
  return push(std::move(n));
}

NodeId Graph::transpose_last2(NodeId a) {
  Node n;
  n.op = Op::kTransposeLast2;
  n.parents = {a};
  n.value = la::transpose_last2(node(a).value);
  return push(std::move(n));
}

NodeId Graph::adjoint(NodeId a) {
  Node n;
  n.op = Op::kAdjoint;
  n.parents = {a};
  n.value = la::adjoint(node(a).value);
  return push(std::move(n));
}

NodeId Graph::conj(NodeId a) {
  Node n;
  n.op = Op::kConj;
  n.parents = {a};
  n.value = la::conj(node(a).value);
  return push(std::move(n));
}

NodeId Graph::inverse(NodeId a) {
  Node n;
  n.op = Op::kInverse;
  n.parents = {a};
  double rcond = 0.0;
  n.value = la::batched_inverse(node(a).value, &rcond);
  n.rcond = rcond;
  return push(std::move(n));
}

NodeId Graph::abs2(NodeId a) {
  Node n;
  n.op = Op::kAbs2;
  n.parents = {a};
  n.value = elemwise(node(a).value, [](cplx z) { return cplx(std::norm(z), 0.0); });
  return push(std::move(n));
}

NodeId Graph::real_part(NodeId a) {
  Node n;
  n.op = Op::kRealPart;
  n.parents = {a};
  n.value = elemwise(node(a).value, [](cplx z) { return cplx(z.real(), 0.0); });
  return push(std::move(n));
}

NodeId Graph::imag_part(NodeId a) {
  Node n;
  n.op = Op::kImagPart;
  n.parents = {a};
  n.value = elemwise(node(a).value, [](cplx z) { return cplx(z.imag(), 0.0); });
  return push(std::move(n));
}

NodeId Graph::make_complex(NodeId re, NodeId im) {
  const CTensor& vr = node(re).value;
  const CTensor& vi = node(im).value;
  if (!vr.same_shape(vi)) throw ShapeMismatch("make_complex: shape mismatch");
  require_real(vr, "make_complex");
  require_real(vi, "make_complex");
  Node n;
  n.op = Op::kMakeComplex;
  n.parents = {re, im};
  CTensor out{vr.shape()};
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.at(i) = cplx(vr.at(i).real(), vi.at(i).real());
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::log_real(NodeId a) {
  const CTensor& v = node(a).value;
  require_real(v, "log");
  Node n;
  n.op = Op::kLog;
  n.parents = {a};
  CTensor out{v.shape()};
  for (std::size_t i = 0; i < v.numel(); ++i) {
    double x = v.at(i).real();
    if (!(x > 0.0)) throw DomainError("log of non-positive value " + std::to_string(x));
    out.at(i) = std::log(x);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::sqrt_real(NodeId a) {
  const CTensor& v = node(a).value;
  require_real(v, "sqrt");
  Node n;
  n.op = Op::kSqrt;
  n.parents = {a};
  CTensor out{v.shape()};
  for (std::size_t i = 0; i < v.numel(); ++i) {
    double x = v.at(i).real();
    if (x < 0.0) throw DomainError("sqrt of negative value " + std::to_string(x));
    out.at(i) = std::sqrt(x);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::div_real(NodeId a, NodeId b) {
  const CTensor& va = node(a).value;
  const CTensor& vb = node(b).value;
  require_real(va, "div");
  require_real(vb, "div");
  for (std::size_t i = 0; i < vb.numel(); ++i) {
    if (vb.at(i).real() == 0.0) throw DivisionByZero("div: zero denominator");
  }
  Node n;
  n.op = Op::kDiv;
  n.parents = {a, b};
  n.value = broadcast_binary(va, vb, [](cplx x, cplx y) { return cplx(x.real() / y.real(), 0.0); });
  return push(std::move(n));
}

NodeId Graph::tanh_real(NodeId a) {
  const CTensor& v = node(a).value;
  require_real(v, "tanh");
  Node n;
  n.op = Op::kTanh;
  n.parents = {a};
  n.value = elemwise(v, [](cplx z) { return cplx(std::tanh(z.real()), 0.0); });
  return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
  const CTensor& v = node(a).value;
  require_real(v, "relu");
  Node n;
  n.op = Op::kRelu;
  n.parents = {a};
  n.value = elemwise(v, [](cplx z) { return cplx(z.real() > 0.0 ? z.real() : 0.0, 0.0); });
  return push(std::move(n));
}

NodeId Graph::softmax_lastdim(NodeId a) {
  const CTensor& v = node(a).value;
  require_real(v, "softmax");
  if (v.rank() < 1) throw ShapeMismatch("softmax: scalar input");
  Node n;
  n.op = Op::kSoftmax;
  n.parents = {a};
  std::size_t d = v.shape().back();
  std::size_t nrows = v.numel() / d;
  CTensor out{v.shape()};
  for (std::size_t r = 0; r < nrows; ++r) {
    const cplx* x = v.data() + r * d;
    cplx* y = out.data() + r * d;
    double mx = -1e308;
    for (std::size_t i = 0; i < d; ++i) mx = std::max(mx, x[i].real());
    double sum = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double e = std::exp(x[i].real() - mx);
      y[i] = e;
      sum += e;
    }
    for (std::size_t i = 0; i < d; ++i) y[i] /= sum;
  }
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::batch_norm(NodeId x, NodeId gamma, NodeId beta, const std::string& buffer_prefix,
                         bool train, std::size_t feat_from_end) {
  const CTensor& v = node(x).value;
  require_real(v, "batch_norm");
  if (!params_) throw Error("batch_norm requires a parameter store for its buffers");
  if (v.rank() < feat_from_end + 1) throw ShapeMismatch("batch_norm: rank too small");
  std::size_t feat_dim = v.rank() - 1 - feat_from_end;
  std::size_t f = v.dim(feat_dim);
  std::size_t inner = 1;
  for (std::size_t i = feat_dim + 1; i < v.rank(); ++i) inner *= v.dim(i);
  std::size_t outer = v.numel() / (f * inner);
  std::size_t m = outer * inner;  // reduction count per feature

  CTensor& rmean = params_->value(buffer_prefix + ".running_mean");
  CTensor& rvar = params_->value(buffer_prefix + ".running_var");
  if (rmean.numel() != f || rvar.numel() != f) {
    throw ShapeMismatch("batch_norm: buffer size mismatch for " + buffer_prefix);
  }

  const double eps = 1e-5;
  std::vector<double> mean(f, 0.0), var(f, 0.0);
  if (train) {
    if (m < 2) throw ShapeMismatch("batch_norm: need at least 2 elements per feature");
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t c = 0; c < f; ++c)
        for (std::size_t i = 0; i < inner; ++i)
          mean[c] += v.at((o * f + c) * inner + i).real();
    for (std::size_t c = 0; c < f; ++c) mean[c] /= static_cast<double>(m);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t c = 0; c < f; ++c)
        for (std::size_t i = 0; i < inner; ++i) {
          double d = v.at((o * f + c) * inner + i).real() - mean[c];
          var[c] += d * d;
        }
    for (std::size_t c = 0; c < f; ++c) var[c] /= static_cast<double>(m);
    const double momentum = 0.9;
    for (std::size_t c = 0; c < f; ++c) {
      rmean.at(c) = momentum * rmean.at(c).real() + (1.0 - momentum) * mean[c];
      rvar.at(c) = momentum * rvar.at(c).real() + (1.0 - momentum) * var[c];
    }
  } else {
    for (std::size_t c = 0; c < f; ++c) {
      mean[c] = rmean.at(c).real();
      var[c] = rvar.at(c).real();
    }
  }

  const CTensor& g = node(gamma).value;
  const CTensor& bt = node(beta).value;
  if (g.numel() != f || bt.numel() != f) throw ShapeMismatch("batch_norm: gamma/beta size");

  Node n;
  n.op = Op::kBatchNorm;
  n.parents = {x, gamma, beta};
  n.train = train;
  n.a0 = feat_dim;
  n.name = buffer_prefix;
  n.bn_inv_std.resize(f);
  for (std::size_t c = 0; c < f; ++c) n.bn_inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
  CTensor xhat{v.shape()};
  CTensor out{v.shape()};
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t c = 0; c < f; ++c)
      for (std::size_t i = 0; i < inner; ++i) {
        std::size_t idx = (o * f + c) * inner + i;
        double xh = (v.at(idx).real() - mean[c]) * n.bn_inv_std[c];
        xhat.at(idx) = xh;
        out.at(idx) = g.at(c).real() * xh + bt.at(c).real();
      }
  n.bn_xhat = std::move(xhat);
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::dropout(NodeId a, double rate, bool train) {
  const CTensor& v = node(a).value;
  require_real(v, "dropout");
  if (rate < 0.0 || rate >= 1.0) throw DomainError("dropout rate must be in [0,1)");
  Node n;
  n.op = Op::kDropout;
  n.parents = {a};
  n.rate = rate;
  n.train = train;
  if (!train || rate == 0.0) {
    n.value = v;
    n.mask = CTensor{v.shape(), cplx(1.0, 0.0)};
  } else {
    double keep = 1.0 - rate;
    CTensor mask{v.shape()};
    CTensor out{v.shape()};
    for (std::size_t i = 0; i < v.numel(); ++i) {
      double u = dropout_rng_.uniform();
      double mv = (u < keep) ? 1.0 / keep : 0.0;
      mask.at(i) = mv;
      out.at(i) = v.at(i).real() * mv;
    }
    n.mask = std::move(mask);
    n.value = std::move(out);
  }
  return push(std::move(n));
}

NodeId Graph::concat_lastdim(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat: no parts");
  Shape lead = node(parts[0]).value.shape();
  lead.pop_back();
  std::size_t total = 0;
  std::vector<std::size_t> sizes;
  for (NodeId p : parts) {
    const Shape& s = node(p).value.shape();
    Shape pl = s;
    pl.pop_back();
    if (pl != lead) throw ShapeMismatch("concat: leading dims differ");
    sizes.push_back(s.back());
    total += s.back();
  }
  Shape os = lead;
  os.push_back(total);
  CTensor out{os};
  std::size_t nrows = shape_numel(lead);
  std::size_t off = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const CTensor& v = node(parts[pi]).value;
    std::size_t d = sizes[pi];
    for (std::size_t r = 0; r < nrows; ++r)
      for (std::size_t i = 0; i < d; ++i) out.at(r * total + off + i) = v.at(r * d + i);
    off += d;
  }
  Node n;
  n.op = Op::kConcat;
  n.parents = parts;
  n.concat_sizes = std::move(sizes);
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::slice_lastdim(NodeId a, std::size_t begin, std::size_t len) {
  const CTensor& v = node(a).value;
  if (v.rank() < 1) throw ShapeMismatch("slice: scalar input");
  std::size_t d = v.shape().back();
  if (begin + len > d) throw ShapeMismatch("slice: range out of bounds");
  Shape os = v.shape();
  os.back() = len;
  CTensor out{os};
  std::size_t nrows = v.numel() / d;
  for (std::size_t r = 0; r < nrows; ++r)
    for (std::size_t i = 0; i < len; ++i) out.at(r * len + i) = v.at(r * d + begin + i);
  Node n;
  n.op = Op::kSliceLast;
  n.parents = {a};
  n.a0 = begin;
  n.a1 = len;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::reshape(NodeId a, Shape s) {
  Node n;
  n.op = Op::kReshape;
  n.parents = {a};
  n.value = node(a).value.reshaped(std::move(s));
  return push(std::move(n));
}

NodeId Graph::sum_lastdims(NodeId a, std::size_t ndims) {
  const CTensor& v = node(a).value;
  if (v.rank() < ndims) throw ShapeMismatch("sum_lastdims: rank too small");
  Shape os(v.shape().begin(), v.shape().end() - ndims);
  std::size_t inner = 1;
  for (std::size_t i = v.rank() - ndims; i < v.rank(); ++i) inner *= v.dim(i);
  CTensor out{os};
  for (std::size_t r = 0; r < out.numel(); ++r) {
    cplx s{};
    for (std::size_t i = 0; i < inner; ++i) s += v.at(r * inner + i);
    out.at(r) = s;
  }
  Node n;
  n.op = Op::kSumLast;
  n.parents = {a};
  n.a0 = ndims;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::sum_all(NodeId a) {
  const CTensor& v = node(a).value;
  cplx s{};
  for (std::size_t i = 0; i < v.numel(); ++i) s += v.at(i);
  Node n;
  n.op = Op::kSumAll;
  n.parents = {a};
  n.value = CTensor::scalar(s);
  return push(std::move(n));
}

NodeId Graph::mean_all(NodeId a) {
  std::size_t n = node(a).value.numel();
  return scale(sum_all(a), 1.0 / static_cast<double>(n));
}

NodeId Graph::diag_part(NodeId a) {
  const CTensor& v = node(a).value;
  if (v.rank() < 2 || v.rows() != v.cols()) {
    throw ShapeMismatch("diag_part: want square matrices, got " + shape_str(v.shape()));
  }
  std::size_t k = v.rows();
  Shape os(v.shape().begin(), v.shape().end() - 1);
  CTensor out{os};
  std::size_t nb = v.batch();
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t i = 0; i < k; ++i) out.at(b * k + i) = v.at(b * k * k + i * k + i);
  Node n;
  n.op = Op::kDiagPart;
  n.parents = {a};
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::conv1d(NodeId x, NodeId w, NodeId b) {
  const CTensor& vx = node(x).value;
  const CTensor& vw = node(w).value;
  const CTensor& vb = node(b).value;
  require_real(vx, "conv1d");
  require_real(vw, "conv1d");
  require_real(vb, "conv1d");
  if (vx.rank() != 3 || vw.rank() != 3 || vb.rank() != 1) {
    throw ShapeMismatch("conv1d: want x[T,Cin,L], w[Cout,Cin,k], b[Cout]");
  }
  std::size_t T = vx.dim(0), cin = vx.dim(1), L = vx.dim(2);
  std::size_t cout = vw.dim(0), kw = vw.dim(2);
  if (vw.dim(1) != cin || vb.dim(0) != cout) throw ShapeMismatch("conv1d: channel mismatch");
  std::size_t pad = kw / 2;
  CTensor out{Shape{T, cout, L}};
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t l = 0; l < L; ++l) {
        double s = vb.at(co).real();
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t k = 0; k < kw; ++k) {
            std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l + k) - static_cast<std::ptrdiff_t>(pad);
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
            s += vx.at((t * cin + ci) * L + static_cast<std::size_t>(src)).real() *
                 vw.at((co * cin + ci) * kw + k).real();
          }
        out.at((t * cout + co) * L + l) = s;
      }
  Node n;
  n.op = Op::kConv1d;
  n.parents = {x, w, b};
  n.a0 = pad;
  n.value = std::move(out);
  return push(std::move(n));
}

const CTensor& Graph::value(NodeId id) const { return node(id).value; }

double Graph::inverse_rcond(NodeId id) const {
  if (node(id).op != Op::kInverse) throw Error("inverse_rcond: node is not an inverse");
  return node(id).rcond;
}

std::vector<CTensor> Graph::backward(NodeId loss) const {
  const Node& ln = node(loss);
  if (ln.value.numel() != 1) {
    throw NotScalar("backward: loss has shape " + shape_str(ln.value.shape()));
  }
  if (std::abs(ln.value.at(0).imag()) > 1e-9 * std::max(1.0, std::abs(ln.value.at(0)))) {
    throw NotScalar("backward: loss is not real");
  }

  std::vector<CTensor> g(nodes_.size());
  g[static_cast<std::size_t>(loss)] = CTensor{ln.value.shape(), cplx(1.0, 0.0)};

  for (NodeId id = loss; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const CTensor& gz = g[static_cast<std::size_t>(id)];
    if (gz.empty()) continue;
    switch (n.op) {
      case Op::kConst:
      case Op::kParam:
        break;
      case Op::kAdd: {
        acc(g[n.parents[0]], reduce_to_shape(gz, node(n.parents[0]).value.shape()));
        acc(g[n.parents[1]], reduce_to_shape(gz, node(n.parents[1]).value.shape()));
        break;
      }
      case Op::kMul: {
        const CTensor& va = node(n.parents[0]).value;
        const CTensor& vb = node(n.parents[1]).value;
        CTensor ga = broadcast_binary(gz, vb, [](cplx gg, cplx bv) { return gg * std::conj(bv); });
        CTensor gb = broadcast_binary(gz, va, [](cplx gg, cplx av) { return gg * std::conj(av); });
        acc(g[n.parents[0]], reduce_to_shape(ga, va.shape()));
        acc(g[n.parents[1]], reduce_to_shape(gb, vb.shape()));
        break;
      }
      case Op::kScale: {
        acc(g[n.parents[0]], la::scale(gz, std::conj(n.scalar)));
        break;
      }
      case Op::kMatMul: {
        const CTensor& va = node(n.parents[0]).value;
        const CTensor& vb = node(n.parents[1]).value;
        CTensor ga = la::matmul(gz, la::adjoint(vb));
        CTensor gb = la::matmul(la::adjoint(va), gz);
        acc(g[n.parents[0]], reduce_to_shape(ga, va.shape()));
        acc(g[n.parents[1]], reduce_to_shape(gb, vb.shape()));
        break;
      }
      case Op::kTransposeLast2: {
        acc(g[n.parents[0]], la::transpose_last2(gz));
        break;
      }
      case Op::kAdjoint: {
        acc(g[n.parents[0]], la::adjoint(gz));
        break;
      }
      case Op::kConj: {
        acc(g[n.parents[0]], la::conj(gz));
        break;
      }
      case Op::kInverse: {
        // d(X^-1) = -X^-1 dX X^-1  =>  gX = -Z^H gZ Z^H with Z = X^-1.
        CTensor zh = la::adjoint(n.value);
        CTensor gx = la::scale(la::matmul(la::matmul(zh, gz), zh), -1.0);
        acc(g[n.parents[0]], gx);
        break;
      }
      case Op::kAbs2: {
        const CTensor& vz = node(n.parents[0]).value;
        CTensor gx{vz.shape()};
        for (std::size_t i = 0; i < gx.numel(); ++i)
          gx.at(i) = 2.0 * gz.at(i).real() * vz.at(i);
        acc(g[n.parents[0]], gx);
        break;
      }
      case Op::kRealPart: {
        CTensor gx{gz.shape()};
        for (std::size_t i = 0; i < gx.numel(); ++i) gx.at(i) = gz.at(i).real();
        acc(g[n.parents[0]], gx);
        break;
      }
      case Op::kImagPart: {
        CTensor gx{gz.shape()};
        for (std::size_t i = 0; i < gx.numel(); ++i) gx.at(i) = cplx(0.0, gz.at(i).real());
        acc(g[n.parents[0]], gx);
        break;
      }
      case Op::kMakeComplex: {
        CTensor gr{gz.shape()}, gi{gz.shape()};
        for (std::size_t i = 0; i < gz.numel(); ++i) {
          gr.at(i) = gz.at(i).real();
          gi.at(i) = gz.at(i).imag();
        }
        acc(g[n.parents[0]], gr);
        acc(g[n.parents[1]], gi);
        break;
      }
      case Op::kLog: {
        const CTensor& vx = node(n.parents[0]).value;
        CTensor gx{gz.shape()};
        for (std::size_t i = 0; i < gx.numel(); ++i)
          gx.at(i) = gz.at(i).real() / vx.at(i).real();
        acc(g[n.parents[0]], gx);
        break;
      }
      case Op::kSqrt: {
        CTensor gx{gz.shape()};
        for (std::size_t i = 0; i < gx.numel(); ++i) {
          double y = n.value.at(i).real();
          gx.at(i) = gz.at(i).real() / (2.0 * y);
        }
        acc(g[n.parents[0]], gx);
        break;
      }
      case Op::kDiv: {
        const CTensor& va = node(n.parents[0]).value;
        const CTensor& vb = node(n.parents[1]).value;
        CTensor ga = broadcast_binary(gz, vb, [](cplx gg, cplx bv) {
          return cplx(gg.real() / bv.real(), 0.0);
        });
        CTensor gb_full = broadcast_binary(
            broadcast_binary(gz, va, [](cplx gg, cplx av) { return cplx(gg.real() * av.real(), 0.0); }),
            vb, [](cplx num, cplx bv) {
              double bb = bv.real();
              return cplx(-num.real() / (bb * bb), 0.0);
            });
        acc(g[n.parents[0]], reduce_to_shape(ga, va.shape()));
        acc(g[n.parents[1]], reduce_to_shape(gb_full, vb.shape()));
        break;
      }
      case Op::kTanh: {
        CTensor gx{gz.shape()};
        for (std::size_t i = 0; i < gx.numel(); ++i) {
          double y = n.value.at(i).real();
          gx.at(i) = gz.at(i).real() * (1.0 - y * y);
        }
        acc(g[n.parents[0]], gx);
        break;
      }
      case Op::kRelu: {
        const CTensor& vx = node(n.parents[0]).value;
        CTensor gx{gz.shape()};
        for (std::size_t i = 0; i < gx.numel(); ++i)
          gx.at(i) = vx.at(i).real() > 0.0 ? gz.at(i).real() : 0.0;
        acc(g[n.parents[0]], gx);
        break;
      }
      case Op::kSoftmax: {
        std::size_t d = n.value.shape().back();
        std::size_t nrows = n.value.numel() / d;
        CTensor gx{n.value.shape()};
        for (std::size_t r = 0; r < nrows; ++r) {
          double dot = 0.0;
          for (std::size_t i = 0; i < d; ++i)
            dot += gz.at(r * d + i).real() * n.value.at(r * d + i).real();
          for (std::size_t i = 0; i < d; ++i) {
            double y = n.value.at(r * d + i).real();
            gx.at(r * d + i) = y * (gz.at(r * d + i).real() - dot);
          }
        }
        acc(g[n.parents[0]], gx);
        break;
      }
      case Op::kBatchNorm: {
        const CTensor& vx = node(n.parents[0]).value;
        const CTensor& vg = node(n.parents[1]).value;
        std::size_t feat_dim = n.a0;
        std::size_t f = vx.dim(feat_dim);
        std::size_t inner = 1;
        for (std::size_t i = feat_dim + 1; i < vx.rank(); ++i) inner *= vx.dim(i);
        std::size_t outer = vx.numel() / (f * inner);
        double m = static_cast<double>(outer * inner);
        std::vector<double> dgamma(f, 0.0), dbeta(f, 0.0);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t c = 0; c < f; ++c)
            for (std::size_t i = 0; i < inner; ++i) {
              std::size_t idx = (o * f + c) * inner + i;
              double gg = gz.at(idx).real();
              dbeta[c] += gg;
              dgamma[c] += gg * n.bn_xhat.at(idx).real();
            }
        CTensor gx{vx.shape()};
        if (n.train) {
          // full expression including the batch statistics terms
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t c = 0; c < f; ++c)
              for (std::size_t i = 0; i < inner; ++i) {
                std::size_t idx = (o * f + c) * inner + i;
                double gg = gz.at(idx).real();
                double xh = n.bn_xhat.at(idx).real();
                double t = gg - dbeta[c] / m - xh * dgamma[c] / m;
                gx.at(idx) = vg.at(c).real() * n.bn_inv_std[c] * t;
              }
        } else {
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t c = 0; c < f; ++c)
              for (std::size_t i = 0; i < inner; ++i) {
                std::size_t idx = (o * f + c) * inner + i;
                gx.at(idx) = vg.at(c).real() * n.bn_inv_std[c] * gz.at(idx).real();
              }
        }
        CTensor tg{vg.shape()}, tb{node(n.parents[2]).value.shape()};
        for (std::size_t c = 0; c < f; ++c) {
          tg.at(c) = dgamma[c];
          tb.at(c) = dbeta[c];
        }
        acc(g[n.parents[0]], gx);
        acc(g[n.parents[1]], tg);
        acc(g[n.parents[2]], tb);
        break;
      }
      case Op::kDropout: {
        CTensor gx{gz.shape()};
        for (std::size_t i = 0; i < gz.numel(); ++i)
          gx.at(i) = gz.at(i).real() * n.mask.at(i).real();
        acc(g[n.parents[0]], gx);
        break;
      }
      case Op::kConcat: {
        std::size_t total = n.value.shape().back();
        std::size_t nrows = n.value.numel() / total;
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < n.parents.size(); ++pi) {
          std::size_t d = n.concat_sizes[pi];
          CTensor gp{node(n.parents[pi]).value.shape()};
          for (std::size_t r = 0; r < nrows; ++r)
            for (std::size_t i = 0; i < d; ++i) gp.at(r * d + i) = gz.at(r * total + off + i);
          acc(g[n.parents[pi]], gp);
          off += d;
        }
        break;
      }
      case Op::kSliceLast: {
        const CTensor& vx = node(n.parents[0]).value;
        std::size_t d = vx.shape().back();
        std::size_t len = n.a1, begin = n.a0;
        std::size_t nrows = vx.numel() / d;
        CTensor gp{vx.shape()};
        for (std::size_t r = 0; r < nrows; ++r)
          for (std::size_t i = 0; i < len; ++i) gp.at(r * d + begin + i) = gz.at(r * len + i);
        acc(g[n.parents[0]], gp);
        break;
      }
      case Op::kReshape: {
        acc(g[n.parents[0]], gz.reshaped(node(n.parents[0]).value.shape()));
        break;
      }
      case Op::kSumLast: {
        const CTensor& vx = node(n.parents[0]).value;
        std::size_t inner = vx.numel() / std::max<std::size_t>(1, n.value.numel());
        CTensor gp{vx.shape()};
        for (std::size_t r = 0; r < n.value.numel(); ++r)
          for (std::size_t i = 0; i < inner; ++i) gp.at(r * inner + i) = gz.at(r);
        acc(g[n.parents[0]], gp);
        break;
      }
      case Op::kSumAll: {
        const CTensor& vx = node(n.parents[0]).value;
        CTensor gp{vx.shape(), gz.at(0)};
        acc(g[n.parents[0]], gp);
        break;
      }
      case Op::kDiagPart: {
        const CTensor& vx = node(n.parents[0]).value;
        std::size_t k = vx.rows();
        std::size_t nb = vx.batch();
        CTensor gp{vx.shape()};
        for (std::size_t b = 0; b < nb; ++b)
          for (std::size_t i = 0; i < k; ++i) gp.at(b * k * k + i * k + i) = gz.at(b * k + i);
        acc(g[n.parents[0]], gp);
        break;
      }
      case Op::kConv1d: {
        const CTensor& vx = node(n.parents[0]).value;
        const CTensor& vw = node(n.parents[1]).value;
        std::size_t T = vx.dim(0), cin = vx.dim(1), L = vx.dim(2);
        std::size_t cout = vw.dim(0), kw = vw.dim(2);
        std::size_t pad = n.a0;
        CTensor gx{vx.shape()}, gw{vw.shape()}, gb{node(n.parents[2]).value.shape()};
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t l = 0; l < L; ++l) {
              double gg = gz.at((t * cout + co) * L + l).real();
              if (gg == 0.0) continue;
              gb.at(co) += gg;
              for (std::size_t ci = 0; ci < cin; ++ci)
                for (std::size_t k = 0; k < kw; ++k) {
                  std::ptrdiff_t src =
                      static_cast<std::ptrdiff_t>(l + k) - static_cast<std::ptrdiff_t>(pad);
                  if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
                  std::size_t xi = (t * cin + ci) * L + static_cast<std::size_t>(src);
                  std::size_t wi = (co * cin + ci) * kw + k;
                  gw.at(wi) += gg * vx.at(xi).real();
                  gx.at(xi) += gg * vw.at(wi).real();
                }
            }
        acc(g[n.parents[0]], gx);
        acc(g[n.parents[1]], gw);
        acc(g[n.parents[2]], gb);
        break;
      }
    }
  }
  return g;
}

void Graph::accumulate_param_grads(const std::vector<CTensor>& grads) {
  if (!params_) return;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.op != Op::kParam || grads[i].empty()) continue;
    ParamEntry& e = params_->entry(n.name);
    if (e.grad.empty()) e.grad = CTensor{e.value.shape()};
    for (std::size_t j = 0; j < e.grad.numel(); ++j) {
      cplx gv = grads[i].at(j);
      if (e.real_only) gv = cplx(gv.real(), 0.0);
      e.grad.at(j) += gv;
    }
  }
}

}  // namespace beamlearn
