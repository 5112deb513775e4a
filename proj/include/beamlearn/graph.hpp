#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "beamlearn/params.hpp"
#include "beamlearn/rng.hpp"
#include "beamlearn/tensor.hpp"

namespace beamlearn {

// Reverse-mode autodiff over complex tensors.
//
// Values are computed eagerly as nodes are appended, so the insertion order
// is a topological order and the backward pass is a single reverse sweep that
// visits every node once. Complex tensors are differentiated in the real
// parameterization: the gradient stored for a node is
// dL/dRe + i * dL/dIm, which is what a finite-difference check over the
// real/imaginary components reproduces.
//
// Ops that are mathematically real (log, tanh, relu, softmax, batch norm,
// dropout, division) reject operands with non-negligible imaginary parts.

using NodeId = int;

enum class Op {
  kConst,
  kParam,
  kAdd,
  kMul,
  kScale,
  kMatMul,
  kTransposeLast2,
  kAdjoint,
  kConj,
  kInverse,
  kAbs2,
  kRealPart,
  kImagPart,
  kMakeComplex,
  kLog,
  kSqrt,
  kDiv,
  kTanh,
  kRelu,
  kSoftmax,
  kBatchNorm,
  kDropout,
  kConcat,
  kSliceLast,
  kReshape,
  kSumLast,
  kSumAll,
  kDiagPart,
  kConv1d,
};

class Graph {
 public:
  explicit Graph(Params* params = nullptr, std::uint64_t dropout_seed = 0);

  NodeId constant(CTensor v);
  NodeId constant_scalar(double v) { return constant(CTensor::scalar(v)); }
  NodeId param(const std::string& name);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, cplx s);
  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose_last2(NodeId a);
  NodeId adjoint(NodeId a);
  NodeId conj(NodeId a);
  NodeId inverse(NodeId a);
  NodeId abs2(NodeId a);
  NodeId real_part(NodeId a);
  NodeId imag_part(NodeId a);
  NodeId make_complex(NodeId re, NodeId im);
  NodeId log_real(NodeId a);
  NodeId sqrt_real(NodeId a);
  NodeId div_real(NodeId a, NodeId b);
  NodeId tanh_real(NodeId a);
  NodeId relu(NodeId a);
  NodeId softmax_lastdim(NodeId a);
  // Batch norm over all dims except the feature axis, counted from the end
  // (0 for [T,F] dense layers, 1 for [T,C,L] conv maps). Buffer tensors
  // <prefix>.running_mean / <prefix>.running_var must exist in Params.
  NodeId batch_norm(NodeId x, NodeId gamma, NodeId beta, const std::string& buffer_prefix,
                    bool train, std::size_t feat_from_end);
  NodeId dropout(NodeId a, double rate, bool train);
  NodeId concat_lastdim(const std::vector<NodeId>& parts);
  NodeId slice_lastdim(NodeId a, std::size_t begin, std::size_t len);
  NodeId reshape(NodeId a, Shape s);
  NodeId sum_lastdims(NodeId a, std::size_t ndims);
  NodeId sum_all(NodeId a);
  NodeId mean_all(NodeId a);
  NodeId diag_part(NodeId a);
  // x: [T, Cin, L], w: [Cout, Cin, kW], b: [Cout]; same-size output padding.
  NodeId conv1d(NodeId x, NodeId w, NodeId b);

  const CTensor& value(NodeId id) const;
  double inverse_rcond(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  // Per-node gradients of a real scalar loss. Does not touch Params.
  std::vector<CTensor> backward(NodeId loss) const;
  // Adds the gradients of param nodes into Params (imaginary parts dropped
  // for real-only parameters).
  void accumulate_param_grads(const std::vector<CTensor>& grads);

 private:
  struct Node {
    Op op;
    std::vector<NodeId> parents;
    CTensor value;
    cplx scalar{0.0, 0.0};
    std::size_t a0 = 0, a1 = 0;   // op-specific (slice begin/len, reduce dims, ...)
    bool train = false;
    double rate = 0.0;
    double rcond = 0.0;
    CTensor mask;                 // dropout
    CTensor bn_xhat;              // batch norm caches
    std::vector<double> bn_inv_std;
    std::string name;             // param name / batch-norm buffer prefix
    std::vector<std::size_t> concat_sizes;
  };

  NodeId push(Node n);
  const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }

  std::vector<Node> nodes_;
  Params* params_ = nullptr;
  Rng dropout_rng_;
};

}  // namespace beamlearn
