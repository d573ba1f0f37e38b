#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "emoclass/util.hpp"

namespace emoclass {

// Reverse-mode autodiff over row-major double tensors. Ops record their
// backward closure on a Tape; pass tape == nullptr for pure inference.
struct TensorData {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;  // allocated only while a tape is recording
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor from_values(std::vector<std::size_t> shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return data_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return data_->shape; }
  std::size_t numel() const { return data_->values.size(); }
  std::vector<double>& values() { return data_->values; }
  const std::vector<double>& values() const { return data_->values; }
  std::vector<double>& grad() { return data_->grad; }
  const std::vector<double>& grad() const { return data_->grad; }
  bool requires_grad() const { return data_->requires_grad; }

  // Marks a parameter: keeps gradient storage allocated across steps.
  void set_requires_grad(bool on);
  void ensure_grad();   // allocate zero grad storage if absent
  void zero_grad();
  void release_grad();  // drop grad storage (inference memory)

  std::size_t dim(std::size_t axis) const { return data_->shape[axis]; }

  // Identity comparison (shared buffer), used by the optimizer's slot map.
  const TensorData* id() const { return data_.get(); }

 private:
  std::shared_ptr<TensorData> data_;
};

struct Tape {
  std::vector<std::function<void()>> nodes;
  bool consumed = false;
  // Set when an op was evaluated at a non-differentiable point (relu at 0,
  // tied max-pool cells); gradient_check refuses such runs.
  bool nondiff_hit = false;

  void record(std::function<void()> fn) { nodes.push_back(std::move(fn)); }
};

// --- ops ------------------------------------------------------------------
// All ops validate shapes (UsageError) and check outputs for non-finite
// values (NumericError naming the op).

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape);
// Same-shape elementwise add, or [m,n] + [n] bias broadcast.
Tensor add(const Tensor& a, const Tensor& b, Tape* tape);
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape);  // Hadamard
Tensor scale(const Tensor& a, double factor, Tape* tape);
// x[m,n] with row i multiplied by s[m]; the sequence-mask primitive.
Tensor row_scale(const Tensor& x, const Tensor& s, Tape* tape);
Tensor concat_cols(const Tensor& a, const Tensor& b, Tape* tape);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len, Tape* tape);

Tensor relu(const Tensor& x, Tape* tape);
Tensor sigmoid(const Tensor& x, Tape* tape);
Tensor tanh_op(const Tensor& x, Tape* tape);
// Inverted dropout: kept entries scaled by 1/(1-rate). Identity when not
// training or rate == 0.
Tensor dropout(const Tensor& x, double rate, bool training, std::uint64_t seed, Tape* tape);

// x[B,H,W] (single channel), w[F,kh,kw], bias[F]; valid padding -> [B,F,OH,OW].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
              Tape* tape);
// 2x2 window, stride 2, floor sizing -> [B,F,H/2,W/2].
Tensor maxpool2d(const Tensor& x, Tape* tape);
// [B, ...] -> [B, prod(rest)]
Tensor flatten(const Tensor& x, Tape* tape);

// Gather rows of table[V,D] -> [n,D]. Backward scatter-adds, skipping pad
// id 0 so the pad row never trains.
Tensor embedding_rows(const Tensor& table, const std::vector<std::int32_t>& ids, Tape* tape);
// Batched sequences: ids is batch-major [B*T] -> [B,T,D].
Tensor embedding_seq(const Tensor& table, const std::vector<std::int32_t>& ids, std::size_t batch,
                     std::size_t time, Tape* tape);

Tensor sum(const Tensor& x, Tape* tape);
Tensor mean(const Tensor& x, Tape* tape);
// Row-wise softmax of x[m,n], differentiable.
Tensor softmax(const Tensor& x, Tape* tape);
// Fused loss: mean over batch of cross-entropy(softmax(logits), onehot).
// Returns {scalar loss, probabilities [B,C]}. Gradient flows to logits only.
std::pair<Tensor, Tensor> softmax_cross_entropy(const Tensor& logits, const Tensor& onehot,
                                                Tape* tape);

// Runs the tape backward from a scalar loss, then clears it. A consumed
// tape cannot be run twice.
void backward(const Tensor& loss, Tape& tape);

// --- finite-difference verification ----------------------------------------
// f builds the scalar loss from the given parameters; it must honour
// tape == nullptr. Returns the worst relative error over all coordinates of
// all params: |analytic - fd| / max(1, |analytic|).
double gradient_check(const std::function<Tensor(Tape*)>& f, std::vector<Tensor> params,
                      double eps = 1e-5);

}  // namespace emoclass
