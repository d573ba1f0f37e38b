#include "emoclass/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace emoclass {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void check_finite(const Tensor& t, const char* op) {
  for (double v : t.values()) {
    if (!std::isfinite(v))
      throw NumericError(std::string("non-finite value produced by ") + op);
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  t.data_ = std::make_shared<TensorData>();
  t.data_->shape = std::move(shape);
  t.data_->values.assign(shape_numel(t.data_->shape), 0.0);
  return t;
}

Tensor Tensor::from_values(std::vector<std::size_t> shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size())
    throw UsageError("tensor shape does not match value count");
  Tensor t;
  t.data_ = std::make_shared<TensorData>();
  t.data_->shape = std::move(shape);
  t.data_->values = std::move(values);
  return t;
}

Tensor Tensor::scalar(double value) { return from_values({1}, {value}); }

void Tensor::set_requires_grad(bool on) {
  data_->requires_grad = on;
  if (on) ensure_grad();
}

void Tensor::ensure_grad() {
  if (data_->grad.size() != data_->values.size()) data_->grad.assign(data_->values.size(), 0.0);
}

void Tensor::zero_grad() {
  std::fill(data_->grad.begin(), data_->grad.end(), 0.0);
}

void Tensor::release_grad() {
  if (!data_->requires_grad) data_->grad.clear();
}

namespace {

// Copies share the underlying buffer; grads are only materialized while a
// tape is recording.
void prepare(Tape* tape, std::initializer_list<Tensor> tensors) {
  if (tape == nullptr) return;
  for (Tensor t : tensors) t.ensure_grad();
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
  require(a.shape().size() == 2 && b.shape().size() == 2, "matmul expects 2-D tensors");
  std::size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  require(k == k2, "matmul inner dimensions differ");
  Tensor out = Tensor::zeros({m, n});
  const double* A = a.values().data();
  const double* B = b.values().data();
  double* O = out.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B + p * n;
      double* orow = O + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  check_finite(out, "matmul");
  if (tape != nullptr) {
    prepare(tape, {out, a, b});
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc, m, k, n]() mutable {
      const double* G = oc.grad().data();
      const double* A = ac.values().data();
      const double* B = bc.values().data();
      double* dA = ac.grad().data();
      double* dB = bc.grad().data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double g = G[i * n + j];
          if (g == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) {
            dA[i * k + p] += g * B[p * n + j];
            dB[p * n + j] += g * A[i * k + p];
          }
        }
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
  bool broadcast = a.shape().size() == 2 && b.shape().size() == 1 && b.dim(0) == a.dim(1);
  require(broadcast || a.shape() == b.shape(), "add expects equal shapes or [m,n] + [n]");
  Tensor out = Tensor::zeros(a.shape());
  std::size_t n = a.numel();
  if (broadcast) {
    std::size_t cols = b.dim(0);
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.values()[i] + b.values()[i % cols];
  } else {
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.values()[i] + b.values()[i];
  }
  check_finite(out, "add");
  if (tape != nullptr) {
    prepare(tape, {out, a, b});
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc, broadcast, n]() mutable {
      const double* G = oc.grad().data();
      double* dA = ac.grad().data();
      double* dB = bc.grad().data();
      if (broadcast) {
        std::size_t cols = bc.dim(0);
        for (std::size_t i = 0; i < n; ++i) {
          dA[i] += G[i];
          dB[i % cols] += G[i];
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          dA[i] += G[i];
          dB[i] += G[i];
        }
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b, Tape* tape) {
  require(a.shape() == b.shape(), "mul expects equal shapes");
  Tensor out = Tensor::zeros(a.shape());
  std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.values()[i] * b.values()[i];
  check_finite(out, "mul");
  if (tape != nullptr) {
    prepare(tape, {out, a, b});
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc, n]() mutable {
      const double* G = oc.grad().data();
      double* dA = ac.grad().data();
      double* dB = bc.grad().data();
      const double* A = ac.values().data();
      const double* B = bc.values().data();
      for (std::size_t i = 0; i < n; ++i) {
        dA[i] += G[i] * B[i];
        dB[i] += G[i] * A[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double factor, Tape* tape) {
  Tensor out = Tensor::zeros(a.shape());
  std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.values()[i] * factor;
  check_finite(out, "scale");
  if (tape != nullptr) {
    prepare(tape, {out, a});
    Tensor ac = a, oc = out;
    tape->record([ac, oc, factor, n]() mutable {
      const double* G = oc.grad().data();
      double* dA = ac.grad().data();
      for (std::size_t i = 0; i < n; ++i) dA[i] += G[i] * factor;
    });
  }
  return out;
}

Tensor row_scale(const Tensor& x, const Tensor& s, Tape* tape) {
  require(x.shape().size() == 2 && s.shape().size() == 1 && s.dim(0) == x.dim(0),
          "row_scale expects x[m,n] and s[m]");
  std::size_t m = x.dim(0), n = x.dim(1);
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < m; ++i) {
    double f = s.values()[i];
    for (std::size_t j = 0; j < n; ++j) out.values()[i * n + j] = x.values()[i * n + j] * f;
  }
  check_finite(out, "row_scale");
  if (tape != nullptr) {
    prepare(tape, {out, x, s});
    Tensor xc = x, sc = s, oc = out;
    tape->record([xc, sc, oc, m, n]() mutable {
      const double* G = oc.grad().data();
      const double* X = xc.values().data();
      const double* S = sc.values().data();
      double* dX = xc.grad().data();
      double* dS = sc.grad().data();
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          dX[i * n + j] += G[i * n + j] * S[i];
          acc += G[i * n + j] * X[i * n + j];
        }
        dS[i] += acc;
      }
    });
  }
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b, Tape* tape) {
  require(a.shape().size() == 2 && b.shape().size() == 2 && a.dim(0) == b.dim(0),
          "concat_cols expects 2-D tensors with equal row counts");
  std::size_t m = a.dim(0), p = a.dim(1), q = b.dim(1);
  Tensor out = Tensor::zeros({m, p + q});
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(a.values().data() + i * p, p, out.values().data() + i * (p + q));
    std::copy_n(b.values().data() + i * q, q, out.values().data() + i * (p + q) + p);
  }
  if (tape != nullptr) {
    prepare(tape, {out, a, b});
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc, m, p, q]() mutable {
      const double* G = oc.grad().data();
      double* dA = ac.grad().data();
      double* dB = bc.grad().data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < p; ++j) dA[i * p + j] += G[i * (p + q) + j];
        for (std::size_t j = 0; j < q; ++j) dB[i * q + j] += G[i * (p + q) + p + j];
      }
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len, Tape* tape) {
  require(x.shape().size() == 2, "slice_cols expects a 2-D tensor");
  std::size_t m = x.dim(0), n = x.dim(1);
  require(start + len <= n, "slice_cols range out of bounds");
  Tensor out = Tensor::zeros({m, len});
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(x.values().data() + i * n + start, len, out.values().data() + i * len);
  if (tape != nullptr) {
    prepare(tape, {out, x});
    Tensor xc = x, oc = out;
    tape->record([xc, oc, m, n, start, len]() mutable {
      const double* G = oc.grad().data();
      double* dX = xc.grad().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < len; ++j) dX[i * n + start + j] += G[i * len + j];
    });
  }
  return out;
}

Tensor relu(const Tensor& x, Tape* tape) {
  Tensor out = Tensor::zeros(x.shape());
  std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) {
    double v = x.values()[i];
    if (tape != nullptr && std::abs(v) < 1e-12) tape->nondiff_hit = true;
    out.values()[i] = v > 0.0 ? v : 0.0;
  }
  check_finite(out, "relu");
  if (tape != nullptr) {
    prepare(tape, {out, x});
    Tensor xc = x, oc = out;
    tape->record([xc, oc, n]() mutable {
      const double* G = oc.grad().data();
      const double* X = xc.values().data();
      double* dX = xc.grad().data();
      for (std::size_t i = 0; i < n; ++i)
        if (X[i] > 0.0) dX[i] += G[i];
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x, Tape* tape) {
  Tensor out = Tensor::zeros(x.shape());
  std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) {
    double v = x.values()[i];
    double y;
    if (v >= 0.0) {
      y = 1.0 / (1.0 + std::exp(-v));
    } else {
      double e = std::exp(v);
      y = e / (1.0 + e);
    }
    out.values()[i] = y;
  }
  check_finite(out, "sigmoid");
  if (tape != nullptr) {
    prepare(tape, {out, x});
    Tensor xc = x, oc = out;
    tape->record([xc, oc, n]() mutable {
      const double* G = oc.grad().data();
      const double* Y = oc.values().data();
      double* dX = xc.grad().data();
      for (std::size_t i = 0; i < n; ++i) dX[i] += G[i] * Y[i] * (1.0 - Y[i]);
    });
  }
  return out;
}

Tensor tanh_op(const Tensor& x, Tape* tape) {
  Tensor out = Tensor::zeros(x.shape());
  std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.values()[i] = std::tanh(x.values()[i]);
  check_finite(out, "tanh");
  if (tape != nullptr) {
    prepare(tape, {out, x});
    Tensor xc = x, oc = out;
    tape->record([xc, oc, n]() mutable {
      const double* G = oc.grad().data();
      const double* Y = oc.values().data();
      double* dX = xc.grad().data();
      for (std::size_t i = 0; i < n; ++i) dX[i] += G[i] * (1.0 - Y[i] * Y[i]);
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double rate, bool training, std::uint64_t seed, Tape* tape) {
  require(rate >= 0.0 && rate < 1.0, "dropout rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  double keep = 1.0 - rate;
  Rng rng(seed);
  std::size_t n = x.numel();
  auto mask = std::make_shared<std::vector<double>>(n, 0.0);
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.uniform() >= rate) {
      (*mask)[i] = 1.0 / keep;
      out.values()[i] = x.values()[i] * (*mask)[i];
    }
  }
  check_finite(out, "dropout");
  if (tape != nullptr) {
    prepare(tape, {out, x});
    Tensor xc = x, oc = out;
    tape->record([xc, oc, mask, n]() mutable {
      const double* G = oc.grad().data();
      double* dX = xc.grad().data();
      for (std::size_t i = 0; i < n; ++i) dX[i] += G[i] * (*mask)[i];
    });
  }
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
              Tape* tape) {
  require(x.shape().size() == 3, "conv2d expects input [batch, height, width]");
  require(w.shape().size() == 3, "conv2d expects weights [filters, kh, kw]");
  require(bias.shape().size() == 1 && bias.dim(0) == w.dim(0),
          "conv2d bias must have one value per filter");
  require(stride >= 1, "conv2d stride must be >= 1");
  std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2);
  std::size_t F = w.dim(0), kh = w.dim(1), kw = w.dim(2);
  require(H >= kh && W >= kw, "conv2d kernel larger than input");
  std::size_t OH = (H - kh) / stride + 1;
  std::size_t OW = (W - kw) / stride + 1;
  Tensor out = Tensor::zeros({B, F, OH, OW});
  const double* X = x.values().data();
  const double* K = w.values().data();
  const double* C = bias.values().data();
  double* O = out.values().data();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t i = 0; i < OH; ++i) {
        for (std::size_t j = 0; j < OW; ++j) {
          double acc = C[f];
          for (std::size_t p = 0; p < kh; ++p) {
            const double* xrow = X + (b * H + i * stride + p) * W + j * stride;
            const double* krow = K + (f * kh + p) * kw;
            for (std::size_t q = 0; q < kw; ++q) acc += xrow[q] * krow[q];
          }
          O[((b * F + f) * OH + i) * OW + j] = acc;
        }
      }
    }
  }
  check_finite(out, "conv2d");
  if (tape != nullptr) {
    prepare(tape, {out, x, w, bias});
    Tensor xc = x, wc = w, bc = bias, oc = out;
    tape->record([xc, wc, bc, oc, B, H, W, F, kh, kw, OH, OW, stride]() mutable {
      const double* G = oc.grad().data();
      const double* X = xc.values().data();
      const double* K = wc.values().data();
      double* dX = xc.grad().data();
      double* dK = wc.grad().data();
      double* dC = bc.grad().data();
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t f = 0; f < F; ++f) {
          for (std::size_t i = 0; i < OH; ++i) {
            for (std::size_t j = 0; j < OW; ++j) {
              double g = G[((b * F + f) * OH + i) * OW + j];
              if (g == 0.0) continue;
              dC[f] += g;
              for (std::size_t p = 0; p < kh; ++p) {
                std::size_t xbase = (b * H + i * stride + p) * W + j * stride;
                std::size_t kbase = (f * kh + p) * kw;
                for (std::size_t q = 0; q < kw; ++q) {
                  dX[xbase + q] += g * K[kbase + q];
                  dK[kbase + q] += g * X[xbase + q];
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor maxpool2d(const Tensor& x, Tape* tape) {
  require(x.shape().size() == 4, "maxpool2d expects [batch, filters, height, width]");
  std::size_t B = x.dim(0), F = x.dim(1), H = x.dim(2), W = x.dim(3);
  require(H >= 2 && W >= 2, "maxpool2d input smaller than its 2x2 window");
  std::size_t OH = H / 2, OW = W / 2;
  Tensor out = Tensor::zeros({B, F, OH, OW});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel(), 0);
  const double* X = x.values().data();
  double* O = out.values().data();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t i = 0; i < OH; ++i) {
        for (std::size_t j = 0; j < OW; ++j) {
          std::size_t base = (b * F + f) * H;
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_idx = 0;
          int ties = 0;
          for (std::size_t p = 0; p < 2; ++p) {
            for (std::size_t q = 0; q < 2; ++q) {
              std::size_t idx = (base + i * 2 + p) * W + j * 2 + q;
              if (X[idx] > best) {
                best = X[idx];
                best_idx = idx;
                ties = 1;
              } else if (X[idx] == best) {
                ++ties;
              }
            }
          }
          if (tape != nullptr && ties > 1) tape->nondiff_hit = true;
          std::size_t oidx = ((b * F + f) * OH + i) * OW + j;
          O[oidx] = best;
          (*argmax)[oidx] = best_idx;
        }
      }
    }
  }
  check_finite(out, "maxpool2d");
  if (tape != nullptr) {
    prepare(tape, {out, x});
    Tensor xc = x, oc = out;
    tape->record([xc, oc, argmax]() mutable {
      const double* G = oc.grad().data();
      double* dX = xc.grad().data();
      for (std::size_t i = 0; i < oc.numel(); ++i) dX[(*argmax)[i]] += G[i];
    });
  }
  return out;
}

Tensor flatten(const Tensor& x, Tape* tape) {
  require(!x.shape().empty(), "flatten expects a non-scalar tensor");
  std::size_t batch = x.dim(0);
  std::size_t rest = batch == 0 ? 0 : x.numel() / batch;
  Tensor out = Tensor::from_values({batch, rest}, x.values());
  if (tape != nullptr) {
    prepare(tape, {out, x});
    Tensor xc = x, oc = out;
    tape->record([xc, oc]() mutable {
      const double* G = oc.grad().data();
      double* dX = xc.grad().data();
      for (std::size_t i = 0; i < oc.numel(); ++i) dX[i] += G[i];
    });
  }
  return out;
}

Tensor embedding_rows(const Tensor& table, const std::vector<std::int32_t>& ids, Tape* tape) {
  require(table.shape().size() == 2, "embedding table must be 2-D");
  std::size_t V = table.dim(0), D = table.dim(1);
  for (std::int32_t id : ids)
    require(id >= 0 && static_cast<std::size_t>(id) < V,
            "token id " + std::to_string(id) + " outside embedding table");
  Tensor out = Tensor::zeros({ids.size(), D});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::copy_n(table.values().data() + static_cast<std::size_t>(ids[r]) * D, D,
                out.values().data() + r * D);
  }
  check_finite(out, "embedding_rows");
  if (tape != nullptr) {
    prepare(tape, {out, table});
    Tensor tc = table, oc = out;
    auto idsc = std::make_shared<std::vector<std::int32_t>>(ids);
    tape->record([tc, oc, idsc, D]() mutable {
      const double* G = oc.grad().data();
      double* dT = tc.grad().data();
      for (std::size_t r = 0; r < idsc->size(); ++r) {
        std::int32_t id = (*idsc)[r];
        if (id == 0) continue;  // pad row never trains
        double* dst = dT + static_cast<std::size_t>(id) * D;
        const double* src = G + r * D;
        for (std::size_t d = 0; d < D; ++d) dst[d] += src[d];
      }
    });
  }
  return out;
}

Tensor embedding_seq(const Tensor& table, const std::vector<std::int32_t>& ids, std::size_t batch,
                     std::size_t time, Tape* tape) {
  require(ids.size() == batch * time, "embedding_seq id count must be batch * time");
  Tensor flat = embedding_rows(table, ids, tape);
  // Reshape [B*T, D] -> [B, T, D]; same layout, so reuse the buffer through
  // a flatten-style pass-through node.
  std::size_t D = table.dim(1);
  Tensor out = Tensor::from_values({batch, time, D}, flat.values());
  if (tape != nullptr) {
    prepare(tape, {out, flat});
    Tensor fc = flat, oc = out;
    tape->record([fc, oc]() mutable {
      const double* G = oc.grad().data();
      double* dF = fc.grad().data();
      for (std::size_t i = 0; i < oc.numel(); ++i) dF[i] += G[i];
    });
  }
  return out;
}

Tensor sum(const Tensor& x, Tape* tape) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  Tensor out = Tensor::scalar(acc);
  check_finite(out, "sum");
  if (tape != nullptr) {
    prepare(tape, {out, x});
    Tensor xc = x, oc = out;
    tape->record([xc, oc]() mutable {
      double g = oc.grad()[0];
      for (double& d : xc.grad()) d += g;
    });
  }
  return out;
}

Tensor mean(const Tensor& x, Tape* tape) {
  require(x.numel() > 0, "mean of an empty tensor");
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  double inv = 1.0 / static_cast<double>(x.numel());
  Tensor out = Tensor::scalar(acc * inv);
  check_finite(out, "mean");
  if (tape != nullptr) {
    prepare(tape, {out, x});
    Tensor xc = x, oc = out;
    tape->record([xc, oc, inv]() mutable {
      double g = oc.grad()[0] * inv;
      for (double& d : xc.grad()) d += g;
    });
  }
  return out;
}

Tensor softmax(const Tensor& x, Tape* tape) {
  require(x.shape().size() == 2, "softmax expects a 2-D tensor");
  std::size_t m = x.dim(0), n = x.dim(1);
  require(n > 0, "softmax over zero columns");
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.values().data() + i * n;
    double* orow = out.values().data() + i * n;
    double mx = *std::max_element(row, row + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      s += orow[j];
    }
    for (std::size_t j = 0; j < n; ++j) orow[j] /= s;
  }
  check_finite(out, "softmax");
  if (tape != nullptr) {
    prepare(tape, {out, x});
    Tensor xc = x, oc = out;
    tape->record([xc, oc, m, n]() mutable {
      const double* G = oc.grad().data();
      const double* P = oc.values().data();
      double* dX = xc.grad().data();
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += G[i * n + j] * P[i * n + j];
        for (std::size_t j = 0; j < n; ++j)
          dX[i * n + j] += P[i * n + j] * (G[i * n + j] - dot);
      }
    });
  }
  return out;
}

std::pair<Tensor, Tensor> softmax_cross_entropy(const Tensor& logits, const Tensor& onehot,
                                                Tape* tape) {
  require(logits.shape().size() == 2, "softmax_cross_entropy expects 2-D logits");
  require(logits.shape() == onehot.shape(), "logits and targets must have equal shapes");
  std::size_t B = logits.dim(0), C = logits.dim(1);
  require(B > 0 && C > 0, "softmax_cross_entropy over an empty batch");
  for (std::size_t i = 0; i < B; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < C; ++j) s += onehot.values()[i * C + j];
    require(std::abs(s - 1.0) < 1e-6, "each target row must sum to 1");
  }

  Tensor probs = Tensor::zeros({B, C});
  double total = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    const double* z = logits.values().data() + i * C;
    const double* y = onehot.values().data() + i * C;
    double* p = probs.values().data() + i * C;
    double mx = *std::max_element(z, z + C);
    double s = 0.0;
    for (std::size_t j = 0; j < C; ++j) {
      p[j] = std::exp(z[j] - mx);
      s += p[j];
    }
    double logsum = std::log(s);
    double dot = 0.0;
    for (std::size_t j = 0; j < C; ++j) {
      p[j] /= s;
      dot += y[j] * (z[j] - mx);
    }
    total += logsum - dot;
  }
  Tensor loss = Tensor::scalar(total / static_cast<double>(B));
  check_finite(loss, "softmax_cross_entropy");
  check_finite(probs, "softmax_cross_entropy");
  if (tape != nullptr) {
    prepare(tape, {loss, probs, logits});
    Tensor lc = logits, yc = onehot, pc = probs, sc = loss;
    tape->record([lc, yc, pc, sc, B, C]() mutable {
      double g = sc.grad()[0] / static_cast<double>(B);
      const double* P = pc.values().data();
      const double* Y = yc.values().data();
      double* dZ = lc.grad().data();
      for (std::size_t i = 0; i < B * C; ++i) dZ[i] += g * (P[i] - Y[i]);
    });
  }
  return {loss, probs};
}

void backward(const Tensor& loss, Tape& tape) {
  if (tape.consumed) throw UsageError("tape already consumed by a previous backward pass");
  require(loss.defined() && loss.numel() == 1, "backward expects a scalar loss");
  Tensor l = loss;
  l.ensure_grad();
  l.grad()[0] = 1.0;
  for (auto it = tape.nodes.rbegin(); it != tape.nodes.rend(); ++it) (*it)();
  tape.consumed = true;
  tape.nodes.clear();
}

double gradient_check(const std::function<Tensor(Tape*)>& f, std::vector<Tensor> params,
                      double eps) {
  for (Tensor& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  Tape tape;
  Tensor loss = f(&tape);
  backward(loss, tape);
  if (tape.nondiff_hit)
    throw NumericError("gradient_check evaluated at a non-differentiable point");

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Tensor& p : params) analytic.push_back(p.grad());

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    for (std::size_t c = 0; c < p.numel(); ++c) {
      double orig = p.values()[c];
      p.values()[c] = orig + eps;
      double up = f(nullptr).values()[0];
      p.values()[c] = orig - eps;
      double down = f(nullptr).values()[0];
      p.values()[c] = orig;
      double fd = (up - down) / (2.0 * eps);
      double a = analytic[pi][c];
      double err = std::abs(a - fd) / std::max(1.0, std::abs(a));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace emoclass
