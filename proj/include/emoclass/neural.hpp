#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoclass/dense.hpp"
#include "emoclass/features.hpp"
#include "emoclass/tensor.hpp"

namespace emoclass {

enum class ArchKind { cnn, lstm, gru, bilstm, bigru };

ArchKind parse_arch_kind(const std::string& name);
std::string arch_kind_name(ArchKind kind);
bool is_recurrent(ArchKind kind);
bool is_bidirectional(ArchKind kind);

struct NeuralArchitecture {
  ArchKind kind = ArchKind::bigru;
  std::size_t embed_dim = 300;
  std::size_t max_len = 40;
  std::size_t hidden_units = 128;   // recurrent cell width
  std::size_t fc_units = 100;       // 100 for recurrent kinds, 50 for cnn
  std::size_t conv_filters = 32;    // per branch (3x3 and 5x5)
  double dropout = 0.5;             // 0.5 recurrent (applied twice), 0.8 cnn (applied once)
  std::size_t output_units = 4;

  // Defaults for a kind at a given embedding geometry.
  static NeuralArchitecture for_kind(ArchKind kind, std::size_t embed_dim, std::size_t max_len);

  nlohmann::json to_json() const;
  static NeuralArchitecture from_json(const nlohmann::json& j);

  // Width of the representation entering the fully connected layer.
  std::size_t representation_dim() const;
  void validate() const;  // throws UsageError on inconsistent geometry
};

// A model is its architecture plus named parameter tensors in creation order
// (the order is also the artifact's tensor-block order):
//   embedding, recurrent fw.* [bw.*] or conv3.*/conv5.*, fc.w, fc.b, out.w, out.b
struct NeuralModel {
  NeuralArchitecture arch;
  std::vector<std::pair<std::string, Tensor>> params;

  Tensor param(const std::string& name) const;  // UsageError when missing
  std::vector<Tensor> parameter_list() const;
  std::size_t parameter_count() const;  // total scalars excluding the embedding table
};

// Fresh parameters: weight matrices Uniform(-r, r) with r = sqrt(6/(fan_in+fan_out)),
// biases zero, embedding copied from the table (row 0 = pad stays all-zero and is
// never updated by training).
NeuralModel build_model(const NeuralArchitecture& arch, const EmbeddingTable& embedding,
                        std::uint64_t seed);

// Single recurrent cell steps, exposed for direct inspection and gradient tests.

struct LstmWeights {
  Tensor w;  // [input+hidden, 4*hidden], gate column blocks ordered i, f, o, g
  Tensor b;  // [4*hidden]
};

// Returns (h', c'): gates i,f,o = sigmoid, candidate g = tanh,
// c' = f*c + i*g, h' = o*tanh(c').
std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h, const Tensor& c,
                                    const LstmWeights& weights, Tape* tape);

struct GruWeights {
  Tensor wzr;  // [input+hidden, 2*hidden], column blocks ordered z, r
  Tensor bzr;  // [2*hidden]
  Tensor wg;   // [input+hidden, hidden]
  Tensor bg;   // [hidden]
};

// z,r = sigmoid(affine); candidate = tanh(affine with r*h); h' = (1-z)*h + z*candidate.
Tensor gru_step(const Tensor& x, const Tensor& h, const GruWeights& weights, Tape* tape);

// Logits [batch, 4] for a batch of encoded sequences (each exactly max_len ids,
// right-padded with pad id 0). Pad steps are masked out of recurrent state updates,
// so output is invariant to extra padding. dropout_seed only matters when training.
Tensor model_forward(const NeuralModel& model,
                     const std::vector<std::vector<std::int32_t>>& batch, Tape* tape,
                     bool training, std::uint64_t dropout_seed);

// Final hidden state of one recurrent direction ("fw" or "bw"), exposed for tests.
Tensor recurrent_direction_state(const NeuralModel& model, const std::string& prefix,
                                 bool reversed,
                                 const std::vector<std::vector<std::int32_t>>& batch, Tape* tape);

struct SequenceResult {
  DenseMatrix probabilities;  // [batch, 4], rows sum to 1
  bool warned_empty = false;  // some row had no tokens; it was set to uniform
};

// Inference: softmax probabilities per row; all-pad rows yield uniform 0.25
// and raise the warning flag.
SequenceResult run_sequence(const NeuralModel& model,
                            const std::vector<std::vector<std::int32_t>>& batch);

// Majority combination of two members' probability rows: agreement keeps the agreed
// label; disagreement takes the argmax of the elementwise mean row; exact ties fall
// back to canonical label order. Scores are always the mean rows.
struct EnsembleResult {
  std::vector<int> labels;
  DenseMatrix probabilities;
  bool warned_empty = false;
};

EnsembleResult combine_majority(const DenseMatrix& prob_a, const DenseMatrix& prob_b);
EnsembleResult ensemble_predict(const NeuralModel& bilstm, const NeuralModel& bigru,
                                const std::vector<std::vector<std::int32_t>>& batch);

}  // namespace emoclass
