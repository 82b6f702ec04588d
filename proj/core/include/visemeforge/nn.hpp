#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "visemeforge/autodiff.hpp"
#include "visemeforge/rng.hpp"

namespace vf::nn {

// Owns the trainable leaves of a model in registration order. Registration
// order is the serialization order, so architectures must register
// deterministically.
class ParamSet {
 public:
  ad::Var add(const std::string& name, Tensor init);

  const std::vector<std::pair<std::string, ad::Var>>& named() const { return params_; }
  std::vector<ad::Var> vars() const;
  long scalar_count() const;

  void zero_grads();

  // Flat views over all parameters (values / gradients), used by the
  // optimizer-free paths: checkpoint payloads and finite-difference probes.
  std::vector<double> values_flat() const;
  std::vector<double> grads_flat() const;
  void set_values_flat(const std::vector<double>& flat);

 private:
  std::vector<std::pair<std::string, ad::Var>> params_;
};

Tensor glorot_uniform(Rng& rng, std::vector<long> shape, long fan_in, long fan_out);

struct Linear {
  ad::Var w, b;
  Linear() = default;
  Linear(ParamSet& ps, const std::string& name, long in, long out, Rng& rng);
  ad::Var operator()(const ad::Var& x) const { return ad::linear(x, w, b); }
};

struct Conv2d {
  ad::Var w, b;
  long stride = 1, pad = 0;
  Conv2d() = default;
  Conv2d(ParamSet& ps, const std::string& name, long cin, long cout, long kernel, long stride,
         long pad, Rng& rng);
  ad::Var operator()(const ad::Var& x) const { return ad::conv2d(x, w, b, stride, pad); }
};

// 1-D convolution over [N,C,1,L] inputs.
struct Conv1d {
  ad::Var w, b;
  long stride = 1, pad = 0;
  Conv1d() = default;
  Conv1d(ParamSet& ps, const std::string& name, long cin, long cout, long kernel, long stride,
         long pad, Rng& rng);
  ad::Var operator()(const ad::Var& x) const { return ad::conv2d(x, w, b, 1, stride, 0, pad); }
};

// Gate order z, r, n (update, reset, candidate); h' = (1-z)*n + z*h.
struct GRUCell {
  ad::Var wx, wh, b;
  long hidden = 0;
  GRUCell() = default;
  GRUCell(ParamSet& ps, const std::string& name, long in, long hidden, Rng& rng);
  ad::Var step(const ad::Var& x, const ad::Var& h) const;
};

// Stacked unidirectional GRU over a [T, in] sequence; returns the top layer's
// [T, hidden] outputs.
struct GRU {
  std::vector<GRUCell> layers;
  GRU() = default;
  GRU(ParamSet& ps, const std::string& name, long in, long hidden, long num_layers, Rng& rng);
  ad::Var run(const ad::Var& seq) const;
  // Final hidden state of the top layer, [1, hidden].
  ad::Var final_state(const ad::Var& seq) const;
};

// Gate order i, f, g, o; forget bias starts at 1.
struct LSTMCell {
  ad::Var wx, wh, b;
  long hidden = 0;
  LSTMCell() = default;
  LSTMCell(ParamSet& ps, const std::string& name, long in, long hidden, Rng& rng);
  // Returns (h', c').
  std::pair<ad::Var, ad::Var> step(const ad::Var& x, const ad::Var& h, const ad::Var& c) const;
};

// Single-layer bidirectional LSTM over [T, in].
struct BiLSTM {
  LSTMCell fwd, bwd;
  long hidden = 0;
  BiLSTM() = default;
  BiLSTM(ParamSet& ps, const std::string& name, long in, long hidden, Rng& rng);
  // Per-step outputs [T, 2*hidden] (forward and backward halves concatenated).
  ad::Var run(const ad::Var& seq) const;
  // Concatenated final forward and final backward hidden states, [1, 2*hidden].
  ad::Var final_states(const ad::Var& seq) const;
};

class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<ad::Var>& params);
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  struct Slot {
    std::vector<double> m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::unordered_map<ad::Node*, Slot> slots_;
};

}  // namespace vf::nn
