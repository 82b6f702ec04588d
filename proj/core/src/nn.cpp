#include "visemeforge/nn.hpp"

#include <cmath>

namespace vf::nn {

ad::Var ParamSet::add(const std::string& name, Tensor init) {
  ad::Var v = ad::leaf(std::move(init), /*requires_grad=*/true);
  params_.emplace_back(name, v);
  return v;
}

std::vector<ad::Var> ParamSet::vars() const {
  std::vector<ad::Var> out;
  out.reserve(params_.size());
  for (const auto& [name, v] : params_) out.push_back(v);
  return out;
}

long ParamSet::scalar_count() const {
  long n = 0;
  for (const auto& [name, v] : params_) n += v->value.numel();
  return n;
}

void ParamSet::zero_grads() {
  for (const auto& [name, v] : params_) v->zero_grad();
}

std::vector<double> ParamSet::values_flat() const {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(scalar_count()));
  for (const auto& [name, v] : params_)
    flat.insert(flat.end(), v->value.vec().begin(), v->value.vec().end());
  return flat;
}

std::vector<double> ParamSet::grads_flat() const {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(scalar_count()));
  for (const auto& [name, v] : params_) {
    const_cast<ad::Node*>(v.get())->ensure_grad();
    flat.insert(flat.end(), v->grad.vec().begin(), v->grad.vec().end());
  }
  return flat;
}

void ParamSet::set_values_flat(const std::vector<double>& flat) {
  if (static_cast<long>(flat.size()) != scalar_count())
    throw ShapeError("set_values_flat: size mismatch");
  std::size_t off = 0;
  for (const auto& [name, v] : params_) {
    std::copy(flat.begin() + off, flat.begin() + off + v->value.vec().size(),
              v->value.vec().begin());
    off += v->value.vec().size();
  }
}

Tensor glorot_uniform(Rng& rng, std::vector<long> shape, long fan_in, long fan_out) {
  Tensor t(std::move(shape));
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (long i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-a, a);
  return t;
}

Linear::Linear(ParamSet& ps, const std::string& name, long in, long out, Rng& rng) {
  w = ps.add(name + ".w", glorot_uniform(rng, {in, out}, in, out));
  b = ps.add(name + ".b", Tensor::zeros({out}));
}

Conv2d::Conv2d(ParamSet& ps, const std::string& name, long cin, long cout, long kernel,
               long stride_, long pad_, Rng& rng)
    : stride(stride_), pad(pad_) {
  const long fan_in = cin * kernel * kernel;
  const long fan_out = cout * kernel * kernel;
  w = ps.add(name + ".w", glorot_uniform(rng, {cout, cin, kernel, kernel}, fan_in, fan_out));
  b = ps.add(name + ".b", Tensor::zeros({cout}));
}

Conv1d::Conv1d(ParamSet& ps, const std::string& name, long cin, long cout, long kernel,
               long stride_, long pad_, Rng& rng)
    : stride(stride_), pad(pad_) {
  const long fan_in = cin * kernel;
  const long fan_out = cout * kernel;
  w = ps.add(name + ".w", glorot_uniform(rng, {cout, cin, 1, kernel}, fan_in, fan_out));
  b = ps.add(name + ".b", Tensor::zeros({cout}));
}

GRUCell::GRUCell(ParamSet& ps, const std::string& name, long in, long hidden_, Rng& rng)
    : hidden(hidden_) {
  wx = ps.add(name + ".wx", glorot_uniform(rng, {in, 3 * hidden}, in, hidden));
  wh = ps.add(name + ".wh", glorot_uniform(rng, {hidden, 3 * hidden}, hidden, hidden));
  b = ps.add(name + ".b", Tensor::zeros({3 * hidden}));
}

ad::Var GRUCell::step(const ad::Var& x, const ad::Var& h) const {
  using namespace ad;
  Var gx = linear(x, wx, b);      // [1, 3h]
  Var gh = matmul(h, wh);         // [1, 3h]
  Var z = sigmoid(add(slice(gx, 1, 0, hidden), slice(gh, 1, 0, hidden)));
  Var r = sigmoid(add(slice(gx, 1, hidden, hidden), slice(gh, 1, hidden, hidden)));
  Var n = tanh_(add(slice(gx, 1, 2 * hidden, hidden), mul(r, slice(gh, 1, 2 * hidden, hidden))));
  Var one_minus_z = add_scalar(neg(z), 1.0);
  return add(mul(one_minus_z, n), mul(z, h));
}

GRU::GRU(ParamSet& ps, const std::string& name, long in, long hidden, long num_layers, Rng& rng) {
  long d = in;
  for (long l = 0; l < num_layers; ++l) {
    layers.emplace_back(ps, name + ".l" + std::to_string(l), d, hidden, rng);
    d = hidden;
  }
}

ad::Var GRU::run(const ad::Var& seq) const {
  using namespace ad;
  const long t_len = seq->value.dim(0);
  Var in = seq;
  for (const GRUCell& cell : layers) {
    Var h = leaf(Tensor::zeros({1, cell.hidden}));
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(t_len));
    for (long t = 0; t < t_len; ++t) {
      h = cell.step(slice(in, 0, t, 1), h);
      outs.push_back(h);
    }
    in = concat(outs, 0);
  }
  return in;
}

ad::Var GRU::final_state(const ad::Var& seq) const {
  ad::Var out = run(seq);
  return ad::slice(out, 0, out->value.dim(0) - 1, 1);
}

LSTMCell::LSTMCell(ParamSet& ps, const std::string& name, long in, long hidden_, Rng& rng)
    : hidden(hidden_) {
  wx = ps.add(name + ".wx", glorot_uniform(rng, {in, 4 * hidden}, in, hidden));
  wh = ps.add(name + ".wh", glorot_uniform(rng, {hidden, 4 * hidden}, hidden, hidden));
  Tensor bias = Tensor::zeros({4 * hidden});
  for (long i = hidden; i < 2 * hidden; ++i) bias[i] = 1.0;  // forget gate
  b = ps.add(name + ".b", std::move(bias));
}

std::pair<ad::Var, ad::Var> LSTMCell::step(const ad::Var& x, const ad::Var& h,
                                           const ad::Var& c) const {
  using namespace ad;
  Var gates = add(linear(x, wx, b), matmul(h, wh));  // [1, 4h]
  Var i = sigmoid(slice(gates, 1, 0, hidden));
  Var f = sigmoid(slice(gates, 1, hidden, hidden));
  Var g = tanh_(slice(gates, 1, 2 * hidden, hidden));
  Var o = sigmoid(slice(gates, 1, 3 * hidden, hidden));
  Var c_next = add(mul(f, c), mul(i, g));
  Var h_next = mul(o, tanh_(c_next));
  return {h_next, c_next};
}

BiLSTM::BiLSTM(ParamSet& ps, const std::string& name, long in, long hidden_, Rng& rng)
    : hidden(hidden_) {
  fwd = LSTMCell(ps, name + ".fwd", in, hidden, rng);
  bwd = LSTMCell(ps, name + ".bwd", in, hidden, rng);
}

namespace {

std::vector<ad::Var> run_direction(const nn::LSTMCell& cell, const ad::Var& seq, bool reverse) {
  using namespace ad;
  const long t_len = seq->value.dim(0);
  Var h = leaf(Tensor::zeros({1, cell.hidden}));
  Var c = leaf(Tensor::zeros({1, cell.hidden}));
  std::vector<Var> outs(static_cast<std::size_t>(t_len));
  for (long i = 0; i < t_len; ++i) {
    const long t = reverse ? t_len - 1 - i : i;
    auto [h2, c2] = cell.step(slice(seq, 0, t, 1), h, c);
    h = h2;
    c = c2;
    outs[static_cast<std::size_t>(t)] = h;
  }
  return outs;
}

}  // namespace

ad::Var BiLSTM::run(const ad::Var& seq) const {
  using namespace ad;
  auto f = run_direction(fwd, seq, false);
  auto b = run_direction(bwd, seq, true);
  const long t_len = seq->value.dim(0);
  std::vector<Var> steps;
  steps.reserve(static_cast<std::size_t>(t_len));
  for (long t = 0; t < t_len; ++t)
    steps.push_back(concat({f[static_cast<std::size_t>(t)], b[static_cast<std::size_t>(t)]}, 1));
  return concat(steps, 0);
}

ad::Var BiLSTM::final_states(const ad::Var& seq) const {
  using namespace ad;
  auto f = run_direction(fwd, seq, false);
  auto b = run_direction(bwd, seq, true);
  return concat({f.back(), b.front()}, 1);
}

void Adam::step(const std::vector<ad::Var>& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const ad::Var& p : params) {
    Slot& s = slots_[p.get()];
    const std::size_t n = p->value.vec().size();
    if (s.m.size() != n) {
      s.m.assign(n, 0.0);
      s.v.assign(n, 0.0);
    }
    p->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = p->grad[static_cast<long>(i)];
      s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g;
      s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g * g;
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      p->value[static_cast<long>(i)] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace vf::nn
