#include <algorithm>
#include <cmath>

#include "hamworld/errors.hpp"
#include "hamworld/numcore.hpp"

namespace hamworld {
namespace {

double activate(Activation act, double a) {
  switch (act) {
    case Activation::identity:
      return a;
    case Activation::tanh:
      return std::tanh(a);
    case Activation::elu:
      return a > 0.0 ? a : std::expm1(a);
  }
  return a;
}

// First derivative given pre-activation a and output y.
double activate_d1(Activation act, double a, double y) {
  switch (act) {
    case Activation::identity:
      return 1.0;
    case Activation::tanh:
      return 1.0 - y * y;
    case Activation::elu:
      return a > 0.0 ? 1.0 : y + 1.0;
  }
  return 1.0;
}

double activate_d2(Activation act, double a, double y) {
  switch (act) {
    case Activation::identity:
      return 0.0;
    case Activation::tanh:
      return -2.0 * y * (1.0 - y * y);
    case Activation::elu:
      return a > 0.0 ? 0.0 : y + 1.0;
  }
  return 0.0;
}

void check_width(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ConfigError(std::string(what) + ": expected length " + std::to_string(want) +
                      ", got " + std::to_string(got));
  }
}

// Row dot product with four independent partial sums (fixed order, so
// results are reproducible).
double row_dot(const double* w, const double* x, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t c = 0;
  for (; c + 4 <= n; c += 4) {
    s0 += w[c] * x[c];
    s1 += w[c + 1] * x[c + 1];
    s2 += w[c + 2] * x[c + 2];
    s3 += w[c + 3] * x[c + 3];
  }
  for (; c < n; ++c) s0 += w[c] * x[c];
  return (s0 + s1) + (s2 + s3);
}

// y = W x + b for one layer.
void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
            Vec& y) {
  const std::size_t rows = b.size();
  const std::size_t cols = x.size();
  y.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) y[r] = b[r] + row_dot(w.data() + r * cols, x.data(), cols);
}

void linear_no_bias(std::span<const double> w, std::span<const double> x, std::size_t rows,
                    Vec& y) {
  const std::size_t cols = x.size();
  y.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) y[r] = row_dot(w.data() + r * cols, x.data(), cols);
}

// out = Wᵀ g
void transpose_apply(std::span<const double> w, std::span<const double> g, std::size_t cols,
                     Vec& out) {
  const std::size_t rows = g.size();
  out.assign(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    const double* wr = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += wr[c] * gr;
  }
}

void outer_accumulate(std::span<const double> g, std::span<const double> x, double* dw) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < g.size(); ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    double* row = dw + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += gr * x[c];
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity:
      return "identity";
    case Activation::tanh:
      return "tanh";
    case Activation::elu:
      return "elu";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "tanh") return Activation::tanh;
  if (name == "elu") return Activation::elu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

MlpSpec MlpSpec::make(std::vector<std::size_t> widths, Activation hidden_act,
                      Activation output_act) {
  MlpSpec s;
  s.widths = std::move(widths);
  const std::size_t hidden_layers = s.widths.size() >= 2 ? s.widths.size() - 2 : 0;
  s.hidden.assign(hidden_layers, hidden_act);
  s.output = output_act;
  s.validate();
  return s;
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ConfigError("MlpSpec needs at least 2 layers");
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("MlpSpec widths must be >= 1");
  }
  if (hidden.size() != widths.size() - 2) {
    throw ConfigError("MlpSpec activation count " + std::to_string(hidden.size()) +
                      " does not match hidden layer count " +
                      std::to_string(widths.size() - 2));
  }
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l + 1] * (widths[l] + 1);
  return n;
}

Activation MlpSpec::activation(std::size_t layer) const {
  return layer + 1 == layer_count() ? output : hidden[layer];
}

ParamVector::ParamVector(const MlpSpec& spec) {
  spec.validate();
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t in = spec.widths[l];
    const std::size_t out = spec.widths[l + 1];
    index_.push_back({l, false, off, out, in});
    off += out * in;
    index_.push_back({l, true, off, out, 1});
    off += out;
  }
  values_.assign(off, 0.0);
}

std::span<double> ParamVector::weights(std::size_t layer) {
  const auto& s = index_.at(2 * layer);
  return {values_.data() + s.offset, s.size()};
}
std::span<const double> ParamVector::weights(std::size_t layer) const {
  const auto& s = index_.at(2 * layer);
  return {values_.data() + s.offset, s.size()};
}
std::span<double> ParamVector::bias(std::size_t layer) {
  const auto& s = index_.at(2 * layer + 1);
  return {values_.data() + s.offset, s.size()};
}
std::span<const double> ParamVector::bias(std::size_t layer) const {
  const auto& s = index_.at(2 * layer + 1);
  return {values_.data() + s.offset, s.size()};
}

std::vector<std::uint8_t> ParamVector::decay_mask() const {
  std::vector<std::uint8_t> mask(values_.size(), 0);
  for (const auto& s : index_) {
    if (s.bias) continue;
    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(s.offset),
              mask.begin() + static_cast<std::ptrdiff_t>(s.offset + s.size()), 1);
  }
  return mask;
}

void ParamVector::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool ParamVector::all_finite() const { return hamworld::all_finite(values_); }

ParamVector init_params(const MlpSpec& spec, Rng& rng, double final_scale) {
  ParamVector p(spec);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const double in = static_cast<double>(spec.widths[l]);
    const double out = static_cast<double>(spec.widths[l + 1]);
    const double bound = std::sqrt(6.0 / (in + out));
    const double scale = (l + 1 == spec.layer_count()) ? final_scale : 1.0;
    for (double& w : p.weights(l)) w = scale * rng.uniform(-bound, bound);
  }
  return p;
}

Vec mlp_forward(const MlpSpec& spec, const ParamVector& params, std::span<const double> input,
                MlpTape& tape) {
  check_width(input.size(), spec.input_width(), "mlp_forward input");
  check_width(params.size(), spec.param_count(), "mlp_forward params");
  const std::size_t L = spec.layer_count();
  tape.pre.resize(L);
  tape.act.resize(L + 1);
  tape.act[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < L; ++l) {
    affine(params.weights(l), params.bias(l), tape.act[l], tape.pre[l]);
    const Activation act = spec.activation(l);
    Vec& y = tape.act[l + 1];
    y.resize(tape.pre[l].size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = activate(act, tape.pre[l][i]);
  }
  return tape.act[L];
}

Vec mlp_forward(const MlpSpec& spec, const ParamVector& params, std::span<const double> input) {
  MlpTape tape;
  return mlp_forward(spec, params, input, tape);
}

void backprop_accumulate(const MlpSpec& spec, const ParamVector& params, const MlpTape& tape,
                         std::span<const double> upstream, std::span<double> param_grad,
                         Vec* input_grad) {
  check_width(upstream.size(), spec.output_width(), "backprop upstream");
  check_width(param_grad.size(), spec.param_count(), "backprop param_grad");
  const std::size_t L = spec.layer_count();
  Vec adj(upstream.begin(), upstream.end());
  Vec delta;
  Vec next;
  for (std::size_t li = L; li-- > 0;) {
    const Activation act = spec.activation(li);
    const Vec& a = tape.pre[li];
    const Vec& y = tape.act[li + 1];
    delta.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) delta[i] = adj[i] * activate_d1(act, a[i], y[i]);

    const auto& ws = params.index()[2 * li];
    const auto& bs = params.index()[2 * li + 1];
    outer_accumulate(delta, tape.act[li], param_grad.data() + ws.offset);
    for (std::size_t i = 0; i < delta.size(); ++i) param_grad[bs.offset + i] += delta[i];

    if (li > 0 || input_grad != nullptr) {
      transpose_apply(params.weights(li), delta, spec.widths[li], next);
      adj.swap(next);
    }
  }
  if (input_grad != nullptr) *input_grad = adj;
}

Vec input_gradient(const MlpSpec& spec, const ParamVector& params, const MlpTape& tape,
                   std::span<const double> upstream) {
  check_width(upstream.size(), spec.output_width(), "input_gradient upstream");
  Vec adj(upstream.begin(), upstream.end());
  Vec next;
  for (std::size_t li = spec.layer_count(); li-- > 0;) {
    const Activation act = spec.activation(li);
    const Vec& a = tape.pre[li];
    const Vec& y = tape.act[li + 1];
    for (std::size_t i = 0; i < a.size(); ++i) adj[i] *= activate_d1(act, a[i], y[i]);
    transpose_apply(params.weights(li), adj, spec.widths[li], next);
    adj.swap(next);
  }
  return adj;
}

BackpropResult backprop(const MlpSpec& spec, const ParamVector& params,
                        std::span<const double> input, std::span<const double> upstream) {
  MlpTape tape;
  mlp_forward(spec, params, input, tape);
  BackpropResult r{Vec{}, ParamVector(spec)};
  backprop_accumulate(spec, params, tape, upstream, r.param_grad.values(), &r.input_grad);
  return r;
}

Vec mlp_jvp(const MlpSpec& spec, const ParamVector& params, std::span<const double> input,
            std::span<const double> direction, TangentTape& tape) {
  check_width(direction.size(), spec.input_width(), "mlp_jvp direction");
  mlp_forward(spec, params, input, tape.primal);
  const std::size_t L = spec.layer_count();
  tape.tangent_pre.resize(L);
  tape.tangent_act.resize(L + 1);
  tape.tangent_act[0].assign(direction.begin(), direction.end());
  for (std::size_t l = 0; l < L; ++l) {
    linear_no_bias(params.weights(l), tape.tangent_act[l], spec.widths[l + 1],
                   tape.tangent_pre[l]);
    const Activation act = spec.activation(l);
    const Vec& a = tape.primal.pre[l];
    const Vec& y = tape.primal.act[l + 1];
    Vec& ty = tape.tangent_act[l + 1];
    ty.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      ty[i] = activate_d1(act, a[i], y[i]) * tape.tangent_pre[l][i];
    }
  }
  return tape.tangent_act[L];
}

void tangent_backprop_accumulate(const MlpSpec& spec, const ParamVector& params,
                                 const TangentTape& tape,
                                 std::span<const double> primal_upstream,
                                 std::span<const double> tangent_upstream,
                                 std::span<double> param_grad, Vec* input_grad,
                                 Vec* direction_grad) {
  const std::size_t L = spec.layer_count();
  const std::size_t out = spec.output_width();
  check_width(param_grad.size(), spec.param_count(), "tangent_backprop param_grad");
  Vec adj(out, 0.0);
  Vec tadj(out, 0.0);
  if (!primal_upstream.empty()) {
    check_width(primal_upstream.size(), out, "tangent_backprop primal upstream");
    std::copy(primal_upstream.begin(), primal_upstream.end(), adj.begin());
  }
  if (!tangent_upstream.empty()) {
    check_width(tangent_upstream.size(), out, "tangent_backprop tangent upstream");
    std::copy(tangent_upstream.begin(), tangent_upstream.end(), tadj.begin());
  }
  Vec delta, tdelta, next, tnext;
  for (std::size_t li = L; li-- > 0;) {
    const Activation act = spec.activation(li);
    const Vec& a = tape.primal.pre[li];
    const Vec& y = tape.primal.act[li + 1];
    const Vec& ta = tape.tangent_pre[li];
    delta.resize(a.size());
    tdelta.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d1 = activate_d1(act, a[i], y[i]);
      const double d2 = activate_d2(act, a[i], y[i]);
      tdelta[i] = tadj[i] * d1;
      delta[i] = adj[i] * d1 + tadj[i] * d2 * ta[i];
    }
    const auto& ws = params.index()[2 * li];
    const auto& bs = params.index()[2 * li + 1];
    outer_accumulate(delta, tape.primal.act[li], param_grad.data() + ws.offset);
    outer_accumulate(tdelta, tape.tangent_act[li], param_grad.data() + ws.offset);
    for (std::size_t i = 0; i < delta.size(); ++i) param_grad[bs.offset + i] += delta[i];

    const bool need = li > 0 || input_grad != nullptr || direction_grad != nullptr;
    if (need) {
      transpose_apply(params.weights(li), delta, spec.widths[li], next);
      transpose_apply(params.weights(li), tdelta, spec.widths[li], tnext);
      adj.swap(next);
      tadj.swap(tnext);
    }
  }
  if (input_grad != nullptr) *input_grad = adj;
  if (direction_grad != nullptr) *direction_grad = tadj;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace hamworld
