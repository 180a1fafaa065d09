#pragma once

// Dense numerics substrate: splittable RNG, MLPs with a reverse-mode tape
// (plus a forward-over-reverse pass for gradients of directional
// derivatives), Adam/AdamW and a central-difference gradient oracle.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hamworld {

using Vec = std::vector<double>;

// Counter-based generator: every draw is a pure function of (key, counter),
// so streams are reproducible across platforms and can be split by label.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  Rng split(std::string_view label) const;
  Rng split(std::uint64_t index) const;

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal();
  std::size_t index(std::size_t n);  // uniform in [0, n)

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

enum class Activation { identity, tanh, elu };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct MlpSpec {
  std::vector<std::size_t> widths;     // input, hidden..., output
  std::vector<Activation> hidden;      // one per hidden layer
  Activation output = Activation::identity;

  // Same activation on every hidden layer.
  static MlpSpec make(std::vector<std::size_t> widths, Activation hidden_act,
                      Activation output_act = Activation::identity);

  void validate() const;
  std::size_t layer_count() const { return widths.size() - 1; }
  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  std::size_t param_count() const;
  Activation activation(std::size_t layer) const;

  bool operator==(const MlpSpec&) const = default;
};

struct ParamSlice {
  std::size_t layer = 0;
  bool bias = false;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

// Flat weights. Layer l stores W_l (out x in, row-major) followed by b_l.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(const MlpSpec& spec);

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& raw() { return values_; }
  const std::vector<double>& raw() const { return values_; }
  const std::vector<ParamSlice>& index() const { return index_; }

  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;

  // 1 for weight matrices, 0 for biases; used for decoupled weight decay.
  std::vector<std::uint8_t> decay_mask() const;

  void fill(double v);
  bool all_finite() const;

  bool operator==(const ParamVector& o) const { return values_ == o.values_; }

 private:
  std::vector<double> values_;
  std::vector<ParamSlice> index_;
};

// Glorot-uniform weights, zero biases. The final layer is multiplied by
// final_scale (used for the small-scale input-matrix init).
ParamVector init_params(const MlpSpec& spec, Rng& rng, double final_scale = 1.0);

// Reverse-mode tape: pre-activations and activations of every layer.
struct MlpTape {
  std::vector<Vec> pre;  // pre[l] for l in [0, L)
  std::vector<Vec> act;  // act[0] = input, act[l + 1] = output of layer l
};

// Primal tape plus tangents along one input direction.
struct TangentTape {
  MlpTape primal;
  std::vector<Vec> tangent_pre;
  std::vector<Vec> tangent_act;  // tangent_act[0] = direction
};

Vec mlp_forward(const MlpSpec& spec, const ParamVector& params, std::span<const double> input);
Vec mlp_forward(const MlpSpec& spec, const ParamVector& params, std::span<const double> input,
                MlpTape& tape);

struct BackpropResult {
  Vec input_grad;
  ParamVector param_grad;
};

BackpropResult backprop(const MlpSpec& spec, const ParamVector& params,
                        std::span<const double> input, std::span<const double> upstream);

// Accumulating variant over a recorded tape. param_grad must have
// spec.param_count() entries; input_grad may be null.
void backprop_accumulate(const MlpSpec& spec, const ParamVector& params, const MlpTape& tape,
                         std::span<const double> upstream, std::span<double> param_grad,
                         Vec* input_grad = nullptr);

// Gradient with respect to the input only (no parameter gradients).
Vec input_gradient(const MlpSpec& spec, const ParamVector& params, const MlpTape& tape,
                   std::span<const double> upstream);

// Forward pass with tangent propagation; returns the output tangent J(x)·direction.
Vec mlp_jvp(const MlpSpec& spec, const ParamVector& params, std::span<const double> input,
            std::span<const double> direction, TangentTape& tape);

// Reverse pass through a tangent tape for the objective
//   primal_upstreamᵀ·y + tangent_upstreamᵀ·ẏ.
// Either upstream may be empty (treated as zero). Accumulates parameter
// gradients and optionally gradients w.r.t. the input and the direction.
void tangent_backprop_accumulate(const MlpSpec& spec, const ParamVector& params,
                                 const TangentTape& tape,
                                 std::span<const double> primal_upstream,
                                 std::span<const double> tangent_upstream,
                                 std::span<double> param_grad, Vec* input_grad = nullptr,
                                 Vec* direction_grad = nullptr);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW), masked entries only
  bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
  Vec m;
  Vec v;
  std::uint64_t t = 0;
  AdamConfig config;

  AdamState() = default;
  AdamState(std::size_t n, AdamConfig cfg) : m(n, 0.0), v(n, 0.0), config(cfg) {}
  bool operator==(const AdamState&) const = default;
};

// One bias-corrected Adam step in place. Throws NumericError (leaving
// params and state untouched) when any gradient is non-finite.
void adam_update(AdamState& state, std::span<double> params, std::span<const double> grads,
                 std::span<const std::uint8_t> decay_mask = {});

using ScalarFn = std::function<double(std::span<const double>)>;

// max_i |analytic_i - fd_i| / max(1, |fd_i|) with central differences.
double finite_diff_check(const ScalarFn& f, std::span<const double> x,
                         std::span<const double> analytic, double eps);

// Central-difference gradient (no comparison).
Vec central_difference(const ScalarFn& f, std::span<const double> x, double eps);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
bool all_finite(std::span<const double> a);

}  // namespace hamworld
