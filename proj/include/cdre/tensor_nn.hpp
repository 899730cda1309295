#pragma once
//------------------------------------------------------------------------------
//
//   Copyright 2026 The CDRE Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "cdre/random.hpp"

namespace cdre {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// N x D observations, one sample per row.
using SampleBatch = Matrix;

enum class Activation
{
  relu,
  identity
};

struct DenseLayer
{
  Matrix     weight;  // out x in
  Vector     bias;    // out
  Activation activation{Activation::identity};

  std::size_t in_dim() const
  {
    return static_cast<std::size_t>(weight.cols());
  }
  std::size_t out_dim() const
  {
    return static_cast<std::size_t>(weight.rows());
  }
};

/// How the final (head) layer is initialised.
enum class HeadInit
{
  scaled_uniform,  // same scheme as hidden layers
  zero             // psi == 0 at start
};

struct NetArch
{
  std::size_t              input_dim{1};
  std::vector<std::size_t> hidden{256, 256};
  std::size_t              output_dim{1};
  HeadInit                 head_init{HeadInit::zero};
};

/// Fully connected network: relu hidden layers, identity output layer.
class DenseNet
{
public:
  DenseNet() = default;

  /// Validates that the layers compose and the last one is identity.
  explicit DenseNet(std::vector<DenseLayer> layers);

  /// Hidden and head weights uniform in +-sqrt(6 / (fan_in + fan_out)), zero
  /// biases; the head is zeroed when `arch.head_init == HeadInit::zero`.
  static DenseNet make(NetArch const &arch, Rng &rng);

  /// All-zero parameters, psi == 0 everywhere.
  static DenseNet zeros(NetArch const &arch);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;

  std::vector<DenseLayer> const &layers() const
  {
    return layers_;
  }
  std::vector<DenseLayer> &layers()
  {
    return layers_;
  }

  bool all_finite() const;

  /// Append one output unit to the head layer. Existing parameters are untouched.
  void add_head(Rng &rng, HeadInit init);

  bool operator==(DenseNet const &other) const;

private:
  std::vector<DenseLayer> layers_;
};

/// Pre-activations and activations kept for backpropagation.
struct ForwardPass
{
  std::vector<Matrix> inputs;  // inputs[l] feeds layer l
  std::vector<Matrix> pre;     // pre[l] = inputs[l] * W^T + b
  Matrix              output;
};

struct LayerGrad
{
  Matrix weight;
  Vector bias;
};

using Gradients = std::vector<LayerGrad>;

/// Row n, column h is psi(x_n) for head h.
Matrix forward(DenseNet const &net, SampleBatch const &batch);

ForwardPass forward_pass(DenseNet const &net, SampleBatch const &batch);

/// Gradients of sum(output .* output_grad) with respect to every parameter.
/// The relu derivative at exactly zero is taken as zero.
Gradients backward(DenseNet const &net, ForwardPass const &pass, Matrix const &output_grad);
Gradients backward(DenseNet const &net, SampleBatch const &batch, Matrix const &output_grad);

Gradients zero_gradients(DenseNet const &net);
void      accumulate(Gradients &into, Gradients const &add, double scale = 1.0);

struct AdamConfig
{
  double learning_rate{1e-5};
  double beta1{0.9};
  double beta2{0.999};
  double epsilon{1e-8};
};

struct AdamState
{
  AdamConfig          config;
  std::vector<Matrix> m_weight, v_weight;
  std::vector<Vector> m_bias, v_bias;
  std::size_t         step{0};

  AdamState() = default;
  AdamState(DenseNet const &net, AdamConfig config);

  /// Zero moments for one extra head unit after `DenseNet::add_head`.
  void match_shapes(DenseNet const &net);
};

/// One bias-corrected Adam update of `net` in place.
/// Throws TrainingError with the layer index on a non-finite gradient.
void adam_step(AdamState &state, DenseNet &net, Gradients const &grads);

}  // namespace cdre
