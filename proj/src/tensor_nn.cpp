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

#include "cdre/tensor_nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "cdre/errors.hpp"

namespace cdre {
namespace {

void fill_scaled_uniform(Matrix &w, Rng &rng)
{
  double const limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  // column-major fill order is part of the determinism contract
  for (Eigen::Index c = 0; c < w.cols(); ++c)
  {
    for (Eigen::Index r = 0; r < w.rows(); ++r)
    {
      w(r, c) = rng.uniform(-limit, limit);
    }
  }
}

DenseLayer make_layer(std::size_t in, std::size_t out, Activation act)
{
  DenseLayer layer;
  layer.weight     = Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  layer.bias       = Vector::Zero(static_cast<Eigen::Index>(out));
  layer.activation = act;
  return layer;
}

std::vector<DenseLayer> zero_layers(NetArch const &arch)
{
  if (arch.input_dim == 0 || arch.output_dim == 0)
  {
    throw ShapeError("network input and output dimensions must be positive");
  }
  std::vector<DenseLayer> layers;
  std::size_t             in = arch.input_dim;
  for (auto width : arch.hidden)
  {
    if (width == 0)
    {
      throw ShapeError("hidden layer width must be positive");
    }
    layers.push_back(make_layer(in, width, Activation::relu));
    in = width;
  }
  layers.push_back(make_layer(in, arch.output_dim, Activation::identity));
  return layers;
}

void check_batch(DenseNet const &net, SampleBatch const &batch)
{
  if (static_cast<std::size_t>(batch.cols()) != net.input_dim())
  {
    throw ShapeError("batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                     std::to_string(net.input_dim()));
  }
}

}  // namespace

DenseNet::DenseNet(std::vector<DenseLayer> layers)
  : layers_(std::move(layers))
{
  if (layers_.empty())
  {
    throw ShapeError("network needs at least one layer");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i)
  {
    auto const &layer = layers_[i];
    if (layer.weight.rows() == 0 || layer.weight.cols() == 0)
    {
      throw ShapeError("layer " + std::to_string(i) + " is empty");
    }
    if (layer.bias.size() != layer.weight.rows())
    {
      throw ShapeError("layer " + std::to_string(i) + " bias does not match weight rows");
    }
    if (i > 0 && layers_[i - 1].out_dim() != layer.in_dim())
    {
      throw ShapeError("layer " + std::to_string(i) + " input does not match previous output");
    }
  }
  if (layers_.back().activation != Activation::identity)
  {
    throw ShapeError("output layer must be identity");
  }
}

DenseNet DenseNet::make(NetArch const &arch, Rng &rng)
{
  auto layers = zero_layers(arch);
  for (std::size_t i = 0; i < layers.size(); ++i)
  {
    bool const head = i + 1 == layers.size();
    if (!head || arch.head_init == HeadInit::scaled_uniform)
    {
      fill_scaled_uniform(layers[i].weight, rng);
    }
  }
  return DenseNet(std::move(layers));
}

DenseNet DenseNet::zeros(NetArch const &arch)
{
  return DenseNet(zero_layers(arch));
}

std::size_t DenseNet::input_dim() const
{
  return layers_.empty() ? 0 : layers_.front().in_dim();
}

std::size_t DenseNet::output_dim() const
{
  return layers_.empty() ? 0 : layers_.back().out_dim();
}

std::size_t DenseNet::parameter_count() const
{
  std::size_t n = 0;
  for (auto const &layer : layers_)
  {
    n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  }
  return n;
}

bool DenseNet::all_finite() const
{
  for (auto const &layer : layers_)
  {
    if (!layer.weight.allFinite() || !layer.bias.allFinite())
    {
      return false;
    }
  }
  return true;
}

void DenseNet::add_head(Rng &rng, HeadInit init)
{
  auto       &head = layers_.back();
  auto const  rows = head.weight.rows();
  auto const  cols = head.weight.cols();
  Matrix      weight(rows + 1, cols);
  weight.topRows(rows) = head.weight;
  weight.row(rows).setZero();
  if (init == HeadInit::scaled_uniform)
  {
    double const limit = std::sqrt(6.0 / static_cast<double>(rows + 1 + cols));
    for (Eigen::Index c = 0; c < cols; ++c)
    {
      weight(rows, c) = rng.uniform(-limit, limit);
    }
  }
  Vector bias(rows + 1);
  bias.head(rows) = head.bias;
  bias(rows)      = 0.0;
  head.weight     = std::move(weight);
  head.bias       = std::move(bias);
}

bool DenseNet::operator==(DenseNet const &other) const
{
  if (layers_.size() != other.layers_.size())
  {
    return false;
  }
  for (std::size_t i = 0; i < layers_.size(); ++i)
  {
    auto const &a = layers_[i];
    auto const &b = other.layers_[i];
    if (a.activation != b.activation || a.weight.rows() != b.weight.rows() ||
        a.weight.cols() != b.weight.cols() || a.weight != b.weight || a.bias != b.bias)
    {
      return false;
    }
  }
  return true;
}

ForwardPass forward_pass(DenseNet const &net, SampleBatch const &batch)
{
  check_batch(net, batch);
  ForwardPass pass;
  pass.inputs.reserve(net.layers().size());
  pass.pre.reserve(net.layers().size());
  Matrix current = batch;
  for (auto const &layer : net.layers())
  {
    Matrix z = current * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    pass.inputs.push_back(std::move(current));
    if (layer.activation == Activation::relu)
    {
      current = z.cwiseMax(0.0);
    }
    else
    {
      current = z;
    }
    pass.pre.push_back(std::move(z));
  }
  pass.output = std::move(current);
  return pass;
}

Matrix forward(DenseNet const &net, SampleBatch const &batch)
{
  check_batch(net, batch);
  Matrix current = batch;
  for (auto const &layer : net.layers())
  {
    Matrix z = current * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (layer.activation == Activation::relu)
    {
      z = z.cwiseMax(0.0);
    }
    current = std::move(z);
  }
  return current;
}

Gradients backward(DenseNet const &net, ForwardPass const &pass, Matrix const &output_grad)
{
  auto const &layers = net.layers();
  if (pass.pre.size() != layers.size() || output_grad.rows() != pass.output.rows() ||
      output_grad.cols() != pass.output.cols())
  {
    throw ShapeError("output gradient does not match forward pass");
  }
  Gradients grads(layers.size());
  Matrix    delta = output_grad;
  for (std::size_t l = layers.size(); l-- > 0;)
  {
    auto const &layer = layers[l];
    if (layer.activation == Activation::relu)
    {
      delta = (pass.pre[l].array() > 0.0).select(delta, 0.0);
    }
    grads[l].weight = delta.transpose() * pass.inputs[l];
    grads[l].bias   = delta.colwise().sum().transpose();
    if (l > 0)
    {
      delta = delta * layer.weight;
    }
  }
  return grads;
}

Gradients backward(DenseNet const &net, SampleBatch const &batch, Matrix const &output_grad)
{
  return backward(net, forward_pass(net, batch), output_grad);
}

Gradients zero_gradients(DenseNet const &net)
{
  Gradients grads;
  grads.reserve(net.layers().size());
  for (auto const &layer : net.layers())
  {
    grads.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                     Vector::Zero(layer.bias.size())});
  }
  return grads;
}

void accumulate(Gradients &into, Gradients const &add, double scale)
{
  if (into.size() != add.size())
  {
    throw ShapeError("gradient layer count mismatch");
  }
  for (std::size_t l = 0; l < into.size(); ++l)
  {
    into[l].weight += scale * add[l].weight;
    into[l].bias += scale * add[l].bias;
  }
}

AdamState::AdamState(DenseNet const &net, AdamConfig cfg)
  : config(cfg)
{
  match_shapes(net);
}

void AdamState::match_shapes(DenseNet const &net)
{
  auto const &layers = net.layers();
  m_weight.resize(layers.size());
  v_weight.resize(layers.size());
  m_bias.resize(layers.size());
  v_bias.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l)
  {
    auto grow = [](auto &acc, auto const &like) {
      using T = std::decay_t<decltype(acc)>;
      T next  = T::Zero(like.rows(), like.cols());
      auto const rows = std::min(acc.rows(), like.rows());
      auto const cols = std::min(acc.cols(), like.cols());
      next.topLeftCorner(rows, cols) = acc.topLeftCorner(rows, cols);
      acc = std::move(next);
    };
    grow(m_weight[l], layers[l].weight);
    grow(v_weight[l], layers[l].weight);
    grow(m_bias[l], layers[l].bias);
    grow(v_bias[l], layers[l].bias);
  }
}

void adam_step(AdamState &state, DenseNet &net, Gradients const &grads)
{
  auto &layers = net.layers();
  if (grads.size() != layers.size() || state.m_weight.size() != layers.size())
  {
    throw ShapeError("gradient layer count does not match network");
  }
  for (std::size_t l = 0; l < layers.size(); ++l)
  {
    if (grads[l].weight.rows() != layers[l].weight.rows() ||
        grads[l].weight.cols() != layers[l].weight.cols() ||
        grads[l].bias.size() != layers[l].bias.size() ||
        state.m_weight[l].rows() != layers[l].weight.rows() ||
        state.m_weight[l].cols() != layers[l].weight.cols())
    {
      throw ShapeError("gradient shape does not match layer " + std::to_string(l));
    }
    if (!grads[l].weight.allFinite() || !grads[l].bias.allFinite())
    {
      throw TrainingError("non-finite gradient", l);
    }
  }

  auto const &cfg = state.config;
  state.step += 1;
  double const t   = static_cast<double>(state.step);
  double const bc1 = 1.0 - std::pow(cfg.beta1, t);
  double const bc2 = 1.0 - std::pow(cfg.beta2, t);

  auto update = [&](auto &param, auto const &grad, auto &m, auto &v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    param.array() -= cfg.learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + cfg.epsilon);
  };
  for (std::size_t l = 0; l < layers.size(); ++l)
  {
    update(layers[l].weight, grads[l].weight, state.m_weight[l], state.v_weight[l]);
    update(layers[l].bias, grads[l].bias, state.m_bias[l], state.v_bias[l]);
  }
}

}  // namespace cdre
