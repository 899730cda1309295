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

#include "cdre/ratio_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cdre/errors.hpp"

namespace cdre {
namespace {

Vector softmax(Vector const &values)
{
  double const m = values.maxCoeff();
  Vector       e = (values.array() - m).exp();
  return e / e.sum();
}

Vector head_column(DenseNet const &net, SampleBatch const &batch, std::size_t head)
{
  if (head >= net.output_dim())
  {
    throw ArgumentError("head " + std::to_string(head) + " out of range");
  }
  return forward(net, batch).col(static_cast<Eigen::Index>(head));
}

void require_nonempty(SampleBatch const &batch, char const *what)
{
  if (batch.rows() == 0)
  {
    throw ArgumentError(std::string(what) + " batch is empty");
  }
}

SampleBatch as_row(Vector const &x)
{
  return x.transpose();
}

}  // namespace

void TrainConfig::validate() const
{
  if (!(lambda_c >= 0.0) || !std::isfinite(lambda_c))
  {
    throw ConfigError("train.lambda_c", "must be a finite nonnegative number");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
  {
    throw ConfigError("train.learning_rate", "must be positive");
  }
  if (batch_size == 0)
  {
    throw ConfigError("train.batch_size", "must be positive");
  }
  if (epochs == 0)
  {
    throw ConfigError("train.epochs", "must be positive");
  }
  if (eval_sample_size == 0)
  {
    throw ConfigError("train.eval_samples", "must be positive");
  }
}

RatioModel::RatioModel(DenseNet net, std::vector<int> origins, int current_time)
  : net_(std::move(net))
  , origins_(std::move(origins))
  , current_time_(current_time)
{
  check_invariants();
}

void RatioModel::check_invariants() const
{
  if (origins_.size() != net_.output_dim())
  {
    throw ShapeError("origin count " + std::to_string(origins_.size()) +
                     " does not match head count " + std::to_string(net_.output_dim()));
  }
  auto sorted = origins_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
  {
    throw ArgumentError("duplicate origin");
  }
  if (snapshot_)
  {
    if (snapshot_->input_dim() != net_.input_dim() ||
        snapshot_->layers().size() != net_.layers().size() ||
        snapshot_->output_dim() > net_.output_dim())
    {
      throw ShapeError("snapshot architecture does not match the current net");
    }
  }
}

bool RatioModel::has_origin(int origin) const
{
  return std::find(origins_.begin(), origins_.end(), origin) != origins_.end();
}

std::size_t RatioModel::head_of(int origin) const
{
  auto it = std::find(origins_.begin(), origins_.end(), origin);
  if (it == origins_.end())
  {
    throw ArgumentError("origin " + std::to_string(origin) + " is not registered");
  }
  return static_cast<std::size_t>(it - origins_.begin());
}

Vector RatioModel::snapshot_head(SampleBatch const &batch, std::size_t head) const
{
  if (!snapshot_ || head >= snapshot_->output_dim())
  {
    return Vector::Zero(batch.rows());
  }
  return forward(*snapshot_, batch).col(static_cast<Eigen::Index>(head));
}

void RatioModel::set_snapshot(std::optional<DenseNet> snapshot)
{
  snapshot_ = std::move(snapshot);
  check_invariants();
}

void RatioModel::register_origin(int origin)
{
  if (has_origin(origin))
  {
    throw ArgumentError("origin " + std::to_string(origin) + " is already registered");
  }
  origins_.push_back(origin);
  check_invariants();
}

bool RatioModel::operator==(RatioModel const &other) const
{
  return net_ == other.net_ && snapshot_ == other.snapshot_ && origins_ == other.origins_ &&
         current_time_ == other.current_time_;
}

double log_mean_exp(Vector const &values)
{
  if (values.size() == 0)
  {
    throw ArgumentError("log_mean_exp of an empty vector");
  }
  double const m = values.maxCoeff();
  if (!std::isfinite(m))
  {
    return m;
  }
  return m + std::log((values.array() - m).exp().sum()) - std::log(static_cast<double>(values.size()));
}

double log_normalizer(DenseNet const &net, SampleBatch const &q_samples, std::size_t head)
{
  require_nonempty(q_samples, "normalization");
  return log_mean_exp(head_column(net, q_samples, head));
}

double normalizer(DenseNet const &net, SampleBatch const &q_samples, std::size_t head)
{
  return std::exp(log_normalizer(net, q_samples, head));
}

RatioEstimate estimate_ratio(RatioModel const &model, Vector const &x, SampleBatch const &q_samples,
                             int origin)
{
  auto const   head = model.head_of(origin);
  double const lu   = head_column(model.net(), as_row(x), head)(0);
  double const ln   = log_normalizer(model.net(), q_samples, head);
  return {lu, ln, std::exp(lu - ln)};
}

Vector log_ratio(RatioModel const &model, SampleBatch const &x, SampleBatch const &q_samples,
                 int origin)
{
  auto const head = model.head_of(origin);
  return head_column(model.net(), x, head).array() - log_normalizer(model.net(), q_samples, head);
}

Vector log_step_ratio(RatioModel const &model, SampleBatch const &x, SampleBatch const &q_cur,
                      int origin)
{
  require_nonempty(q_cur, "normalization");
  auto const   head   = model.head_of(origin);
  Vector const phi_q  = head_column(model.net(), q_cur, head) - model.snapshot_head(q_cur, head);
  Vector const phi_x  = head_column(model.net(), x, head) - model.snapshot_head(x, head);
  return phi_x.array() - log_mean_exp(phi_q);
}

double step_ratio(RatioModel const &model, Vector const &x, SampleBatch const &q_cur, int origin)
{
  return std::exp(log_step_ratio(model, as_row(x), q_cur, origin)(0));
}

double constraint_residual(RatioModel const &model, SampleBatch const &q_prev,
                           SampleBatch const &q_cur, int origin)
{
  require_nonempty(q_prev, "previous");
  require_nonempty(q_cur, "current");
  auto const   head  = model.head_of(origin);
  Vector const psi_q = head_column(model.net(), q_cur, head);
  Vector const snp_q = model.snapshot_head(q_cur, head);
  Vector const snp_p = model.snapshot_head(q_prev, head);
  return std::expm1(log_mean_exp(psi_q) - log_mean_exp(psi_q - snp_q) - log_mean_exp(snp_p));
}

PairLoss kliep_loss(Vector const &psi_numerator, Vector const &psi_denominator)
{
  if (psi_numerator.size() == 0 || psi_denominator.size() == 0)
  {
    throw ArgumentError("KLIEP loss needs nonempty batches");
  }
  PairLoss out;
  double const mean_p = psi_numerator.mean();
  double const lme_q  = log_mean_exp(psi_denominator);
  out.objective       = mean_p - lme_q;
  out.loss            = -out.objective;
  out.grad_numerator  = Vector::Constant(psi_numerator.size(),
                                         -1.0 / static_cast<double>(psi_numerator.size()));
  out.grad_denominator = softmax(psi_denominator);
  return out;
}

PairLoss ckliep_loss(Vector const &psi_numerator, Vector const &psi_denominator,
                     Vector const &snap_numerator, Vector const &snap_denominator, double lambda)
{
  if (psi_numerator.size() == 0 || psi_denominator.size() == 0)
  {
    throw ArgumentError("CKLIEP loss needs nonempty batches");
  }
  if (snap_numerator.size() != psi_numerator.size() ||
      snap_denominator.size() != psi_denominator.size())
  {
    throw ShapeError("snapshot outputs do not match batch sizes");
  }
  Vector const phi_p = psi_numerator - snap_numerator;
  Vector const phi_q = psi_denominator - snap_denominator;

  double const log_psi_t    = log_mean_exp(psi_denominator);
  double const log_phi_t    = log_mean_exp(phi_q);
  double const log_psi_prev = log_mean_exp(snap_numerator);

  PairLoss out;
  out.objective = phi_p.mean() - log_phi_t;
  out.residual  = std::expm1(log_psi_t - log_phi_t - log_psi_prev);
  out.penalty   = lambda * out.residual * out.residual;
  out.loss      = -out.objective + out.penalty;

  Vector const a = softmax(phi_q);
  out.grad_numerator =
      Vector::Constant(psi_numerator.size(), -1.0 / static_cast<double>(psi_numerator.size()));
  double const c       = 2.0 * lambda * out.residual * (out.residual + 1.0);
  out.grad_denominator = a + c * (softmax(psi_denominator) - a);
  return out;
}

ObjectiveValue objective(DenseNet const &net, std::vector<PairBatch> const &pairs)
{
  if (pairs.empty())
  {
    throw ArgumentError("objective needs at least one pair");
  }
  ObjectiveValue out;
  out.grads          = zero_gradients(net);
  double const scale = 1.0 / static_cast<double>(pairs.size());
  for (auto const &pair : pairs)
  {
    auto const np = pair.numerator.rows();
    auto const nq = pair.denominator.rows();
    if (np == 0 || nq == 0)
    {
      throw ArgumentError("empty batch in objective");
    }
    if (pair.head >= net.output_dim())
    {
      throw ArgumentError("head " + std::to_string(pair.head) + " out of range");
    }
    SampleBatch stacked(np + nq, pair.numerator.cols());
    stacked.topRows(np)    = pair.numerator;
    stacked.bottomRows(nq) = pair.denominator;

    auto const   pass = forward_pass(net, stacked);
    auto const   h    = static_cast<Eigen::Index>(pair.head);
    Vector const psi_p = pass.output.col(h).head(np);
    Vector const psi_q = pass.output.col(h).tail(nq);

    bool const     plain = pair.snap_numerator.size() == 0 && pair.snap_denominator.size() == 0;
    PairLoss const pl    = plain ? kliep_loss(psi_p, psi_q)
                                 : ckliep_loss(psi_p, psi_q, pair.snap_numerator,
                                               pair.snap_denominator, pair.lambda);
    out.loss += scale * pl.loss;
    out.penalty += scale * pl.penalty;

    Matrix grad_out       = Matrix::Zero(pass.output.rows(), pass.output.cols());
    grad_out.col(h).head(np) = scale * pl.grad_numerator;
    grad_out.col(h).tail(nq) = scale * pl.grad_denominator;
    accumulate(out.grads, backward(net, pass, grad_out));
  }
  return out;
}

double effective_lambda(TrainConfig const &config, std::size_t n)
{
  if (config.penalty_schedule == PenaltySchedule::inverse_sqrt_n)
  {
    return config.lambda_c / std::sqrt(static_cast<double>(std::max<std::size_t>(n, 1)));
  }
  return config.lambda_c;
}

namespace {

struct Task
{
  std::size_t        head;
  SampleBatch const *numerator;
  SampleBatch const *denominator;
  Vector             snap_numerator;  // empty for plain KLIEP
  Vector             snap_denominator;
  double             lambda;
};

std::vector<Eigen::Index> slice(std::vector<Eigen::Index> const &perm, std::size_t part,
                                std::size_t parts)
{
  auto const n     = perm.size();
  auto const begin = part * n / parts;
  auto const end   = (part + 1) * n / parts;
  return {perm.begin() + static_cast<std::ptrdiff_t>(begin),
          perm.begin() + static_cast<std::ptrdiff_t>(end)};
}

Vector take(Vector const &v, std::vector<Eigen::Index> const &idx)
{
  return v.size() == 0 ? Vector() : Vector(v(idx));
}

void train(DenseNet &net, std::vector<Task> const &tasks, TrainConfig const &config, Rng rng)
{
  config.validate();
  std::size_t parts = 1;
  for (auto const &task : tasks)
  {
    auto const n = static_cast<std::size_t>(std::max(task.numerator->rows(), task.denominator->rows()));
    parts        = std::max(parts, (n + config.batch_size - 1) / config.batch_size);
    if (task.numerator->rows() == 0 || task.denominator->rows() == 0)
    {
      throw ArgumentError("training batch is empty");
    }
  }
  for (auto const &task : tasks)
  {
    auto const n = static_cast<std::size_t>(std::min(task.numerator->rows(), task.denominator->rows()));
    parts        = std::min(parts, n);
  }

  std::vector<std::vector<Eigen::Index>> perm_p(tasks.size()), perm_q(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i)
  {
    perm_p[i].resize(static_cast<std::size_t>(tasks[i].numerator->rows()));
    perm_q[i].resize(static_cast<std::size_t>(tasks[i].denominator->rows()));
    std::iota(perm_p[i].begin(), perm_p[i].end(), Eigen::Index{0});
    std::iota(perm_q[i].begin(), perm_q[i].end(), Eigen::Index{0});
  }

  AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.learning_rate;
  AdamState   adam(net, adam_cfg);
  std::size_t iteration = 0;

  std::vector<PairBatch> pairs(tasks.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch)
  {
    for (std::size_t i = 0; i < tasks.size(); ++i)
    {
      std::shuffle(perm_p[i].begin(), perm_p[i].end(), rng.engine());
      std::shuffle(perm_q[i].begin(), perm_q[i].end(), rng.engine());
    }
    for (std::size_t part = 0; part < parts; ++part)
    {
      for (std::size_t i = 0; i < tasks.size(); ++i)
      {
        auto const &task = tasks[i];
        auto const  ip   = slice(perm_p[i], part, parts);
        auto const  iq   = slice(perm_q[i], part, parts);
        pairs[i].head             = task.head;
        pairs[i].numerator        = (*task.numerator)(ip, Eigen::all);
        pairs[i].denominator      = (*task.denominator)(iq, Eigen::all);
        pairs[i].snap_numerator   = take(task.snap_numerator, ip);
        pairs[i].snap_denominator = take(task.snap_denominator, iq);
        pairs[i].lambda           = task.lambda;
      }
      auto const value = objective(net, pairs);
      if (!std::isfinite(value.loss))
      {
        throw TrainingError("non-finite loss", iteration);
      }
      adam_step(adam, net, value.grads);
      ++iteration;
    }
  }
  if (!net.all_finite())
  {
    throw TrainingError("non-finite parameters after training", iteration);
  }
}

constexpr std::uint64_t kShuffleTag = Rng::tag("shuffle");
constexpr std::uint64_t kInitTag    = Rng::tag("init");

}  // namespace

RatioModel kliep_fit(SampleBatch const &p_samples, SampleBatch const &q_samples,
                     NetArch const &arch, TrainConfig const &config, int origin)
{
  require_nonempty(p_samples, "numerator");
  require_nonempty(q_samples, "denominator");
  if (p_samples.cols() != q_samples.cols())
  {
    throw ShapeError("numerator and denominator dimensionality differ");
  }
  config.validate();
  NetArch a    = arch;
  a.input_dim  = static_cast<std::size_t>(p_samples.cols());
  a.output_dim = 1;
  Rng  rng(config.seed);
  Rng  init_rng = rng.split(kInitTag);
  auto net      = DenseNet::make(a, init_rng);

  std::vector<Task> tasks{{0, &p_samples, &q_samples, {}, {}, 0.0}};
  train(net, tasks, config, rng.split(kShuffleTag));
  return RatioModel(std::move(net), {origin}, 1);
}

RatioModel kliep_fit_multi(std::map<int, SampleBatch> const &p_samples,
                           std::map<int, SampleBatch> const &q_samples, NetArch const &arch,
                           TrainConfig const &config)
{
  if (p_samples.empty())
  {
    throw ArgumentError("kliep_fit_multi needs at least one origin");
  }
  config.validate();
  std::vector<int>  origins;
  std::vector<Task> tasks;
  for (auto const &[origin, p] : p_samples)
  {
    auto const q = q_samples.find(origin);
    if (q == q_samples.end())
    {
      throw ArgumentError("missing denominator batch for origin " + std::to_string(origin));
    }
    require_nonempty(p, "numerator");
    require_nonempty(q->second, "denominator");
    if (p.cols() != q->second.cols() || p.cols() != p_samples.begin()->second.cols())
    {
      throw ShapeError("batches differ in dimensionality");
    }
    tasks.push_back({origins.size(), &p, &q->second, {}, {}, 0.0});
    origins.push_back(origin);
  }
  NetArch a    = arch;
  a.input_dim  = static_cast<std::size_t>(p_samples.begin()->second.cols());
  a.output_dim = origins.size();
  Rng  rng(config.seed);
  Rng  init_rng = rng.split(kInitTag);
  auto net      = DenseNet::make(a, init_rng);
  train(net, tasks, config, rng.split(kShuffleTag));
  return RatioModel(std::move(net), std::move(origins), 1);
}

RatioModel add_origin(RatioModel model, int origin, Rng &rng, HeadInit init)
{
  if (model.has_origin(origin))
  {
    throw ArgumentError("origin " + std::to_string(origin) + " is already registered");
  }
  auto net = model.net();
  net.add_head(rng, init);
  auto origins = model.origins();
  origins.push_back(origin);
  RatioModel out(std::move(net), std::move(origins), model.current_time());
  out.set_snapshot(model.snapshot());
  return out;
}

RatioModel ckliep_step(RatioModel model, std::map<int, SampleBatch> const &q_prev,
                       std::map<int, SampleBatch> const &q_cur,
                       std::optional<NewOrigin> const &new_origin, TrainConfig const &config,
                       NetArch const &arch_for_first_fit)
{
  config.validate();
  if (model.origins().empty())
  {
    if (!new_origin)
    {
      throw ArgumentError("first update needs an origin");
    }
    auto it = q_cur.find(new_origin->origin);
    if (it == q_cur.end())
    {
      throw ArgumentError("missing current batch for origin " + std::to_string(new_origin->origin));
    }
    return kliep_fit(new_origin->samples, it->second, arch_for_first_fit, config, new_origin->origin);
  }

  Rng rng(config.seed);
  model.set_snapshot(model.net());
  if (new_origin)
  {
    Rng init_rng = rng.split(kInitTag);
    model        = add_origin(std::move(model), new_origin->origin, init_rng);
  }

  std::vector<Task> tasks;
  tasks.reserve(model.origins().size());
  for (std::size_t head = 0; head < model.origins().size(); ++head)
  {
    int const   origin = model.origins()[head];
    auto const  cur    = q_cur.find(origin);
    if (cur == q_cur.end())
    {
      throw ArgumentError("missing current batch for origin " + std::to_string(origin));
    }
    SampleBatch const *numerator = nullptr;
    if (new_origin && new_origin->origin == origin)
    {
      numerator = &new_origin->samples;
    }
    else
    {
      auto const prev = q_prev.find(origin);
      if (prev == q_prev.end())
      {
        throw ArgumentError("missing previous batch for origin " + std::to_string(origin));
      }
      numerator = &prev->second;
    }
    require_nonempty(*numerator, "previous");
    require_nonempty(cur->second, "current");
    tasks.push_back({head, numerator, &cur->second, model.snapshot_head(*numerator, head),
                     model.snapshot_head(cur->second, head),
                     effective_lambda(config, static_cast<std::size_t>(cur->second.rows()))});
  }

  train(model.net(), tasks, config, rng.split(kShuffleTag));
  model.set_current_time(model.current_time() + 1);
  return model;
}

GradientCheck check_objective_gradients(std::size_t trials, std::uint64_t seed, double step)
{
  GradientCheck result;
  Rng           root(seed);
  for (std::size_t trial = 0; trial < trials; ++trial)
  {
    Rng  rng = root.split(trial);
    auto pick = [&](std::size_t lo, std::size_t hi) {
      return lo + static_cast<std::size_t>(rng.engine()() % (hi - lo + 1));
    };
    NetArch arch;
    arch.input_dim  = pick(1, 4);
    arch.output_dim = pick(1, 3);
    arch.hidden.assign(pick(1, 2), 0);
    for (auto &w : arch.hidden)
    {
      w = pick(2, 16);
    }
    arch.head_init = HeadInit::scaled_uniform;
    auto net       = DenseNet::make(arch, rng);
    auto snapshot  = DenseNet::make(arch, rng);
    for (auto *n : {&net, &snapshot})
    {
      for (auto &layer : n->layers())
      {
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
        {
          layer.bias(i) = rng.uniform(-0.5, 0.5);
        }
      }
    }

    std::vector<PairBatch> pairs;
    for (std::size_t h = 0; h < arch.output_dim; ++h)
    {
      PairBatch pair;
      pair.head        = h;
      pair.numerator   = SampleBatch(static_cast<Eigen::Index>(pick(3, 12)), static_cast<Eigen::Index>(arch.input_dim));
      pair.denominator = SampleBatch(static_cast<Eigen::Index>(pick(3, 12)), static_cast<Eigen::Index>(arch.input_dim));
      for (auto *b : {&pair.numerator, &pair.denominator})
      {
        for (Eigen::Index i = 0; i < b->size(); ++i)
        {
          b->data()[i] = rng.normal();
        }
      }
      pair.snap_numerator   = forward(snapshot, pair.numerator).col(static_cast<Eigen::Index>(h));
      pair.snap_denominator = forward(snapshot, pair.denominator).col(static_cast<Eigen::Index>(h));
      pair.lambda           = rng.uniform(0.0, 100.0);
      pairs.push_back(std::move(pair));
    }

    auto const analytic = objective(net, pairs);

    auto masks = [&](DenseNet const &n) {
      std::vector<Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>> out;
      for (auto const &pair : pairs)
      {
        for (auto const *b : {&pair.numerator, &pair.denominator})
        {
          auto const pass = forward_pass(n, *b);
          for (std::size_t l = 0; l + 1 < pass.pre.size(); ++l)
          {
            out.push_back(pass.pre[l].array() > 0.0);
          }
        }
      }
      return out;
    };

    auto probe = [&](double &param, double grad) {
      double const saved = param;
      param              = saved + step;
      double const up    = objective(net, pairs).loss;
      auto const   m_up  = masks(net);
      param              = saved - step;
      double const dn    = objective(net, pairs).loss;
      auto const   m_dn  = masks(net);
      param              = saved;
      bool same = m_up.size() == m_dn.size();
      for (std::size_t i = 0; same && i < m_up.size(); ++i)
      {
        same = (m_up[i] == m_dn[i]).all();
      }
      if (!same)
      {
        ++result.skipped_kinks;
        return;
      }
      double const fd = (up - dn) / (2.0 * step);
      // Slopes under the round-off resolution of the quotient: absolute comparison.
      double const resolution =
          1e3 * std::numeric_limits<double>::epsilon() * std::max({1.0, std::abs(up), std::abs(dn)}) / step;
      double const scale = std::max(std::abs(fd), std::abs(grad));
      double const abs_error = std::abs(fd - grad);
      if (scale < resolution)
      {
        ++result.below_resolution;
        result.max_flat_abs_error = std::max(result.max_flat_abs_error, abs_error);
        if (abs_error > resolution)
        {
          result.max_relative_error = std::max(result.max_relative_error, abs_error / resolution);
        }
        return;
      }
      result.max_relative_error = std::max(result.max_relative_error, abs_error / scale);
      ++result.checked;
    };

    for (std::size_t l = 0; l < net.layers().size(); ++l)
    {
      auto &layer = net.layers()[l];
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
      {
        probe(layer.weight.data()[i], analytic.grads[l].weight.data()[i]);
      }
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
      {
        probe(layer.bias(i), analytic.grads[l].bias(i));
      }
    }
  }
  return result;
}

}  // namespace cdre
