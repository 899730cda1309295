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

#include "cdre/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>

#include "cdre/errors.hpp"
#include "cdre/log.hpp"

namespace cdre {
namespace {

constexpr int kSingleOrigin = 0;

struct Evaluation
{
  double mae;
  double kl_estimate;
};

// Population metrics of an estimated ratio on fresh draws of the current
// dynamic distribution: one batch fixes the normaliser, another is scored.
Evaluation evaluate(RatioModel const &model, int origin, GaussianSpec const &p,
                    GaussianSpec const &q, SampleBatch const &eval, SampleBatch const &norm)
{
  Vector const est  = log_ratio(model, eval, norm, origin);
  Vector const real = gaussian_log_ratio(p, q, eval);
  return {mae_log_ratio(real, est), f_divergence_from_logs(est, FDivKind::kl_qp)};
}

TrainConfig with_seed(TrainConfig train, std::uint64_t seed)
{
  train.seed = seed;
  return train;
}

}  // namespace

TraceRow const &TraceReport::at(std::uint64_t seed, int step, int origin,
                                std::string const &method) const
{
  for (auto const &row : rows)
  {
    if (row.seed == seed && row.step == step && row.origin == origin && row.method == method)
    {
      return row;
    }
  }
  throw ArgumentError("no trace row for seed " + std::to_string(seed) + " step " +
                      std::to_string(step) + " origin " + std::to_string(origin) + " method " +
                      method);
}

std::string ckliep_method_name(std::size_t interval)
{
  return "ckliep_d" + std::to_string(interval);
}

std::uint64_t step_train_seed(TrainConfig const &train, std::uint64_t stream_seed, int step)
{
  return Rng(train.seed).split({stream_seed, static_cast<std::uint64_t>(step)}).key();
}

TraceReport run_trace_single(SingleStreamConfig const &stream, TrainConfig const &train,
                             NetArch const &arch, std::vector<std::size_t> const &intervals,
                             bool with_kliep)
{
  stream.validate();
  train.validate();
  auto const ks = intervals.empty() ? std::vector<std::size_t>{stream.interval} : intervals;
  for (auto k : ks)
  {
    if (k == 0 || stream.total_steps % k != 0)
    {
      throw ConfigError("stream.intervals",
                        "interval " + std::to_string(k) + " does not divide the step count");
    }
  }

  auto const  seed  = stream.seed;
  auto const  n     = stream.samples_per_step;
  auto const  n_val = train.eval_sample_size;
  auto const  steps = static_cast<int>(stream.total_steps);
  auto const  p     = spec_at(stream, 0);

  auto draw = [&](char const *purpose, int step, std::size_t count) {
    Rng rng = stream_rng(seed, purpose, kSingleOrigin, step);
    return sample_gaussian(spec_at(stream, static_cast<std::size_t>(step)), count, rng);
  };
  SampleBatch const p_samples = draw("p", 0, n);

  TraceReport report;
  report.run = "trace-single";

  std::map<int, SampleBatch> train_q, eval_q, norm_q;
  auto cached = [&](std::map<int, SampleBatch> &cache, char const *purpose, int step,
                    std::size_t count) -> SampleBatch const & {
    auto it = cache.find(step);
    if (it == cache.end())
    {
      it = cache.emplace(step, draw(purpose, step, count)).first;
    }
    return it->second;
  };

  for (int t = 1; t <= steps; ++t)
  {
    auto const q = spec_at(stream, static_cast<std::size_t>(t));
    double const kl_true = gaussian_kl_closed_form(q, p);
    report.rows.push_back({seed, t, kSingleOrigin, "oracle", 0.0, kl_true, kl_true});
  }

  for (auto k : ks)
  {
    std::optional<RatioModel> model;
    for (int t = static_cast<int>(k); t <= steps; t += static_cast<int>(k))
    {
      auto const  cfg   = with_seed(train, step_train_seed(train, seed, t));
      auto const &q_cur = cached(train_q, "q", t, n);
      if (!model)
      {
        model = kliep_fit(p_samples, q_cur, arch, cfg, kSingleOrigin);
      }
      else
      {
        auto const &prev = cached(train_q, "q", t - static_cast<int>(k), n);
        model = ckliep_step(std::move(*model), {{kSingleOrigin, prev}}, {{kSingleOrigin, q_cur}},
                            std::nullopt, cfg);
      }
      model->set_current_time(t);
      auto const q  = spec_at(stream, static_cast<std::size_t>(t));
      auto const ev = evaluate(*model, kSingleOrigin, p, q, cached(eval_q, "eval", t, n_val),
                               cached(norm_q, "norm", t, n_val));
      report.rows.push_back({seed, t, kSingleOrigin, ckliep_method_name(k), ev.mae, ev.kl_estimate,
                             gaussian_kl_closed_form(q, p)});
      progress("trace-single seed ", seed, " ", ckliep_method_name(k), " step ", t, " mae ",
               ev.mae, " kl ", ev.kl_estimate);
    }
  }

  if (with_kliep)
  {
    for (int t = 1; t <= steps; ++t)
    {
      auto const cfg   = with_seed(train, step_train_seed(train, seed, t));
      auto const model = kliep_fit(p_samples, cached(train_q, "q", t, n), arch, cfg, kSingleOrigin);
      auto const q     = spec_at(stream, static_cast<std::size_t>(t));
      auto const ev    = evaluate(model, kSingleOrigin, p, q, cached(eval_q, "eval", t, n_val),
                                  cached(norm_q, "norm", t, n_val));
      report.rows.push_back({seed, t, kSingleOrigin, "kliep", ev.mae, ev.kl_estimate,
                             gaussian_kl_closed_form(q, p)});
      progress("trace-single seed ", seed, " kliep step ", t, " mae ", ev.mae, " kl ",
               ev.kl_estimate);
    }
  }
  return report;
}

TraceReport run_trace_multi(MultiStreamConfig const &stream, TrainConfig const &train,
                            NetArch const &arch, bool with_kliep)
{
  stream.validate();
  train.validate();
  auto const seed  = stream.seed;
  auto const n     = stream.samples_per_step;
  auto const n_val = train.eval_sample_size;

  auto draw = [&](char const *purpose, int origin, int step, std::size_t count) {
    Rng rng = stream_rng(seed, purpose, origin, step);
    return sample_gaussian(multi_spec_at(stream, origin, step), count, rng);
  };

  TraceReport report;
  report.run = "trace-multi";

  std::map<int, SampleBatch> p_samples;
  std::optional<RatioModel>  model;
  auto const                 last = static_cast<int>(stream.origins);
  for (int t = 1; t <= last; ++t)
  {
    p_samples.emplace(t, draw("p", t, t, n));
    std::map<int, SampleBatch> q_prev, q_cur;
    for (int tau = 1; tau <= t; ++tau)
    {
      q_cur.emplace(tau, draw("q", tau, t, n));
      if (tau < t)
      {
        q_prev.emplace(tau, draw("q", tau, t - 1, n));
      }
    }

    TrainConfig cfg = with_seed(train, step_train_seed(train, seed, t));
    cfg.lambda_c    = train.lambda_c * static_cast<double>(t);

    if (!model)
    {
      model = kliep_fit(p_samples.at(t), q_cur.at(t), arch, cfg, t);
    }
    else
    {
      model = ckliep_step(std::move(*model), q_prev, q_cur, NewOrigin{t, p_samples.at(t)}, cfg);
    }
    model->set_current_time(t);

    std::optional<RatioModel> direct;
    if (with_kliep)
    {
      direct = kliep_fit_multi(p_samples, q_cur, arch, cfg);
    }

    std::map<int, double> est_c, est_k, truth, mae_c, mae_k;
    for (int tau = 1; tau <= t; ++tau)
    {
      auto const p    = multi_spec_at(stream, tau, tau);
      auto const q    = multi_spec_at(stream, tau, t);
      auto const eval = draw("eval", tau, t, n_val);
      auto const norm = draw("norm", tau, t, n_val);
      truth[tau]      = gaussian_kl_closed_form(q, p);
      report.rows.push_back({seed, t, tau, "oracle", 0.0, truth[tau], truth[tau]});

      auto const ev_c = evaluate(*model, tau, p, q, eval, norm);
      est_c[tau]      = ev_c.kl_estimate;
      mae_c[tau]      = ev_c.mae;
      report.rows.push_back({seed, t, tau, ckliep_method_name(1), ev_c.mae, ev_c.kl_estimate,
                             truth[tau]});
      if (direct)
      {
        auto const ev_k = evaluate(*direct, tau, p, q, eval, norm);
        est_k[tau]      = ev_k.kl_estimate;
        mae_k[tau]      = ev_k.mae;
        report.rows.push_back({seed, t, tau, "kliep", ev_k.mae, ev_k.kl_estimate, truth[tau]});
      }
    }
    double const avg_truth = avg_divergence(truth);
    report.rows.push_back({seed, t, 0, "oracle", 0.0, avg_truth, avg_truth});
    report.rows.push_back(
        {seed, t, 0, ckliep_method_name(1), avg_divergence(mae_c), avg_divergence(est_c), avg_truth});
    if (direct)
    {
      report.rows.push_back(
          {seed, t, 0, "kliep", avg_divergence(mae_k), avg_divergence(est_k), avg_truth});
    }
    progress("trace-multi seed ", seed, " step ", t, " avg kl ckliep ", avg_divergence(est_c),
             direct ? " kliep " : "", direct ? avg_divergence(est_k) : 0.0, " true ", avg_truth);
  }
  return report;
}

std::pair<double, double> weighted_least_squares(std::vector<double> const &x,
                                                 std::vector<double> const &y,
                                                 std::vector<double> const &weights)
{
  if (x.size() != y.size() || x.size() != weights.size())
  {
    throw ShapeError("weighted_least_squares inputs differ in length");
  }
  if (x.size() < 2)
  {
    throw ArgumentError("weighted_least_squares needs at least two points");
  }
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
    {
      throw ArgumentError("weights must be finite and nonnegative");
    }
    sw += weights[i];
    sx += weights[i] * x[i];
    sy += weights[i] * y[i];
  }
  if (!(sw > 0.0))
  {
    throw ArgumentError("all weights are zero");
  }
  double const mx = sx / sw;
  double const my = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    double const dx = x[i] - mx;
    sxx += weights[i] * dx * dx;
    sxy += weights[i] * dx * (y[i] - my);
  }
  if (!(sxx > 1e-12 * sw * std::max(1.0, mx * mx)))
  {
    throw NumericError("singular design: weighted covariates have no spread");
  }
  double const slope = sxy / sxx;
  return {slope, my - slope * mx};
}

RegressionReport run_covariate_shift(CovariateShiftConfig const &config, TrainConfig const &train,
                                     NetArch const &arch)
{
  train.validate();
  if (config.datasets < 2 || config.samples < 2 || config.test_samples == 0)
  {
    throw ConfigError("covshift", "needs at least two datasets of two samples");
  }
  auto const covariates = [&](std::size_t tau) {
    return GaussianSpec::isotropic(1, config.mean_step * static_cast<double>(tau - 1), 1.0);
  };
  auto const label = [&](double x, Rng &rng) {
    return config.w_true * x + config.b_true + config.curvature * (x * x - 1.0) +
           std::sqrt(config.noise_var) * rng.normal();
  };
  auto const draw_x = [&](std::size_t tau, char const *purpose, std::size_t count) {
    Rng rng = stream_rng(config.seed, purpose, 0, static_cast<int>(tau));
    return sample_gaussian(covariates(tau), count, rng);
  };

  auto const t = config.datasets;
  std::vector<SampleBatch> xs;
  for (std::size_t tau = 1; tau <= t; ++tau)
  {
    xs.push_back(draw_x(tau, "covshift_x", config.samples));
  }
  SampleBatch const &x_t = xs.back();
  std::vector<double> x(x_t.data(), x_t.data() + x_t.rows());
  std::vector<double> y(x.size());
  {
    Rng rng = stream_rng(config.seed, "covshift_y", 0, static_cast<int>(t));
    for (std::size_t i = 0; i < x.size(); ++i)
    {
      y[i] = label(x[i], rng);
    }
  }

  std::vector<double> w(x.size(), 1.0);
  if (config.weights == ShiftWeights::oracle)
  {
    Vector const lr = gaussian_log_ratio(covariates(1), covariates(t), x_t);
    for (std::size_t i = 0; i < w.size(); ++i)
    {
      w[i] = std::exp(lr(static_cast<Eigen::Index>(i)));
    }
  }
  else if (config.weights == ShiftWeights::ckliep)
  {
    std::optional<RatioModel> model;
    for (std::size_t tau = 2; tau <= t; ++tau)
    {
      auto const cfg = with_seed(train, step_train_seed(train, config.seed, static_cast<int>(tau)));
      if (!model)
      {
        model = kliep_fit(xs[0], xs[tau - 1], arch, cfg, 1);
      }
      else
      {
        model = ckliep_step(std::move(*model), {{1, xs[tau - 2]}}, {{1, xs[tau - 1]}}, std::nullopt,
                            cfg);
      }
      model->set_current_time(static_cast<int>(tau));
      progress("covshift seed ", config.seed, " step ", tau);
    }
    Vector const lr = log_ratio(*model, x_t, x_t, 1);
    for (std::size_t i = 0; i < w.size(); ++i)
    {
      w[i] = std::exp(lr(static_cast<Eigen::Index>(i)));
    }
  }

  RegressionReport report;
  report.w_true = config.w_true;
  report.b_true = config.b_true;
  std::tie(report.w_weighted, report.b_weighted) = weighted_least_squares(x, y, w);
  std::tie(report.w_unweighted, report.b_unweighted) =
      weighted_least_squares(x, y, std::vector<double>(x.size(), 1.0));

  SampleBatch const test = draw_x(1, "covshift_test_x", config.test_samples);
  Rng               rng  = stream_rng(config.seed, "covshift_test_y", 0, 1);
  double            se_w = 0.0, se_u = 0.0;
  for (Eigen::Index i = 0; i < test.rows(); ++i)
  {
    double const xi = test(i, 0);
    double const yi = label(xi, rng);
    se_w += std::pow(yi - (report.w_weighted * xi + report.b_weighted), 2);
    se_u += std::pow(yi - (report.w_unweighted * xi + report.b_unweighted), 2);
  }
  report.mse_d1_weighted   = se_w / static_cast<double>(test.rows());
  report.mse_d1_unweighted = se_u / static_cast<double>(test.rows());
  return report;
}

VarianceRow variance_corollary1(GaussianSpec const &q_prev, GaussianSpec const &q_cur,
                                Vector const &samples)
{
  q_prev.validate();
  q_cur.validate();
  if (q_prev.dim() != 1 || q_cur.dim() != 1)
  {
    throw ShapeError("variance_corollary1 needs 1-D Gaussians");
  }
  if (samples.size() < 100000)
  {
    throw ArgumentError("variance_corollary1 needs at least 1e5 Monte Carlo samples");
  }
  double const m = q_prev.mean(0);
  double const s2 = q_prev.std(0) * q_prev.std(0);

  // moments of T(x) = (x, x^2) under q_prev
  Eigen::Vector2d mean_t(m, m * m + s2);
  Eigen::Matrix2d info;
  info << s2, 2.0 * m * s2, 2.0 * m * s2, 2.0 * s2 * s2 + 4.0 * m * m * s2;
  if (!(std::abs(info.determinant()) > 1e-300))
  {
    throw NumericError("Fisher information is singular");
  }
  Eigen::Matrix2d const inv = info.inverse();

  Eigen::Matrix2d weighted = Eigen::Matrix2d::Zero();
  for (Eigen::Index i = 0; i < samples.size(); ++i)
  {
    double const    x = m + q_prev.std(0) * samples(i);
    double const    r = std::exp(gaussian_log_ratio(q_prev, q_cur, Vector(Vector::Constant(1, x))));
    Eigen::Vector2d tx(x, x * x);
    weighted += r * tx * tx.transpose();
  }
  weighted /= static_cast<double>(samples.size());

  Eigen::Matrix2d const middle = weighted - mean_t * mean_t.transpose();
  Eigen::Matrix2d const nu     = inv + inv * middle * inv;
  if (!nu.allFinite())
  {
    throw NumericError("asymptotic variance is not finite");
  }
  return {q_cur.mean(0), nu(0, 0), nu(1, 1)};
}

VarianceRow variance_corollary1(GaussianSpec const &q_prev, GaussianSpec const &q_cur,
                                std::size_t mc_samples, Rng &rng)
{
  Vector z(static_cast<Eigen::Index>(mc_samples));
  for (Eigen::Index i = 0; i < z.size(); ++i)
  {
    z(i) = rng.normal();
  }
  return variance_corollary1(q_prev, q_cur, z);
}

VarianceReport variance_grid(std::vector<double> const &mus, std::size_t mc_samples,
                             std::uint64_t seed)
{
  Rng    rng = Rng(seed).split(Rng::tag("variance_grid"));
  Vector z(static_cast<Eigen::Index>(mc_samples));
  for (Eigen::Index i = 0; i < z.size(); ++i)
  {
    z(i) = rng.normal();
  }
  VarianceReport report;
  auto const     q_prev = GaussianSpec::isotropic(1, 0.0, 1.0);
  for (double mu : mus)
  {
    report.rows.push_back(variance_corollary1(q_prev, GaussianSpec::isotropic(1, mu, 1.0), z));
  }
  return report;
}

}  // namespace cdre
