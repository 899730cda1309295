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
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cdre/divergences.hpp"
#include "cdre/ratio_estimation.hpp"
#include "cdre/streams.hpp"

namespace cdre {

/// One (seed, step, origin, method) measurement of a divergence trace.
/// Origin 0 in a multi-origin trace holds the average over joined origins.
struct TraceRow
{
  std::uint64_t seed{0};
  int           step{0};
  int           origin{0};
  std::string   method;
  double        mae_log_ratio{0.0};
  double        kl_estimate{0.0};
  double        kl_true{0.0};

  bool operator==(TraceRow const &) const = default;
};

struct TraceReport
{
  std::string           run;
  std::vector<TraceRow> rows;

  /// Throws ArgumentError when absent.
  TraceRow const &at(std::uint64_t seed, int step, int origin, std::string const &method) const;

  bool operator==(TraceReport const &) const = default;
};

std::string ckliep_method_name(std::size_t interval);

/// Seed used to train the fit at a given stream step. CKLIEP chains and the
/// KLIEP comparator share it so that a chain's first fit equals the comparator.
std::uint64_t step_train_seed(TrainConfig const &train, std::uint64_t stream_seed, int step);

/// Trace KL(q_t || p) along a single drifting stream with CKLIEP at each
/// interval, direct KLIEP from the stored p samples at every step, and the
/// closed-form oracle.
TraceReport run_trace_single(SingleStreamConfig const &stream, TrainConfig const &train,
                             NetArch const &arch, std::vector<std::size_t> const &intervals,
                             bool with_kliep = true);

/// Multi-origin trace. Origin t joins at step t; `train.lambda_c` is the
/// per-origin constraint weight, scaled by the number of joined origins.
TraceReport run_trace_multi(MultiStreamConfig const &stream, TrainConfig const &train,
                            NetArch const &arch, bool with_kliep = true);

/// Minimiser of sum_i w_i (y_i - (a x_i + b))^2 as (a, b).
std::pair<double, double> weighted_least_squares(std::vector<double> const &x,
                                                 std::vector<double> const &y,
                                                 std::vector<double> const &weights);

enum class ShiftWeights
{
  oracle,  // exact q_1 / q_t
  ckliep,  // estimated along the stream
  none
};

/// Backward covariate shift set-up. Covariates of D_tau are N(mean_step *
/// (tau - 1), 1); labels are y = w x + b + curvature (x^2 - 1) + noise, so
/// (w, b) is the best line on D_1 while the best line on D_t is tilted.
struct CovariateShiftConfig
{
  std::size_t   datasets{10};
  std::size_t   samples{5000};
  std::size_t   test_samples{10000};
  double        mean_step{0.1};
  double        w_true{1.0};
  double        b_true{0.5};
  double        curvature{0.5};
  double        noise_var{0.01};
  std::uint64_t seed{0};
  ShiftWeights  weights{ShiftWeights::ckliep};
};

struct RegressionReport
{
  double w_true{0.0};
  double b_true{0.0};
  double w_weighted{0.0};
  double b_weighted{0.0};
  double w_unweighted{0.0};
  double b_unweighted{0.0};
  double mse_d1_weighted{0.0};
  double mse_d1_unweighted{0.0};
};

RegressionReport run_covariate_shift(CovariateShiftConfig const &config, TrainConfig const &train,
                                     NetArch const &arch);

struct VarianceRow
{
  double mu_t{0.0};
  double var_beta1{0.0};
  double var_beta2{0.0};
};

struct VarianceReport
{
  std::vector<VarianceRow> rows;
};

/// Diagonal of the asymptotic covariance for the exponential-family step
/// estimator with T(x) = (x, x^2): I^-1 + I^-1 (E[r* T T'] - E[T] E[T]') I^-1,
/// expectations under q_prev, I = Cov_{q_prev}[T] in closed form, the middle
/// term by Monte Carlo over `samples` (at least 1e5) with exact r* = q_prev/q_cur.
VarianceRow variance_corollary1(GaussianSpec const &q_prev, GaussianSpec const &q_cur,
                                Vector const &samples);
VarianceRow variance_corollary1(GaussianSpec const &q_prev, GaussianSpec const &q_cur,
                                std::size_t mc_samples, Rng &rng);

/// q_prev = N(0, 1), q_cur = N(mu, 1) over `mus`, sharing one Monte Carlo batch.
VarianceReport variance_grid(std::vector<double> const &mus, std::size_t mc_samples,
                             std::uint64_t seed);

}  // namespace cdre
