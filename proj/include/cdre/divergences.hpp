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

#include <map>
#include <span>
#include <string>
#include <string_view>

#include "cdre/tensor_nn.hpp"

namespace cdre {

/// Convex generator f with f(1) = 0, used as D_f(p||q) = E_q[f(p/q)].
enum class FDivKind
{
  kl_pq,        // f(r) = r log r          -> KL(p||q)
  kl_qp,        // f(r) = -log r           -> KL(q||p), reverse KL relative to D_f(p||q)
  js,           // Jensen-Shannon, maximum ln 2
  sq_hellinger  // f(r) = (sqrt(r) - 1)^2
};

std::string_view to_string(FDivKind kind);
FDivKind         fdiv_from_string(std::string_view name);

double f_generator(FDivKind kind, double r);

/// Sample mean of f over ratios r(x_i) = p(x_i)/q(x_i) evaluated at x_i ~ q.
double f_divergence(std::span<double const> ratios, FDivKind kind);
double f_divergence(Vector const &ratios, FDivKind kind);

/// Same estimate from log ratios, avoiding exp overflow for kl_qp.
double f_divergence_from_logs(Vector const &log_ratios, FDivKind kind);

double avg_divergence(std::map<int, double> const &per_origin);

/// Diagonal Gaussian.
struct GaussianSpec
{
  Vector mean;
  Vector std;

  std::size_t dim() const
  {
    return static_cast<std::size_t>(mean.size());
  }

  /// mean and std broadcast over `dim` coordinates.
  static GaussianSpec isotropic(std::size_t dim, double mean, double std);

  void validate() const;
};

double gaussian_log_density(GaussianSpec const &g, Vector const &x);

/// log p(x) - log q(x).
double gaussian_log_ratio(GaussianSpec const &p, GaussianSpec const &q, Vector const &x);

/// Row-wise log p(x) - log q(x).
Vector gaussian_log_ratio(GaussianSpec const &p, GaussianSpec const &q, SampleBatch const &x);

/// KL(p||q) in closed form.
double gaussian_kl_closed_form(GaussianSpec const &p, GaussianSpec const &q);

double mae_log_ratio(std::span<double const> true_logs, std::span<double const> est_logs);
double mae_log_ratio(Vector const &true_logs, Vector const &est_logs);

}  // namespace cdre
