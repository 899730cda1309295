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

#include "cdre/divergences.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cdre/errors.hpp"

namespace cdre {
namespace {

void same_dim(GaussianSpec const &p, GaussianSpec const &q)
{
  p.validate();
  q.validate();
  if (p.dim() != q.dim())
  {
    throw ShapeError("Gaussian specs have different dimensions");
  }
}

// f evaluated at r = exp(log_r).
double generator_from_log(FDivKind kind, double log_r)
{
  switch (kind)
  {
  case FDivKind::kl_pq:
    return std::exp(log_r) * log_r;
  case FDivKind::kl_qp:
    return -log_r;
  case FDivKind::js:
  {
    // log(2 / (1 + r)) computed as ln2 - softplus(log_r)
    double const softplus = log_r > 0.0 ? log_r + std::log1p(std::exp(-log_r))
                                        : std::log1p(std::exp(log_r));
    double const l2 = std::numbers::ln2 - softplus;
    return 0.5 * (std::exp(log_r) * (log_r + l2) + l2);
  }
  case FDivKind::sq_hellinger:
  {
    double const s = std::expm1(0.5 * log_r);
    return s * s;
  }
  }
  throw ArgumentError("unknown f-divergence kind");
}

}  // namespace

std::string_view to_string(FDivKind kind)
{
  switch (kind)
  {
  case FDivKind::kl_pq:
    return "kl_pq";
  case FDivKind::kl_qp:
    return "kl_qp";
  case FDivKind::js:
    return "js";
  case FDivKind::sq_hellinger:
    return "sq_hellinger";
  }
  return "unknown";
}

FDivKind fdiv_from_string(std::string_view name)
{
  for (auto kind : {FDivKind::kl_pq, FDivKind::kl_qp, FDivKind::js, FDivKind::sq_hellinger})
  {
    if (to_string(kind) == name)
    {
      return kind;
    }
  }
  throw ArgumentError("unknown f-divergence '" + std::string(name) + "'");
}

double f_generator(FDivKind kind, double r)
{
  if (!(r > 0.0))
  {
    throw ArgumentError("ratios must be positive");
  }
  return generator_from_log(kind, std::log(r));
}

double f_divergence(std::span<double const> ratios, FDivKind kind)
{
  if (ratios.empty())
  {
    throw ArgumentError("f_divergence of an empty ratio list");
  }
  double sum = 0.0;
  for (double r : ratios)
  {
    sum += f_generator(kind, r);
  }
  return sum / static_cast<double>(ratios.size());
}

double f_divergence(Vector const &ratios, FDivKind kind)
{
  return f_divergence(std::span<double const>(ratios.data(), static_cast<std::size_t>(ratios.size())),
                      kind);
}

double f_divergence_from_logs(Vector const &log_ratios, FDivKind kind)
{
  if (log_ratios.size() == 0)
  {
    throw ArgumentError("f_divergence of an empty ratio list");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < log_ratios.size(); ++i)
  {
    if (std::isnan(log_ratios(i)))
    {
      throw ArgumentError("log ratio is NaN");
    }
    sum += generator_from_log(kind, log_ratios(i));
  }
  return sum / static_cast<double>(log_ratios.size());
}

double avg_divergence(std::map<int, double> const &per_origin)
{
  if (per_origin.empty())
  {
    throw ArgumentError("avg_divergence of an empty map");
  }
  double sum = 0.0;
  for (auto const &[origin, value] : per_origin)
  {
    sum += value;
  }
  return sum / static_cast<double>(per_origin.size());
}

GaussianSpec GaussianSpec::isotropic(std::size_t dim, double mean, double std)
{
  GaussianSpec g{Vector::Constant(static_cast<Eigen::Index>(dim), mean),
                 Vector::Constant(static_cast<Eigen::Index>(dim), std)};
  g.validate();
  return g;
}

void GaussianSpec::validate() const
{
  if (mean.size() != std.size() || mean.size() == 0)
  {
    throw ShapeError("Gaussian mean and std must have the same positive length");
  }
  if (!((std.array() > 0.0).all()) || !std.allFinite() || !mean.allFinite())
  {
    throw ArgumentError("Gaussian std must be positive and parameters finite");
  }
}

double gaussian_log_density(GaussianSpec const &g, Vector const &x)
{
  g.validate();
  if (static_cast<std::size_t>(x.size()) != g.dim())
  {
    throw ShapeError("point dimension does not match Gaussian");
  }
  double const half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  auto const   z            = (x - g.mean).array() / g.std.array();
  return -0.5 * z.square().sum() - g.std.array().log().sum() -
         half_log_2pi * static_cast<double>(g.dim());
}

double gaussian_log_ratio(GaussianSpec const &p, GaussianSpec const &q, Vector const &x)
{
  same_dim(p, q);
  if (static_cast<std::size_t>(x.size()) != p.dim())
  {
    throw ShapeError("point dimension does not match Gaussians");
  }
  auto const zp = (x - p.mean).array() / p.std.array();
  auto const zq = (x - q.mean).array() / q.std.array();
  return 0.5 * ((zq - zp) * (zq + zp)).sum() + (q.std.array().log() - p.std.array().log()).sum();
}

Vector gaussian_log_ratio(GaussianSpec const &p, GaussianSpec const &q, SampleBatch const &x)
{
  same_dim(p, q);
  if (static_cast<std::size_t>(x.cols()) != p.dim())
  {
    throw ShapeError("batch dimension does not match Gaussians");
  }
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
  {
    out(i) = gaussian_log_ratio(p, q, Vector(x.row(i).transpose()));
  }
  return out;
}

double gaussian_kl_closed_form(GaussianSpec const &p, GaussianSpec const &q)
{
  same_dim(p, q);
  auto const sp = p.std.array();
  auto const sq = q.std.array();
  auto const dm = (p.mean - q.mean).array();
  return ((sq / sp).log() + (sp.square() + dm.square()) / (2.0 * sq.square()) - 0.5).sum();
}

double mae_log_ratio(std::span<double const> true_logs, std::span<double const> est_logs)
{
  if (true_logs.size() != est_logs.size())
  {
    throw ShapeError("log ratio lists differ in length");
  }
  if (true_logs.empty())
  {
    throw ArgumentError("mae_log_ratio of empty lists");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < true_logs.size(); ++i)
  {
    sum += std::abs(true_logs[i] - est_logs[i]);
  }
  return sum / static_cast<double>(true_logs.size());
}

double mae_log_ratio(Vector const &true_logs, Vector const &est_logs)
{
  return mae_log_ratio(
      std::span<double const>(true_logs.data(), static_cast<std::size_t>(true_logs.size())),
      std::span<double const>(est_logs.data(), static_cast<std::size_t>(est_logs.size())));
}

}  // namespace cdre
