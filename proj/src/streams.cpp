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

#include "cdre/streams.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "cdre/errors.hpp"

namespace cdre {

void SingleStreamConfig::validate() const
{
  if (dim == 0)
  {
    throw ConfigError("stream.dim", "must be positive");
  }
  if (total_steps == 0)
  {
    throw ConfigError("stream.steps", "must be positive");
  }
  if (interval == 0)
  {
    throw ConfigError("stream.intervals", "must be positive");
  }
  if (samples_per_step == 0)
  {
    throw ConfigError("stream.samples", "must be positive");
  }
  if (!(sigma0 > 0.0))
  {
    throw ConfigError("stream.sigma0", "must be positive");
  }
  if (!(sigma0 - delta_sigma * static_cast<double>(total_steps) > 0.0))
  {
    throw ConfigError("stream.delta_sigma", "std would reach zero within the stream");
  }
}

void MultiStreamConfig::validate() const
{
  if (dim == 0)
  {
    throw ConfigError("stream.dim", "must be positive");
  }
  if (origins == 0)
  {
    throw ConfigError("multi.origins", "must be positive");
  }
  if (samples_per_step == 0)
  {
    throw ConfigError("stream.samples", "must be positive");
  }
  if (!(sigma - delta_sigma * static_cast<double>(origins) > 0.0))
  {
    throw ConfigError("multi.delta_sigma", "std would reach zero within the stream");
  }
}

SampleBatch sample_gaussian(GaussianSpec const &spec, std::size_t n, Rng &rng)
{
  spec.validate();
  SampleBatch out(static_cast<Eigen::Index>(n), spec.mean.size());
  for (Eigen::Index i = 0; i < out.rows(); ++i)
  {
    for (Eigen::Index d = 0; d < out.cols(); ++d)
    {
      out(i, d) = spec.mean(d) + spec.std(d) * rng.normal();
    }
  }
  return out;
}

GaussianSpec spec_at(SingleStreamConfig const &config, std::size_t step)
{
  if (step > config.total_steps)
  {
    throw ArgumentError("step " + std::to_string(step) + " is past the end of the stream");
  }
  double const k   = static_cast<double>(step);
  double const std = config.sigma0 - config.delta_sigma * k;
  if (!(std > 0.0))
  {
    throw ConfigError("stream.delta_sigma", "std is not positive at step " + std::to_string(step));
  }
  return GaussianSpec::isotropic(config.dim, config.mu0 + config.delta_mu * k, std);
}

GaussianSpec multi_spec_at(MultiStreamConfig const &config, int origin, int step)
{
  if (origin < 1)
  {
    throw ArgumentError("origins are numbered from 1");
  }
  if (step < origin)
  {
    throw ArgumentError("origin " + std::to_string(origin) + " has not joined at step " +
                        std::to_string(step));
  }
  double const elapsed = static_cast<double>(step - origin);
  double const std     = config.sigma - config.delta_sigma * elapsed;
  if (!(std > 0.0))
  {
    throw ConfigError("multi.delta_sigma", "std is not positive at step " + std::to_string(step));
  }
  return GaussianSpec::isotropic(config.dim,
                                 config.mean_per_origin * origin + config.delta_mu * elapsed, std);
}

Rng stream_rng(std::uint64_t seed, char const *purpose, int origin, int step)
{
  return Rng(seed).split({Rng::tag(purpose), static_cast<std::uint64_t>(static_cast<std::int64_t>(origin)),
                          static_cast<std::uint64_t>(static_cast<std::int64_t>(step))});
}

void dump_batch(SampleBatch const &batch, int step, int origin, std::ostream &out)
{
  out << "# dim=" << batch.cols() << " step=" << step << " origin=" << origin << '\n';
  for (Eigen::Index d = 0; d < batch.cols(); ++d)
  {
    out << (d ? "," : "") << 'x' << d;
  }
  out << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < batch.rows(); ++i)
  {
    for (Eigen::Index d = 0; d < batch.cols(); ++d)
    {
      std::snprintf(buf, sizeof buf, "%.17g", batch(i, d));
      out << (d ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace cdre
