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
#include <iosfwd>
#include <string>

#include "cdre/divergences.hpp"
#include "cdre/random.hpp"
#include "cdre/tensor_nn.hpp"

namespace cdre {

/// One original distribution N(mu0, sigma0^2 I) whose mean grows and std
/// shrinks linearly with the global time step.
struct SingleStreamConfig
{
  std::size_t   dim{8};
  double        mu0{0.0};
  double        sigma0{1.0};
  double        delta_mu{0.02};
  double        delta_sigma{0.02};
  std::size_t   total_steps{10};
  std::size_t   interval{1};
  std::size_t   samples_per_step{5000};
  std::uint64_t seed{0};

  void validate() const;
};

/// Origins tau = 1..origins join one per step at N(2 tau, 1) and then drift
/// like the single stream.
struct MultiStreamConfig
{
  std::size_t   dim{8};
  std::size_t   origins{5};
  double        mean_per_origin{2.0};
  double        sigma{1.0};
  double        delta_mu{0.01};
  double        delta_sigma{0.01};
  std::size_t   samples_per_step{5000};
  std::uint64_t seed{0};

  void validate() const;
};

/// n i.i.d. rows from a diagonal Gaussian.
SampleBatch sample_gaussian(GaussianSpec const &spec, std::size_t n, Rng &rng);

GaussianSpec spec_at(SingleStreamConfig const &config, std::size_t step);
GaussianSpec multi_spec_at(MultiStreamConfig const &config, int origin, int step);

/// Substream for one (purpose, origin, step) draw.
Rng stream_rng(std::uint64_t seed, char const *purpose, int origin, int step);

/// Comma-separated dump: a `# dim=.. step=.. origin=..` line, a header of
/// x0..x{D-1}, then one row per sample.
void dump_batch(SampleBatch const &batch, int step, int origin, std::ostream &out);

}  // namespace cdre
