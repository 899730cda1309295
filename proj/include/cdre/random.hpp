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

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cdre {

/// Seedable, splittable pseudo-random generator.
///
/// A generator is identified by a 64-bit key. `split(tag)` derives a child key
/// by hashing (key, tag) with SplitMix64, so child streams are independent of
/// how many draws the parent has made and of which other children exist.
class Rng
{
public:
  using Engine = std::mt19937_64;

  explicit Rng(std::uint64_t seed = 0)
    : key_(mix(seed))
    , engine_(key_)
  {}

  Rng split(std::uint64_t tag) const
  {
    Rng child;
    child.key_ = mix(key_ ^ mix(tag + 0x632be59bd9b4e019ULL));
    child.engine_.seed(child.key_);
    return child;
  }

  Rng split(std::initializer_list<std::uint64_t> tags) const
  {
    Rng out = *this;
    for (auto tag : tags)
    {
      out = out.split(tag);
    }
    return out;
  }

  std::uint64_t key() const noexcept
  {
    return key_;
  }

  Engine &engine() noexcept
  {
    return engine_;
  }

  double normal()
  {
    return normal_(engine_);
  }

  double uniform(double lo, double hi)
  {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept
  {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Stable 64-bit tag for a short string label.
  static constexpr std::uint64_t tag(char const *label) noexcept
  {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (; *label != '\0'; ++label)
    {
      h = (h ^ static_cast<unsigned char>(*label)) * 0x100000001b3ULL;
    }
    return h;
  }

private:
  std::uint64_t                    key_{0};
  Engine                           engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace cdre
