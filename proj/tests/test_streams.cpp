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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cdre/errors.hpp"
#include "cdre/streams.hpp"

namespace cdre {
namespace {

TEST(SampleGaussian, MomentsAtOneMillion)
{
  Rng  rng(1);
  auto x = sample_gaussian(GaussianSpec::isotropic(1, 0.0, 1.0), 1000000, rng);
  double const mean = x.col(0).mean();
  double const sd   = std::sqrt((x.col(0).array() - mean).square().mean());
  EXPECT_NEAR(mean, 0.0, 0.005);
  EXPECT_NEAR(sd, 1.0, 0.01);

  Rng  rng2(2);
  auto y = sample_gaussian(GaussianSpec::isotropic(1, 3.0, 0.5), 1000000, rng2);
  double const my  = y.col(0).mean();
  double const sdy = std::sqrt((y.col(0).array() - my).square().mean());
  EXPECT_NEAR(my, 3.0, 0.005);
  EXPECT_NEAR(sdy, 0.5, 0.01);
}

TEST(SampleGaussian, DeterministicUnderSeed)
{
  auto spec = GaussianSpec::isotropic(3, 0.1, 2.0);
  Rng  a(7), b(7), c(8);
  auto xa = sample_gaussian(spec, 100, a);
  EXPECT_EQ(xa, sample_gaussian(spec, 100, b));
  EXPECT_NE(xa, sample_gaussian(spec, 100, c));
}

TEST(SpecAt, Examples)
{
  SingleStreamConfig desk;
  auto               s0 = spec_at(desk, 0);
  EXPECT_TRUE(s0.mean.isConstant(0.0));
  EXPECT_TRUE(s0.std.isConstant(1.0));
  EXPECT_EQ(s0.dim(), 8U);

  auto s10 = spec_at(desk, 10);
  EXPECT_NEAR(s10.mean(0), 0.2, 1e-15);
  EXPECT_NEAR(s10.std(0), 0.8, 1e-15);

  SingleStreamConfig paper;
  paper.dim         = 64;
  paper.total_steps = 20;
  auto s20          = spec_at(paper, 20);
  EXPECT_EQ(s20.dim(), 64U);
  EXPECT_NEAR(s20.mean(63), 0.4, 1e-15);
  EXPECT_NEAR(s20.std(0), 0.6, 1e-15);
}

TEST(SpecAt, Errors)
{
  SingleStreamConfig c;
  EXPECT_THROW(spec_at(c, 11), ArgumentError);
  c.sigma0      = 0.1;
  c.delta_sigma = 0.02;
  EXPECT_THROW(spec_at(c, 6), ConfigError);
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(SpecAt, ScheduleIsLinear)
{
  SingleStreamConfig c;
  c.total_steps = 20;
  c.mu0         = -0.3;
  for (std::size_t k1 = 0; k1 <= 10; ++k1)
  {
    for (std::size_t k2 = 0; k2 <= 10; ++k2)
    {
      double const shift = spec_at(c, k1 + k2).mean(0) - spec_at(c, 0).mean(0);
      EXPECT_NEAR(shift, c.delta_mu * static_cast<double>(k1 + k2), 1e-15);
    }
  }
}

TEST(MultiSpecAt, Examples)
{
  MultiStreamConfig c;
  for (int tau = 1; tau <= 5; ++tau)
  {
    auto s = multi_spec_at(c, tau, tau);
    EXPECT_NEAR(s.mean(0), 2.0 * tau, 1e-15);
    EXPECT_EQ(s.std(0), 1.0);
  }
  auto s = multi_spec_at(c, 1, 10);
  EXPECT_NEAR(s.mean(0), 2.09, 1e-12);
  EXPECT_NEAR(s.std(0), 0.91, 1e-12);
  EXPECT_NEAR(multi_spec_at(c, 3, 3).mean(7), 6.0, 1e-15);
}

TEST(MultiSpecAt, OriginMustHaveJoined)
{
  MultiStreamConfig c;
  EXPECT_THROW(multi_spec_at(c, 4, 3), ArgumentError);
  EXPECT_THROW(multi_spec_at(c, 0, 3), ArgumentError);
}

TEST(StreamRng, SubstreamsAreIndependentOfOtherDraws)
{
  auto draw = [](Rng rng) { return rng.normal(); };
  double const before = draw(stream_rng(5, "q", 1, 3));
  // Drawing other origins and steps first does not perturb the (1, 3) stream.
  for (int origin = 1; origin <= 6; ++origin)
  {
    draw(stream_rng(5, "q", origin, 4));
  }
  EXPECT_EQ(draw(stream_rng(5, "q", 1, 3)), before);
  EXPECT_NE(draw(stream_rng(5, "q", 2, 3)), before);
  EXPECT_NE(draw(stream_rng(5, "p", 1, 3)), before);
  EXPECT_NE(draw(stream_rng(6, "q", 1, 3)), before);
}

double standard_error(Vector const &v)
{
  double const m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1) /
                   static_cast<double>(v.size()));
}

TEST(OracleAgreement, SingleStreamEveryStep)
{
  SingleStreamConfig c;
  auto const         p = spec_at(c, 0);
  for (std::size_t t = 1; t <= c.total_steps; ++t)
  {
    auto         q    = spec_at(c, t);
    Rng          rng  = stream_rng(0, "oracle", 0, static_cast<int>(t));
    auto         x    = sample_gaussian(q, c.samples_per_step, rng);
    Vector const f    = -gaussian_log_ratio(p, q, x);
    double const err  = std::abs(f.mean() - gaussian_kl_closed_form(q, p));
    EXPECT_LE(err, 3 * standard_error(f)) << "step " << t;
  }
}

TEST(OracleAgreement, MultiStreamEveryOriginAndStep)
{
  MultiStreamConfig c;
  for (int t = 1; t <= static_cast<int>(c.origins); ++t)
  {
    for (int tau = 1; tau <= t; ++tau)
    {
      auto         p   = multi_spec_at(c, tau, tau);
      auto         q   = multi_spec_at(c, tau, t);
      Rng          rng = stream_rng(0, "oracle", tau, t);
      auto         x   = sample_gaussian(q, c.samples_per_step, rng);
      Vector const f   = -gaussian_log_ratio(p, q, x);
      if (tau == t)
      {
        EXPECT_TRUE(f.isZero(0.0));
        continue;
      }
      EXPECT_LE(std::abs(f.mean() - gaussian_kl_closed_form(q, p)), 3 * standard_error(f))
          << "origin " << tau << " step " << t;
    }
  }
}

TEST(DumpBatch, ColumnarFormat)
{
  SampleBatch x(2, 3);
  x << 1.0, -0.5, 0.1, 2.0, 3.0, 1e-300;
  std::ostringstream out;
  dump_batch(x, 4, 2, out);
  EXPECT_EQ(out.str(), "# dim=3 step=4 origin=2\n"
                       "x0,x1,x2\n"
                       "1,-0.5,0.10000000000000001\n"
                       "2,3,1e-300\n");
}

TEST(StreamConfigs, Validation)
{
  SingleStreamConfig s;
  s.samples_per_step = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  MultiStreamConfig m;
  m.origins = 200;
  try
  {
    m.validate();
    FAIL();
  }
  catch (ConfigError const &e)
  {
    EXPECT_EQ(e.key(), "multi.delta_sigma");
  }
}

}  // namespace
}  // namespace cdre
