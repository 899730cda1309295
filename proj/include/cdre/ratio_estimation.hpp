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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cdre/tensor_nn.hpp"

namespace cdre {

/// Constraint weight schedule. `inverse_sqrt_n` uses lambda_c / sqrt(n) with n
/// the number of denominator samples of each pair.
enum class PenaltySchedule
{
  fixed,
  inverse_sqrt_n
};

struct TrainConfig
{
  double          lambda_c{10.0};
  PenaltySchedule penalty_schedule{PenaltySchedule::fixed};
  double          learning_rate{1e-5};
  std::size_t     batch_size{2000};
  std::size_t     epochs{200};
  std::uint64_t   seed{0};
  std::size_t     eval_sample_size{10000};

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// Log-linear density ratio model.
///
/// `net` holds psi for the current update, one output head per registered
/// origin. `snapshot` holds the frozen psi of the previous update; heads added
/// after the snapshot was taken read as the constant zero function.
class RatioModel
{
public:
  RatioModel() = default;
  RatioModel(DenseNet net, std::vector<int> origins, int current_time);

  DenseNet const &net() const
  {
    return net_;
  }
  DenseNet &net()
  {
    return net_;
  }
  std::optional<DenseNet> const &snapshot() const
  {
    return snapshot_;
  }
  std::vector<int> const &origins() const
  {
    return origins_;
  }
  int current_time() const
  {
    return current_time_;
  }

  bool        has_origin(int origin) const;
  std::size_t head_of(int origin) const;

  /// Snapshot outputs for `head` on `batch`, zero when the head is newer than the snapshot.
  Vector snapshot_head(SampleBatch const &batch, std::size_t head) const;

  void set_snapshot(std::optional<DenseNet> snapshot);
  void set_current_time(int t)
  {
    current_time_ = t;
  }
  void register_origin(int origin);

  bool operator==(RatioModel const &other) const;

private:
  void check_invariants() const;

  DenseNet                net_;
  std::optional<DenseNet> snapshot_;
  std::vector<int>        origins_;
  int                     current_time_{1};
};

struct RatioEstimate
{
  double log_unnormalized;
  double log_normalizer;
  double ratio;
};

/// log of (1/N) sum_i exp(values_i), overflow safe.
double log_mean_exp(Vector const &values);

/// (1/N) sum_i exp(psi(x_i)) for one head.
double normalizer(DenseNet const &net, SampleBatch const &q_samples, std::size_t head);
double log_normalizer(DenseNet const &net, SampleBatch const &q_samples, std::size_t head);

/// r(x) = exp(psi(x)) / normalizer over `q_samples`. `q_samples` must come from
/// the current dynamic distribution of `origin`.
RatioEstimate estimate_ratio(RatioModel const &model, Vector const &x, SampleBatch const &q_samples,
                             int origin);

/// Batched log r(x) for every row of `x`.
Vector log_ratio(RatioModel const &model, SampleBatch const &x, SampleBatch const &q_samples,
                 int origin);

/// Self-normalised exp(psi_t - psi_{t-1}) at x, normalised over `q_cur`.
double step_ratio(RatioModel const &model, Vector const &x, SampleBatch const &q_cur, int origin);
Vector log_step_ratio(RatioModel const &model, SampleBatch const &x, SampleBatch const &q_cur,
                      int origin);

/// Psi_t(q_cur) / (Phi_t(q_cur) * Psi_{t-1}(q_prev)) - 1.
double constraint_residual(RatioModel const &model, SampleBatch const &q_prev,
                           SampleBatch const &q_cur, int origin);

/// Objective pieces for one origin on one pair of batches. `loss` is the
/// quantity minimised: -objective + penalty. The gradients are with respect to
/// the head outputs on the numerator and denominator rows.
struct PairLoss
{
  double loss{0.0};
  double objective{0.0};  // (1/N) sum log r over numerator rows
  double penalty{0.0};
  double residual{0.0};
  Vector grad_numerator;
  Vector grad_denominator;
};

/// KLIEP: maximise mean(psi(p)) - log mean exp(psi(q)).
PairLoss kliep_loss(Vector const &psi_numerator, Vector const &psi_denominator);

/// CKLIEP for one origin: the KLIEP objective on phi = psi - snapshot plus
/// lambda * residual^2. `snap_*` are the frozen snapshot outputs on the same rows.
PairLoss ckliep_loss(Vector const &psi_numerator, Vector const &psi_denominator,
                     Vector const &snap_numerator, Vector const &snap_denominator, double lambda);

/// One origin's batches for a training objective. `snap_*` empty means no
/// snapshot term (plain KLIEP).
struct PairBatch
{
  std::size_t head{0};
  SampleBatch numerator;
  SampleBatch denominator;
  Vector      snap_numerator;
  Vector      snap_denominator;
  double      lambda{0.0};
};

struct ObjectiveValue
{
  double    loss{0.0};
  double    penalty{0.0};
  Gradients grads;
};

/// Mean over pairs of the per-origin loss, with exact parameter gradients.
ObjectiveValue objective(DenseNet const &net, std::vector<PairBatch> const &pairs);

/// Fit a single-head model r = p / q by KLIEP. The head starts at psi == 0.
RatioModel kliep_fit(SampleBatch const &p_samples, SampleBatch const &q_samples,
                     NetArch const &arch, TrainConfig const &config, int origin = 0);

/// Multi-head KLIEP from scratch: one head per origin, trained on the mean of
/// the per-origin KLIEP losses of (p_samples[tau], q_samples[tau]).
RatioModel kliep_fit_multi(std::map<int, SampleBatch> const &p_samples,
                           std::map<int, SampleBatch> const &q_samples, NetArch const &arch,
                           TrainConfig const &config);

struct NewOrigin
{
  int         origin;
  SampleBatch samples;
};

/// One continual update.
///
/// Freezes the current net as the snapshot, optionally registers a new origin
/// (whose zero snapshot head makes its term plain KLIEP on `samples` against
/// `q_cur[origin]`), and trains from the previous parameters on the mean of the
/// per-origin CKLIEP losses. Without a snapshot and without registered origins
/// this is `kliep_fit` on the new origin.
RatioModel ckliep_step(RatioModel model, std::map<int, SampleBatch> const &q_prev,
                       std::map<int, SampleBatch> const &q_cur,
                       std::optional<NewOrigin> const &new_origin, TrainConfig const &config,
                       NetArch const &arch_for_first_fit = {});

/// Register a new origin with a fresh head. Old heads are untouched.
RatioModel add_origin(RatioModel model, int origin, Rng &rng, HeadInit init = HeadInit::zero);

/// Effective constraint weight for a pair with `n` denominator samples.
double effective_lambda(TrainConfig const &config, std::size_t n);

struct GradientCheck
{
  double      max_relative_error{0.0};
  std::size_t checked{0};
  std::size_t skipped_kinks{0};
  std::size_t below_resolution{0};  // |gradient| under finite-difference round-off
  double      max_flat_abs_error{0.0};
};

/// Compare `objective` gradients against central finite differences on random
/// small nets with non-trivial snapshots (relu kinks crossed by a
/// perturbation are skipped). Relative error is taken where the slope exceeds
/// the round-off resolution of the difference quotient; flatter entries must
/// agree to within that resolution.
GradientCheck check_objective_gradients(std::size_t trials, std::uint64_t seed, double step = 1e-5);

/// Versioned text dump, exact on float64 bits.
void       save_model(RatioModel const &model, std::ostream &out);
RatioModel load_model(std::istream &in);
void       save_model(RatioModel const &model, std::string const &path);
RatioModel load_model(std::string const &path);

}  // namespace cdre
