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

#include "cdre/cli.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <system_error>
#include <tuple>

#include "CLI11.hpp"
#include "cdre/errors.hpp"
#include "cdre/log.hpp"

namespace cdre {

namespace {

std::string trim(std::string const &s)
{
  auto const first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos)
  {
    return {};
  }
  auto const last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string const &s, char sep)
{
  std::vector<std::string> parts;
  std::string              item;
  std::istringstream       in(s);
  while (std::getline(in, item, sep))
  {
    parts.push_back(trim(item));
  }
  if (!s.empty() && s.back() == sep)
  {
    parts.emplace_back();
  }
  return parts;
}

std::uint64_t to_u64(std::string const &key, std::string const &text)
{
  std::uint64_t value{};
  auto const    t   = trim(text);
  auto const    res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size())
  {
    throw ConfigError(key, "expected a nonnegative integer, got '" + text + "'");
  }
  return value;
}

std::size_t to_size(std::string const &key, std::string const &text)
{
  auto const value = to_u64(key, text);
  if (value == 0)
  {
    throw ConfigError(key, "must be positive");
  }
  return static_cast<std::size_t>(value);
}

double to_real(std::string const &key, std::string const &text)
{
  double     value{};
  auto const t   = trim(text);
  auto const res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size() || !std::isfinite(value))
  {
    throw ConfigError(key, "expected a finite number, got '" + text + "'");
  }
  return value;
}

double to_positive_real(std::string const &key, std::string const &text)
{
  auto const value = to_real(key, text);
  if (value <= 0.0)
  {
    throw ConfigError(key, "must be positive");
  }
  return value;
}

std::vector<std::size_t> to_size_list(std::string const &key, std::string const &text)
{
  std::vector<std::size_t> values;
  for (auto const &part : split(text, ','))
  {
    values.push_back(to_size(key, part));
  }
  if (values.empty())
  {
    throw ConfigError(key, "expected a comma-separated list");
  }
  return values;
}

using Setter = std::function<void(RunConfig &, std::string const &key, std::string const &value)>;

std::map<std::string, Setter> const &setters()
{
  static std::map<std::string, Setter> const table = [] {
    std::map<std::string, Setter> t;
    t["profile"] = [](RunConfig &, std::string const &, std::string const &) {};
    t["seeds"]   = [](RunConfig &c, std::string const &k, std::string const &v) {
      try
      {
        c.seeds = parse_seed_list(v);
      }
      catch (ArgumentError const &e)
      {
        throw ConfigError(k, e.what());
      }
    };
    t["out"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      if (trim(v).empty())
      {
        throw ConfigError(k, "must not be empty");
      }
      c.out = trim(v);
    };

    t["stream.dim"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.single.dim = c.multi.dim = to_size(k, v);
    };
    t["stream.samples"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.single.samples_per_step = c.multi.samples_per_step = to_size(k, v);
    };
    t["stream.steps"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.single.total_steps = to_size(k, v);
    };
    t["stream.mu0"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.single.mu0 = to_real(k, v);
    };
    t["stream.sigma0"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.single.sigma0 = to_positive_real(k, v);
    };
    t["stream.delta_mu"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.single.delta_mu = to_real(k, v);
    };
    t["stream.delta_sigma"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.single.delta_sigma = to_real(k, v);
    };
    t["stream.intervals"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.intervals = to_size_list(k, v);
    };

    t["multi.origins"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.multi.origins = to_size(k, v);
    };
    t["multi.mean_per_origin"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.multi.mean_per_origin = to_real(k, v);
    };
    t["multi.sigma"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.multi.sigma = to_positive_real(k, v);
    };
    t["multi.delta_mu"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.multi.delta_mu = to_real(k, v);
    };
    t["multi.delta_sigma"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.multi.delta_sigma = to_real(k, v);
    };

    t["train.lambda_c"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.train.lambda_c = to_real(k, v);
    };
    t["train.penalty_schedule"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      auto const s = trim(v);
      if (s == "fixed")
      {
        c.train.penalty_schedule = PenaltySchedule::fixed;
      }
      else if (s == "inverse_sqrt_n")
      {
        c.train.penalty_schedule = PenaltySchedule::inverse_sqrt_n;
      }
      else
      {
        throw ConfigError(k, "expected fixed or inverse_sqrt_n, got '" + v + "'");
      }
    };
    t["train.learning_rate"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.train.learning_rate = to_positive_real(k, v);
    };
    t["train.batch_size"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.train.batch_size = to_size(k, v);
    };
    t["train.epochs"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.train.epochs = to_size(k, v);
    };
    t["train.seed"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.train.seed = to_u64(k, v);
    };
    t["train.eval_samples"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.train.eval_sample_size = to_size(k, v);
    };

    t["net.hidden"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.arch.hidden = to_size_list(k, v);
    };
    t["net.head_init"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      auto const s = trim(v);
      if (s == "zero")
      {
        c.arch.head_init = HeadInit::zero;
      }
      else if (s == "scaled_uniform")
      {
        c.arch.head_init = HeadInit::scaled_uniform;
      }
      else
      {
        throw ConfigError(k, "expected zero or scaled_uniform, got '" + v + "'");
      }
    };

    t["covshift.datasets"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.covshift.datasets = to_size(k, v);
    };
    t["covshift.samples"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.covshift.samples = to_size(k, v);
    };
    t["covshift.test_samples"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.covshift.test_samples = to_size(k, v);
    };
    t["covshift.mean_step"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.covshift.mean_step = to_real(k, v);
    };
    t["covshift.w_true"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.covshift.w_true = to_real(k, v);
    };
    t["covshift.b_true"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.covshift.b_true = to_real(k, v);
    };
    t["covshift.curvature"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.covshift.curvature = to_real(k, v);
    };
    t["covshift.noise_var"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.covshift.noise_var = to_positive_real(k, v);
    };

    t["theory.mc_samples"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.theory.mc_samples = to_size(k, v);
    };
    t["theory.mu_max"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.theory.mu_max = to_real(k, v);
    };
    t["theory.mu_step"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.theory.mu_step = to_positive_real(k, v);
    };

    t["gradcheck.trials"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.gradcheck.trials = to_size(k, v);
    };
    t["gradcheck.step"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.gradcheck.step = to_positive_real(k, v);
    };
    t["gradcheck.tolerance"] = [](RunConfig &c, std::string const &k, std::string const &v) {
      c.gradcheck.tolerance = to_positive_real(k, v);
    };
    return t;
  }();
  return table;
}

Profile profile_from_string(std::string const &text)
{
  auto const s = trim(text);
  if (s == "desk")
  {
    return Profile::desk;
  }
  if (s == "paper")
  {
    return Profile::paper;
  }
  throw ConfigError("profile", "expected desk or paper, got '" + text + "'");
}

void apply_profile(RunConfig &c)
{
  bool const paper = c.profile == Profile::paper;

  c.single                  = SingleStreamConfig{};
  c.single.dim              = paper ? 64 : 8;
  c.single.samples_per_step = paper ? 50000 : 5000;
  c.single.total_steps      = paper ? 20 : 10;
  c.single.delta_mu         = 0.02;
  c.single.delta_sigma      = 0.02;
  c.intervals               = paper ? std::vector<std::size_t>{1, 4} : std::vector<std::size_t>{1, 2};

  c.multi                  = MultiStreamConfig{};
  c.multi.dim              = paper ? 64 : 8;
  c.multi.origins          = paper ? 10 : 5;
  c.multi.samples_per_step = paper ? 50000 : 5000;

  c.train = TrainConfig{};
  // Per-origin base weight for the multi-origin trace, scaled by |T| there.
  c.train.lambda_c = c.subcommand == Subcommand::trace_multi ? 100.0 : 10.0;

  c.arch          = NetArch{};
  c.arch.hidden   = {256, 256};
  c.covshift      = CovariateShiftConfig{};
  c.theory        = TheoryConfig{};
  c.gradcheck     = GradientCheckConfig{};
  c.seeds         = {0};
}

std::size_t samples_for(RunConfig const &c)
{
  switch (c.subcommand)
  {
  case Subcommand::trace_single:
    return c.single.samples_per_step;
  case Subcommand::trace_multi:
    return c.multi.samples_per_step;
  case Subcommand::covshift:
    return c.covshift.samples;
  default:
    return c.train.batch_size;
  }
}

std::string default_out(Subcommand s)
{
  std::filesystem::path dir = ".";
  if (char const *env = std::getenv("CDRE_OUT_DIR"); env != nullptr && *env != '\0')
  {
    dir = env;
  }
  return (dir / (to_string(s) + ".csv")).string();
}

void validate(RunConfig const &c)
{
  c.train.validate();
  if (c.seeds.empty())
  {
    throw ConfigError("seeds", "no seeds given");
  }
  switch (c.subcommand)
  {
  case Subcommand::trace_single:
    c.single.validate();
    for (auto k : c.intervals)
    {
      if (c.single.total_steps % k != 0)
      {
        throw ConfigError("stream.intervals", "interval " + std::to_string(k) +
                                                  " does not divide stream.steps");
      }
    }
    break;
  case Subcommand::trace_multi:
    c.multi.validate();
    break;
  case Subcommand::covshift:
    if (c.covshift.datasets < 2)
    {
      throw ConfigError("covshift.datasets", "needs at least two datasets");
    }
    break;
  case Subcommand::theory:
    if (c.theory.mc_samples < 100000)
    {
      throw ConfigError("theory.mc_samples", "needs at least 100000 samples");
    }
    if (c.theory.mu_max < 0.0)
    {
      throw ConfigError("theory.mu_max", "must be nonnegative");
    }
    break;
  case Subcommand::gradient_check:
    break;
  }
}

void check_field(std::string const &field, char const *name)
{
  if (field.find_first_of(",\n\r\"") != std::string::npos)
  {
    throw ArgumentError(std::string("csv ") + name + " contains a separator: " + field);
  }
}

std::string format_value(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void add_trace_records(std::vector<Record> &records, TraceReport const &report)
{
  auto rows = to_records(report);
  records.insert(records.end(), rows.begin(), rows.end());
}

void add(std::vector<Record> &records, std::string const &run, std::uint64_t seed, int step,
         int origin, std::string const &method, std::string const &metric, double value)
{
  records.push_back(Record{run, seed, step, origin, method, metric, value});
}

}  // namespace

std::string to_string(Subcommand s)
{
  switch (s)
  {
  case Subcommand::trace_single:
    return "trace-single";
  case Subcommand::trace_multi:
    return "trace-multi";
  case Subcommand::covshift:
    return "covshift";
  case Subcommand::theory:
    return "theory";
  case Subcommand::gradient_check:
    return "gradient-check";
  }
  return "unknown";
}

std::string to_string(Profile p)
{
  return p == Profile::paper ? "paper" : "desk";
}

std::vector<double> TheoryConfig::grid() const
{
  std::vector<double> mus;
  auto const          n = static_cast<std::size_t>(std::floor(mu_max / mu_step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i)
  {
    mus.push_back(static_cast<double>(i) * mu_step);
  }
  return mus;
}

std::vector<std::string> const &known_keys()
{
  static std::vector<std::string> const keys = [] {
    std::vector<std::string> k;
    for (auto const &[key, setter] : setters())
    {
      k.push_back(key);
    }
    return k;
  }();
  return keys;
}

std::map<std::string, std::string> read_config_file(std::string const &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError("config", "cannot open '" + path + "'");
  }
  std::map<std::string, std::string> values;
  std::string                        line;
  std::size_t                        lineno = 0;
  while (std::getline(in, line))
  {
    ++lineno;
    if (auto const hash = line.find('#'); hash != std::string::npos)
    {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty())
    {
      continue;
    }
    auto const eq = line.find('=');
    if (eq == std::string::npos)
    {
      throw ConfigError("config", path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    auto const key = trim(line.substr(0, eq));
    if (values.count(key) != 0)
    {
      throw ConfigError(key, path + ":" + std::to_string(lineno) + ": duplicate key");
    }
    values[key] = trim(line.substr(eq + 1));
  }
  return values;
}

std::vector<std::uint64_t> parse_seed_list(std::string const &text)
{
  std::vector<std::uint64_t> seeds;
  for (auto const &part : split(text, ','))
  {
    auto const dots = part.find("..");
    if (dots == std::string::npos)
    {
      seeds.push_back(to_u64("seeds", part));
      continue;
    }
    auto const lo = to_u64("seeds", part.substr(0, dots));
    auto const hi = to_u64("seeds", part.substr(dots + 2));
    if (hi < lo)
    {
      throw ArgumentError("empty seed range '" + part + "'");
    }
    for (auto s = lo; s <= hi; ++s)
    {
      seeds.push_back(s);
    }
  }
  if (seeds.empty())
  {
    throw ArgumentError("no seeds in '" + text + "'");
  }
  return seeds;
}

RunConfig parse_config(ConfigSources const &sources)
{
  std::map<std::string, std::string> file_values;
  if (!sources.file.empty())
  {
    file_values = read_config_file(sources.file);
  }

  std::map<std::string, std::string> merged = file_values;
  std::vector<std::string>           warnings;
  for (auto const &[key, value] : sources.flags)
  {
    auto const it = file_values.find(key);
    if (it != file_values.end() && trim(it->second) != trim(value))
    {
      warnings.push_back("flag value '" + value + "' for " + key + " overrides config file value '" +
                         it->second + "'");
    }
    merged[key] = value;
  }

  auto const &table = setters();
  for (auto const &[key, value] : merged)
  {
    if (table.count(key) == 0)
    {
      throw ConfigError(key, "unknown key");
    }
  }

  RunConfig config;
  config.subcommand = sources.subcommand;
  if (auto const it = merged.find("profile"); it != merged.end())
  {
    config.profile = profile_from_string(it->second);
  }
  apply_profile(config);
  config.warnings = std::move(warnings);

  bool const explicit_batch = merged.count("train.batch_size") != 0;
  for (auto const &[key, value] : merged)
  {
    table.at(key)(config, key, value);
  }

  auto const n = samples_for(config);
  if (config.train.batch_size > n)
  {
    if (explicit_batch)
    {
      config.warnings.push_back("train.batch_size " + std::to_string(config.train.batch_size) +
                                " capped at the " + std::to_string(n) + " available samples");
    }
    config.train.batch_size = n;
  }
  if (config.out.empty())
  {
    config.out = default_out(config.subcommand);
  }
  validate(config);
  return config;
}

void sort_records(std::vector<Record> &records)
{
  std::stable_sort(records.begin(), records.end(), [](Record const &a, Record const &b) {
    return std::tie(a.seed, a.step, a.origin, a.method, a.metric) <
           std::tie(b.seed, b.step, b.origin, b.method, b.metric);
  });
}

std::vector<Record> to_records(TraceReport const &report)
{
  std::vector<Record> records;
  records.reserve(report.rows.size() * 3);
  for (auto const &row : report.rows)
  {
    records.push_back({report.run, row.seed, row.step, row.origin, row.method, "kl_estimate",
                       row.kl_estimate});
    records.push_back(
        {report.run, row.seed, row.step, row.origin, row.method, "kl_true", row.kl_true});
    records.push_back({report.run, row.seed, row.step, row.origin, row.method, "mae_log_ratio",
                       row.mae_log_ratio});
  }
  return records;
}

TraceReport to_trace_report(std::vector<Record> const &records)
{
  using Key = std::tuple<std::uint64_t, int, int, std::string>;
  std::map<Key, TraceRow> rows;
  TraceReport             report;
  for (auto const &r : records)
  {
    if (report.run.empty())
    {
      report.run = r.run;
    }
    else if (r.run != report.run)
    {
      throw ArgumentError("records mix runs '" + report.run + "' and '" + r.run + "'");
    }
    auto &row  = rows[Key{r.seed, r.step, r.origin, r.method}];
    row.seed   = r.seed;
    row.step   = r.step;
    row.origin = r.origin;
    row.method = r.method;
    if (r.metric == "kl_estimate")
    {
      row.kl_estimate = r.value;
    }
    else if (r.metric == "kl_true")
    {
      row.kl_true = r.value;
    }
    else if (r.metric == "mae_log_ratio")
    {
      row.mae_log_ratio = r.value;
    }
    else
    {
      throw ArgumentError("not a trace metric: " + r.metric);
    }
  }
  for (auto &[key, row] : rows)
  {
    report.rows.push_back(std::move(row));
  }
  return report;
}

void emit_csv(std::vector<Record> records, std::ostream &out)
{
  sort_records(records);
  out << kCsvHeader << '\n';
  for (auto const &r : records)
  {
    check_field(r.run, "run");
    check_field(r.method, "method");
    check_field(r.metric, "metric");
    out << r.run << ',' << r.seed << ',' << r.step << ',' << r.origin << ',' << r.method << ','
        << r.metric << ',' << format_value(r.value) << '\n';
  }
}

void emit_csv(std::vector<Record> const &records, std::string const &path)
{
  std::ostringstream buffer;
  emit_csv(records, buffer);

  std::filesystem::path const target(path);
  if (target.has_parent_path())
  {
    std::error_code ec;
    std::filesystem::create_directories(target.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
  {
    throw std::system_error(errno, std::generic_category(), "cannot open '" + path + "'");
  }
  out << buffer.str();
  out.close();
  if (!out)
  {
    throw std::system_error(errno, std::generic_category(), "cannot write '" + path + "'");
  }
}

void emit_csv(TraceReport const &report, std::string const &path)
{
  emit_csv(to_records(report), path);
}

std::vector<Record> parse_csv(std::istream &in)
{
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader)
  {
    throw ArgumentError("csv: missing or unexpected header");
  }
  std::vector<Record> records;
  std::size_t         lineno = 1;
  while (std::getline(in, line))
  {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
    {
      line.pop_back();
    }
    if (line.empty())
    {
      continue;
    }
    auto const fields = split(line, ',');
    if (fields.size() != 7)
    {
      throw ArgumentError("csv line " + std::to_string(lineno) + ": expected 7 fields");
    }
    try
    {
      Record r;
      r.run    = fields[0];
      r.seed   = to_u64("seed", fields[1]);
      r.step   = std::stoi(fields[2]);
      r.origin = std::stoi(fields[3]);
      r.method = fields[4];
      r.metric = fields[5];
      char *end{};
      r.value = std::strtod(fields[6].c_str(), &end);
      if (end == fields[6].c_str() || *end != '\0')
      {
        throw ArgumentError("bad value");
      }
      records.push_back(std::move(r));
    }
    catch (std::exception const &e)
    {
      throw ArgumentError("csv line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

std::vector<Record> parse_csv_file(std::string const &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw std::system_error(errno, std::generic_category(), "cannot open '" + path + "'");
  }
  return parse_csv(in);
}

std::vector<Record> execute(RunConfig const &config, std::ostream &log)
{
  std::vector<Record> records;
  auto const          run = to_string(config.subcommand);

  for (auto const seed : config.seeds)
  {
    switch (config.subcommand)
    {
    case Subcommand::trace_single:
    {
      auto stream = config.single;
      stream.seed = seed;
      auto report = run_trace_single(stream, config.train, config.arch, config.intervals);
      report.run  = run;
      add_trace_records(records, report);
      break;
    }
    case Subcommand::trace_multi:
    {
      auto stream = config.multi;
      stream.seed = seed;
      auto report = run_trace_multi(stream, config.train, config.arch);
      report.run  = run;
      add_trace_records(records, report);
      break;
    }
    case Subcommand::covshift:
    {
      for (auto const weights : {ShiftWeights::oracle, ShiftWeights::ckliep})
      {
        auto cs          = config.covshift;
        cs.seed          = seed;
        cs.weights       = weights;
        auto const rep   = run_covariate_shift(cs, config.train, config.arch);
        auto const step  = static_cast<int>(cs.datasets);
        auto const label = weights == ShiftWeights::oracle ? "oracle_weights" : "ckliep_weights";
        add(records, run, seed, step, 1, label, "w_true", rep.w_true);
        add(records, run, seed, step, 1, label, "b_true", rep.b_true);
        add(records, run, seed, step, 1, label, "w_weighted", rep.w_weighted);
        add(records, run, seed, step, 1, label, "b_weighted", rep.b_weighted);
        add(records, run, seed, step, 1, label, "w_unweighted", rep.w_unweighted);
        add(records, run, seed, step, 1, label, "b_unweighted", rep.b_unweighted);
        add(records, run, seed, step, 1, label, "mse_d1_weighted", rep.mse_d1_weighted);
        add(records, run, seed, step, 1, label, "mse_d1_unweighted", rep.mse_d1_unweighted);
      }
      break;
    }
    case Subcommand::theory:
    {
      auto const report = variance_grid(config.theory.grid(), config.theory.mc_samples, seed);
      for (std::size_t i = 0; i < report.rows.size(); ++i)
      {
        auto const &row  = report.rows[i];
        auto const  step = static_cast<int>(i);
        add(records, run, seed, step, 0, "asymptotic_variance", "mu_t", row.mu_t);
        add(records, run, seed, step, 0, "asymptotic_variance", "var_beta1", row.var_beta1);
        add(records, run, seed, step, 0, "asymptotic_variance", "var_beta2", row.var_beta2);
      }
      break;
    }
    case Subcommand::gradient_check:
    {
      auto const check =
          check_objective_gradients(config.gradcheck.trials, seed, config.gradcheck.step);
      add(records, run, seed, 0, 0, "ckliep_objective", "max_relative_error",
          check.max_relative_error);
      add(records, run, seed, 0, 0, "ckliep_objective", "checked",
          static_cast<double>(check.checked));
      add(records, run, seed, 0, 0, "ckliep_objective", "skipped_kinks",
          static_cast<double>(check.skipped_kinks));
      add(records, run, seed, 0, 0, "ckliep_objective", "below_resolution",
          static_cast<double>(check.below_resolution));
      log << "seed " << seed << ": max relative error " << format_value(check.max_relative_error)
          << " over " << check.checked << " parameters\n";
      break;
    }
    }
  }
  return records;
}

int run_cli(std::vector<std::string> const &args, std::ostream &out, std::ostream &err)
{
  CLI::App app{"Continual density ratio estimation experiments", "cdre"};
  app.require_subcommand(1);

  struct Flags
  {
    std::string              config;
    std::string              profile;
    std::string              seeds;
    std::string              out;
    std::vector<std::string> set;
    bool                     verbose{false};
    bool                     paper_scale{false};
  } flags;

  std::vector<std::pair<CLI::App *, Subcommand>> subs;
  auto add_sub = [&](Subcommand s, std::string const &help) {
    auto *sub = app.add_subcommand(to_string(s), help);
    sub->add_option("-c,--config", flags.config, "flat key = value config file")
        ->check(CLI::ExistingFile);
    sub->add_option("--profile", flags.profile, "desk or paper");
    sub->add_flag("--paper-scale", flags.paper_scale, "same as --profile paper");
    sub->add_option("--seeds", flags.seeds, "seed list, e.g. 0..9 or 0,3,5");
    sub->add_option("-o,--out", flags.out, "output CSV path");
    sub->add_option("--set", flags.set, "override a config key: key=value")->take_all();
    sub->add_flag("-v,--verbose", flags.verbose, "progress on standard error");
    subs.emplace_back(sub, s);
  };
  add_sub(Subcommand::trace_single, "single-origin divergence trace");
  add_sub(Subcommand::trace_multi, "multi-origin divergence trace");
  add_sub(Subcommand::covshift, "backward covariate shift regression");
  add_sub(Subcommand::theory, "asymptotic variance of the exponential-family step estimator");
  add_sub(Subcommand::gradient_check, "finite-difference check of the training objective");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try
  {
    app.parse(reversed);
  }
  catch (CLI::CallForHelp const &)
  {
    out << app.help();
    return 0;
  }
  catch (CLI::ParseError const &e)
  {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  ConfigSources sources;
  CLI::App     *chosen = nullptr;
  for (auto const &[sub, s] : subs)
  {
    if (sub->parsed())
    {
      sources.subcommand = s;
      chosen             = sub;
    }
  }
  sources.file = flags.config;
  if (flags.paper_scale)
  {
    sources.flags["profile"] = "paper";
  }
  if (!flags.profile.empty())
  {
    sources.flags["profile"] = flags.profile;
  }
  if (!flags.seeds.empty())
  {
    sources.flags["seeds"] = flags.seeds;
  }
  if (!flags.out.empty())
  {
    sources.flags["out"] = flags.out;
  }

  RunConfig config;
  try
  {
    for (auto const &kv : flags.set)
    {
      auto const eq = kv.find('=');
      if (eq == std::string::npos)
      {
        throw ConfigError(kv, "--set expects key=value");
      }
      sources.flags[trim(kv.substr(0, eq))] = trim(kv.substr(eq + 1));
    }
    config = parse_config(sources);
  }
  catch (ConfigError const &e)
  {
    err << "config error: " << e.what() << "\n\n" << chosen->help();
    return 1;
  }
  for (auto const &w : config.warnings)
  {
    err << "warning: " << w << '\n';
  }

  set_verbose(flags.verbose);
  try
  {
    auto const records = execute(config, err);
    emit_csv(records, config.out);
    set_verbose(false);
    if (config.subcommand == Subcommand::gradient_check)
    {
      double worst = 0.0;
      for (auto const &r : records)
      {
        if (r.metric == "max_relative_error")
        {
          worst = std::max(worst, r.value);
        }
      }
      out << "max relative error " << format_value(worst) << '\n';
      return worst <= config.gradcheck.tolerance ? 0 : 2;
    }
    err << "wrote " << records.size() << " records to " << config.out << '\n';
  }
  catch (ConfigError const &e)
  {
    set_verbose(false);
    err << "config error: " << e.what() << '\n';
    return 1;
  }
  catch (std::exception const &e)
  {
    set_verbose(false);
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace cdre
