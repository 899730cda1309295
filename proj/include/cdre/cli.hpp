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
#include <string>
#include <vector>

#include "cdre/experiments.hpp"

namespace cdre {

enum class Subcommand
{
  trace_single,
  trace_multi,
  covshift,
  theory,
  gradient_check
};

enum class Profile
{
  desk,
  paper
};

std::string to_string(Subcommand s);
std::string to_string(Profile p);

struct TheoryConfig
{
  std::size_t mc_samples{100000};
  double      mu_max{2.0};
  double      mu_step{0.1};

  std::vector<double> grid() const;
};

struct GradientCheckConfig
{
  std::size_t trials{20};
  double      step{1e-5};
  double      tolerance{1e-4};
};

/// Fully resolved run description.
struct RunConfig
{
  Subcommand                 subcommand{Subcommand::trace_single};
  Profile                    profile{Profile::desk};
  SingleStreamConfig         single;
  std::vector<std::size_t>   intervals{1, 2};
  MultiStreamConfig          multi;
  TrainConfig                train;
  NetArch                    arch;
  CovariateShiftConfig       covshift;
  TheoryConfig               theory;
  GradientCheckConfig        gradcheck;
  std::vector<std::uint64_t> seeds{0};
  std::string                out;
  std::vector<std::string>   warnings;
};

/// Raw inputs of `parse_config`. `file` is the path of a `key = value` file
/// (empty for none); `flags` are command-line values by dotted key.
struct ConfigSources
{
  Subcommand                         subcommand{Subcommand::trace_single};
  std::string                        file;
  std::map<std::string, std::string> flags;
};

/// Every dotted key accepted in a config file or through `--set`.
std::vector<std::string> const &known_keys();

/// Read a flat `key = value` file. Blank lines and `#` comments are skipped.
std::map<std::string, std::string> read_config_file(std::string const &path);

/// Profile defaults, then file values, then flags. A flag that disagrees with
/// the file wins and leaves a message in `warnings`. Throws ConfigError naming
/// the key on unknown keys, malformed values and non-positive sizes.
RunConfig parse_config(ConfigSources const &sources);

/// "0..9", "3", "0,2,5..7".
std::vector<std::uint64_t> parse_seed_list(std::string const &text);

/// One CSV data row.
struct Record
{
  std::string   run;
  std::uint64_t seed{0};
  int           step{0};
  int           origin{0};
  std::string   method;
  std::string   metric;
  double        value{0.0};

  bool operator==(Record const &) const = default;
};

inline constexpr char kCsvHeader[] = "run,seed,step,origin,method,metric,value";

void                sort_records(std::vector<Record> &records);
std::vector<Record> to_records(TraceReport const &report);
/// Rows ordered by (seed, step, origin, method).
TraceReport to_trace_report(std::vector<Record> const &records);

/// Header then sorted rows, values with 17 significant digits.
void emit_csv(std::vector<Record> records, std::ostream &out);
void emit_csv(std::vector<Record> const &records, std::string const &path);
void emit_csv(TraceReport const &report, std::string const &path);

std::vector<Record> parse_csv(std::istream &in);
std::vector<Record> parse_csv_file(std::string const &path);

/// Execute a resolved configuration and return its records.
std::vector<Record> execute(RunConfig const &config, std::ostream &log);

/// Command-line entry point: 0 success, 1 configuration error, 2 runtime error.
int run_cli(std::vector<std::string> const &args, std::ostream &out, std::ostream &err);

}  // namespace cdre
