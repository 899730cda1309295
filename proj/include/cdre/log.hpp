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

#include <atomic>
#include <iostream>
#include <sstream>

namespace cdre {

inline std::atomic<bool> &verbose_flag()
{
  static std::atomic<bool> flag{false};
  return flag;
}

inline void set_verbose(bool on)
{
  verbose_flag() = on;
}

/// Progress line on standard error when verbose output is on.
template <typename... Args>
void progress(Args const &...args)
{
  if (!verbose_flag())
  {
    return;
  }
  std::ostringstream line;
  (line << ... << args);
  std::cerr << line.str() << '\n';
}

}  // namespace cdre
