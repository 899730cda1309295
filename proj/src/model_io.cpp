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

// Text dump of a RatioModel:
//
//   cdre-ratio-model 1
//   current_time <t>
//   origins <n> <tau_1> ... <tau_n>
//   net <layer count>
//   layer <out> <in> relu|identity
//   <out rows of <in> hex floats>
//   <one row of <out> hex floats (bias)>
//   ...
//   snapshot absent | snapshot present, followed by a net block
//   end
//
// Values are written with std::to_chars in hex format so they read back to
// the same bits.

#include <cerrno>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>

#include "cdre/errors.hpp"
#include "cdre/ratio_estimation.hpp"

namespace cdre {
namespace {

constexpr char const *kMagic   = "cdre-ratio-model";
constexpr int         kVersion = 1;

std::string hex(double v)
{
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  if (ec != std::errc{})
  {
    throw std::runtime_error("cannot format value");
  }
  return std::string(buf, end);
}

double parse_hex(std::string const &token)
{
  double      v     = 0.0;
  char const *first = token.data();
  char const *last  = token.data() + token.size();
  bool const  neg   = first != last && *first == '-';
  auto [ptr, ec]    = std::from_chars(neg ? first + 1 : first, last, v, std::chars_format::hex);
  if (ec != std::errc{} || ptr != last)
  {
    throw ArgumentError("malformed number in model file: " + token);
  }
  return neg ? -v : v;
}

void write_net(DenseNet const &net, std::ostream &out)
{
  out << "net " << net.layers().size() << '\n';
  for (auto const &layer : net.layers())
  {
    out << "layer " << layer.weight.rows() << ' ' << layer.weight.cols() << ' '
        << (layer.activation == Activation::relu ? "relu" : "identity") << '\n';
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
    {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      {
        out << (c ? " " : "") << hex(layer.weight(r, c));
      }
      out << '\n';
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r)
    {
      out << (r ? " " : "") << hex(layer.bias(r));
    }
    out << '\n';
  }
}

class Reader
{
public:
  explicit Reader(std::istream &in)
    : in_(in)
  {}

  std::string word()
  {
    std::string w;
    if (!(in_ >> w))
    {
      throw ArgumentError("unexpected end of model file");
    }
    return w;
  }

  void expect(std::string const &keyword)
  {
    auto const w = word();
    if (w != keyword)
    {
      throw ArgumentError("model file: expected '" + keyword + "', found '" + w + "'");
    }
  }

  long integer()
  {
    auto const w = word();
    long       v = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc{} || ptr != w.data() + w.size())
    {
      throw ArgumentError("model file: expected integer, found '" + w + "'");
    }
    return v;
  }

  std::size_t count()
  {
    auto const v = integer();
    if (v < 0)
    {
      throw ArgumentError("model file: negative count");
    }
    return static_cast<std::size_t>(v);
  }

  double real()
  {
    return parse_hex(word());
  }

private:
  std::istream &in_;
};

DenseNet read_net(Reader &r)
{
  r.expect("net");
  auto const              n = r.count();
  std::vector<DenseLayer> layers(n);
  for (auto &layer : layers)
  {
    r.expect("layer");
    auto const rows = static_cast<Eigen::Index>(r.count());
    auto const cols = static_cast<Eigen::Index>(r.count());
    auto const act  = r.word();
    if (act == "relu")
    {
      layer.activation = Activation::relu;
    }
    else if (act == "identity")
    {
      layer.activation = Activation::identity;
    }
    else
    {
      throw ArgumentError("model file: unknown activation '" + act + "'");
    }
    layer.weight.resize(rows, cols);
    layer.bias.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i)
    {
      for (Eigen::Index j = 0; j < cols; ++j)
      {
        layer.weight(i, j) = r.real();
      }
    }
    for (Eigen::Index i = 0; i < rows; ++i)
    {
      layer.bias(i) = r.real();
    }
  }
  return DenseNet(std::move(layers));
}

}  // namespace

void save_model(RatioModel const &model, std::ostream &out)
{
  out << kMagic << ' ' << kVersion << '\n';
  out << "current_time " << model.current_time() << '\n';
  out << "origins " << model.origins().size();
  for (int o : model.origins())
  {
    out << ' ' << o;
  }
  out << '\n';
  write_net(model.net(), out);
  if (model.snapshot())
  {
    out << "snapshot present\n";
    write_net(*model.snapshot(), out);
  }
  else
  {
    out << "snapshot absent\n";
  }
  out << "end\n";
}

RatioModel load_model(std::istream &in)
{
  Reader r(in);
  r.expect(kMagic);
  auto const version = r.integer();
  if (version != kVersion)
  {
    throw ArgumentError("unsupported model file version " + std::to_string(version));
  }
  r.expect("current_time");
  auto const t = static_cast<int>(r.integer());
  r.expect("origins");
  std::vector<int> origins(r.count());
  for (auto &o : origins)
  {
    o = static_cast<int>(r.integer());
  }
  auto net = read_net(r);
  r.expect("snapshot");
  auto const              flag = r.word();
  std::optional<DenseNet> snapshot;
  if (flag == "present")
  {
    snapshot = read_net(r);
  }
  else if (flag != "absent")
  {
    throw ArgumentError("model file: bad snapshot flag '" + flag + "'");
  }
  r.expect("end");
  RatioModel model(std::move(net), std::move(origins), t);
  model.set_snapshot(std::move(snapshot));
  return model;
}

void save_model(RatioModel const &model, std::string const &path)
{
  std::ofstream out(path);
  if (!out)
  {
    throw std::system_error(errno, std::generic_category(), "cannot open " + path);
  }
  save_model(model, out);
  if (!out)
  {
    throw std::system_error(errno, std::generic_category(), "write failed for " + path);
  }
}

RatioModel load_model(std::string const &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw std::system_error(errno, std::generic_category(), "cannot open " + path);
  }
  return load_model(in);
}

}  // namespace cdre
