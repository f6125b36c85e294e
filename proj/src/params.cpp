#include "mtft/params.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "mtft/rng.hpp"

namespace mtft {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

void write_f64_le(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

double read_f64_le(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

struct CkptEntry {
  std::string name;
  std::vector<std::size_t> shape;
};

/// Parses the text header up to and including the "payload" line. Leaves the
/// stream positioned at the first byte of the value blob.
void read_header(std::istream& in, const std::string& path,
                 std::map<std::string, std::string>& meta,
                 std::vector<CkptEntry>& entries) {
  std::string line;
  if (!std::getline(in, line) || line != "MTFTCKPT 1")
    fail(path + ": not a checkpoint file (bad magic line)");
  std::size_t expected = 0;
  bool saw_count = false;
  while (std::getline(in, line)) {
    if (line == "payload") {
      if (!saw_count) fail(path + ": missing params line");
      if (entries.size() != expected)
        fail(path + ": header lists " + std::to_string(entries.size()) +
             " parameters, expected " + std::to_string(expected));
      return;
    }
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      if (key.empty()) fail(path + ": malformed meta line: " + line);
      meta[key] = value;
    } else if (tag == "params") {
      ls >> expected;
      saw_count = true;
    } else if (tag == "param") {
      CkptEntry e;
      std::size_t rank = 0;
      ls >> e.name >> rank;
      for (std::size_t i = 0; i < rank; ++i) {
        std::size_t d = 0;
        ls >> d;
        e.shape.push_back(d);
      }
      if (!ls || e.name.empty())
        fail(path + ": malformed param line: " + line);
      entries.push_back(std::move(e));
    } else {
      fail(path + ": unexpected header line: " + line);
    }
  }
  fail(path + ": truncated header (no payload line)");
}

}  // namespace

Parameter& ParameterStore::create(const std::string& name,
                                  std::vector<std::size_t> shape,
                                  std::size_t fan_in) {
  if (fan_in == 0) fail("parameter " + name + ": fan_in must be positive");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->index = params_.size();
  p->value = Tensor(std::move(shape));
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Rng stream(Rng::mix(seed_, Rng::hash_str(name)));
  for (std::size_t i = 0; i < p->value.size(); ++i)
    p->value[i] = stream.uniform(-bound, bound);
  p->grad = Tensor::zeros(p->value.shape());
  p->adam_m = Tensor::zeros(p->value.shape());
  p->adam_v = Tensor::zeros(p->value.shape());
  if (!by_name_.emplace(name, p.get()).second)
    fail("duplicate parameter name: " + name);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::create_filled(const std::string& name,
                                         std::vector<std::size_t> shape,
                                         double fill) {
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->index = params_.size();
  p->value = Tensor::full(std::move(shape), fill);
  p->grad = Tensor::zeros(p->value.shape());
  p->adam_m = Tensor::zeros(p->value.shape());
  p->adam_v = Tensor::zeros(p->value.shape());
  if (!by_name_.emplace(name, p.get()).second)
    fail("duplicate parameter name: " + name);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) fail("unknown parameter: " + name);
  return *it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) fail("unknown parameter: " + name);
  return *it->second;
}

bool ParameterStore::contains(const std::string& name) const {
  return by_name_.count(name) != 0;
}

std::size_t ParameterStore::total_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.fill(0.0);
}

void ParameterStore::save(const std::string& path,
                          const std::map<std::string, std::string>& meta) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path + ": cannot open for writing");
  out << "MTFTCKPT 1\n";
  for (const auto& [k, v] : meta) out << "meta " << k << " " << v << "\n";
  out << "params " << params_.size() << "\n";
  for (const auto& p : params_) {
    out << "param " << p->name << " " << p->value.rank();
    for (std::size_t d : p->value.shape()) out << " " << d;
    out << "\n";
  }
  out << "payload\n";
  for (const auto& p : params_)
    for (std::size_t i = 0; i < p->value.size(); ++i)
      write_f64_le(out, p->value[i]);
  if (!out) fail(path + ": write failed");
}

std::map<std::string, std::string> ParameterStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path + ": cannot open");
  std::map<std::string, std::string> meta;
  std::vector<CkptEntry> entries;
  read_header(in, path, meta, entries);
  if (entries.size() != params_.size())
    fail(path + ": checkpoint has " + std::to_string(entries.size()) +
         " parameters, model has " + std::to_string(params_.size()));
  for (const CkptEntry& e : entries) {
    auto it = by_name_.find(e.name);
    if (it == by_name_.end())
      fail(path + ": checkpoint parameter " + e.name + " not in model");
    Parameter& p = *it->second;
    if (p.value.shape() != e.shape)
      fail(path + ": parameter " + e.name + " has shape " +
           Tensor(e.shape).shape_str() + ", model expects " +
           p.value.shape_str());
    for (std::size_t i = 0; i < p.value.size(); ++i)
      p.value[i] = read_f64_le(in);
    if (!in) fail(path + ": truncated payload at parameter " + e.name);
  }
  return meta;
}

std::map<std::string, std::string> ParameterStore::read_meta(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path + ": cannot open");
  std::map<std::string, std::string> meta;
  std::vector<CkptEntry> entries;
  read_header(in, path, meta, entries);
  return meta;
}

Affine Affine::create(ParameterStore& ps, const std::string& name,
                      std::size_t in, std::size_t out) {
  Affine a;
  a.w = &ps.create(name + ".w", {in, out}, in);
  // Uniform bias too: an exact-zero bias parks zero-filled missing steps
  // right on the ReLU kink, where one-sided slopes break gradient checks.
  a.b = &ps.create(name + ".b", {out}, in);
  return a;
}

Var Affine::apply(const Var& x) const {
  return add_rowwise(matmul(x, param_leaf(*w)), param_leaf(*b));
}

LayerNormP LayerNormP::create(ParameterStore& ps, const std::string& name,
                              std::size_t dim) {
  LayerNormP n;
  n.gain = &ps.create_filled(name + ".gain", {dim}, 1.0);
  n.bias = &ps.create_filled(name + ".bias", {dim}, 0.0);
  return n;
}

Var LayerNormP::apply(const Var& x) const {
  return layer_norm(x, param_leaf(*gain), param_leaf(*bias));
}

Mlp Mlp::create(ParameterStore& ps, const std::string& name, std::size_t in,
                std::size_t hidden, std::size_t out) {
  Mlp m;
  m.first = Affine::create(ps, name + ".in", in, hidden);
  m.second = Affine::create(ps, name + ".out", hidden, out);
  return m;
}

Var Mlp::apply(const Var& x) const {
  return second.apply(relu(first.apply(x)));
}

}  // namespace mtft
