#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mtft/autodiff.hpp"
#include "mtft/tensor.hpp"

namespace mtft {

/// Trainable tensor plus its gradient and Adam state. Owned by a
/// ParameterStore; `index` is the position in creation order.
struct Parameter {
  std::string name;
  std::size_t index = 0;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  std::int64_t adam_step = 0;
};

/// Owns all parameters of a model. Each parameter gets its own init stream
/// seeded from (store seed, name hash), so adding or reordering parameters
/// never shifts another parameter's initial values.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed) : seed_(seed) {}

  /// Uniform init on [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  Parameter& create(const std::string& name, std::vector<std::size_t> shape,
                    std::size_t fan_in);
  Parameter& create_filled(const std::string& name,
                           std::vector<std::size_t> shape, double fill);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t total_values() const;
  std::uint64_t seed() const { return seed_; }

  void zero_grad();

  /// Writes a checkpoint: text header (version, meta key/value lines, one
  /// line per parameter with name and shape) followed by the raw values as
  /// little-endian float64 in header order.
  void save(const std::string& path,
            const std::map<std::string, std::string>& meta) const;

  /// Loads values from a checkpoint into this store. Every parameter in the
  /// file must exist here with the same shape and vice versa. Returns the
  /// meta map.
  std::map<std::string, std::string> load(const std::string& path);

  /// Reads only the meta map of a checkpoint (to reconstruct a model config
  /// before building the store).
  static std::map<std::string, std::string> read_meta(const std::string& path);

 private:
  std::uint64_t seed_;
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter*> by_name_;
};

/// y = x W + b with W [in,out], b [out].
struct Affine {
  Parameter* w = nullptr;
  Parameter* b = nullptr;

  static Affine create(ParameterStore& ps, const std::string& name,
                       std::size_t in, std::size_t out);
  Var apply(const Var& x) const;
};

struct LayerNormP {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;

  static LayerNormP create(ParameterStore& ps, const std::string& name,
                           std::size_t dim);
  Var apply(const Var& x) const;
};

/// Two affine layers with a ReLU in between.
struct Mlp {
  Affine first;
  Affine second;

  static Mlp create(ParameterStore& ps, const std::string& name,
                    std::size_t in, std::size_t hidden, std::size_t out);
  Var apply(const Var& x) const;
};

}  // namespace mtft
