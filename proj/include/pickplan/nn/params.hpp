#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "pickplan/nn/tape.hpp"
#include "pickplan/rng.hpp"

namespace pickplan::nn {

// Named parameter arrays with deterministic iteration order (insertion
// order). The RNG seed used at initialization is kept for checkpoints.
class ParamStore {
 public:
  Mat& add(const std::string& name, int rows, int cols);
  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  std::uint64_t init_seed = 0;

 private:
  std::vector<std::string> names_;
  std::vector<Mat> values_;
  std::unordered_map<std::string, int> index_;
};

// Gradients keyed the same way as a ParamStore.
using GradMap = std::unordered_map<std::string, Mat>;

// Adam with bias correction; per-parameter first/second moment state.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies one update to every named gradient present in `grads`; parameters
  // are visited in the store's deterministic order.
  void step(ParamStore& params, const GradMap& grads);

  long t() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::unordered_map<std::string, Mat> m_, v_;
};

// Binds store parameters into a tape as leaves and collects their gradients
// after backward.
class Binding {
 public:
  Binding(Tape& tape, ParamStore& store) : tape_(&tape), store_(&store) {}

  // Bind (or re-fetch) a parameter as a tape leaf.
  Var operator()(const std::string& name, bool requires_grad = true);

  // Read gradients of every bound requires_grad leaf into `out`.
  void collect_grads(GradMap& out) const;

  Tape& tape() { return *tape_; }
  ParamStore& store() { return *store_; }

 private:
  Tape* tape_;
  ParamStore* store_;
  std::vector<std::pair<std::string, Var>> bound_;
  std::unordered_map<std::string, int> bound_index_;
};

// Uniform +-1/sqrt(fan_in) initialization.
void init_uniform(Mat& m, int fan_in, Rng& rng);

// Checkpoint format: {version, seed, hyperparams, params: {name: {shape,
// values}}}. Round-trips bit-exactly.
std::string checkpoint_to_json(const ParamStore& params, const std::string& hyperparams_json);
void checkpoint_from_json(const std::string& text, ParamStore& params,
                          std::string* hyperparams_json);
void save_checkpoint(const ParamStore& params, const std::string& hyperparams_json,
                     const std::string& path);
void load_checkpoint(const std::string& path, ParamStore& params,
                     std::string* hyperparams_json);

}  // namespace pickplan::nn
