#include "pickplan/nn/params.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "pickplan/errors.hpp"
#include "pickplan/io.hpp"

namespace pickplan::nn {

using ordered_json = nlohmann::ordered_json;

Mat& ParamStore::add(const std::string& name, int rows, int cols) {
  if (has(name)) throw Error("ParamStore::add: duplicate name " + name);
  if (rows < 1 || cols < 1) throw ShapeMismatch("ParamStore::add: bad shape for " + name);
  index_[name] = static_cast<int>(names_.size());
  names_.push_back(name);
  values_.push_back(Mat::Zero(rows, cols));
  return values_.back();
}

Mat& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("ParamStore::at: unknown parameter " + name);
  return values_[static_cast<std::size_t>(it->second)];
}

const Mat& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("ParamStore::at: unknown parameter " + name);
  return values_[static_cast<std::size_t>(it->second)];
}

void AdamOptimizer::step(ParamStore& params, const GradMap& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& name : params.names()) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    Mat& p = params.at(name);
    const Mat& g = git->second;
    if (g.rows() != p.rows() || g.cols() != p.cols())
      throw ShapeMismatch("AdamOptimizer::step: gradient shape mismatch for " + name);
    Mat& m = m_[name];
    Mat& v = v_[name];
    if (m.size() == 0) m = Mat::Zero(p.rows(), p.cols());
    if (v.size() == 0) v = Mat::Zero(p.rows(), p.cols());
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = (beta2_ * v.array() + (1.0 - beta2_) * g.array().square()).matrix();
    const Mat mhat = m / bc1;
    const Mat vhat = v / bc2;
    p -= (lr_ * mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
  }
}

Var Binding::operator()(const std::string& name, bool requires_grad) {
  auto it = bound_index_.find(name);
  if (it != bound_index_.end()) return bound_[static_cast<std::size_t>(it->second)].second;
  Var v = tape_->leaf(store_->at(name), requires_grad);
  bound_index_[name] = static_cast<int>(bound_.size());
  bound_.emplace_back(name, v);
  return v;
}

void Binding::collect_grads(GradMap& out) const {
  for (const auto& [name, var] : bound_) {
    if (!tape_->requires_grad(var)) continue;
    const Mat& g = tape_->grad(var);
    if (g.size() == 0)
      out[name] = Mat::Zero(var.val().rows(), var.val().cols());
    else
      out[name] = g;
  }
}

void init_uniform(Mat& m, int fan_in, Rng& rng) {
  if (fan_in < 1) throw Error("init_uniform: fan_in must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-bound, bound);
}

std::string checkpoint_to_json(const ParamStore& params, const std::string& hyperparams_json) {
  ordered_json j;
  j["version"] = 1;
  j["seed"] = params.init_seed;
  if (hyperparams_json.empty()) {
    j["hyperparams"] = ordered_json::object();
  } else {
    try {
      j["hyperparams"] = ordered_json::parse(hyperparams_json);
    } catch (const ordered_json::exception& e) {
      throw IoError(std::string("checkpoint hyperparams not valid JSON: ") + e.what());
    }
  }
  ordered_json p = ordered_json::object();
  for (const auto& name : params.names()) {
    const Mat& m = params.at(name);
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    p[name] = {{"shape", {m.rows(), m.cols()}}, {"values", std::move(flat)}};
  }
  j["params"] = std::move(p);
  return j.dump(2) + "\n";
}

void checkpoint_from_json(const std::string& text, ParamStore& params,
                          std::string* hyperparams_json) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    throw IoError(std::string("checkpoint parse error: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != 1) throw IoError("checkpoint: unsupported version");
    params.init_seed = j.at("seed").get<std::uint64_t>();
    if (hyperparams_json != nullptr) *hyperparams_json = j.at("hyperparams").dump();
    for (const auto& [name, entry] : j.at("params").items()) {
      const auto shape = entry.at("shape").get<std::vector<long>>();
      if (shape.size() != 2) throw IoError("checkpoint: bad shape for " + name);
      const long rows = shape[0], cols = shape[1];
      const auto flat = entry.at("values").get<std::vector<double>>();
      if (static_cast<long>(flat.size()) != rows * cols)
        throw IoError("checkpoint: value count mismatch for " + name);
      Mat& m = params.has(name) ? params.at(name)
                                : params.add(name, static_cast<int>(rows), static_cast<int>(cols));
      if (m.rows() != rows || m.cols() != cols)
        throw IoError("checkpoint: shape mismatch for existing parameter " + name);
      std::size_t k = 0;
      for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cols; ++c) m(r, c) = flat[k++];
    }
  } catch (const ordered_json::exception& e) {
    throw IoError(std::string("checkpoint field error: ") + e.what());
  }
}

void save_checkpoint(const ParamStore& params, const std::string& hyperparams_json,
                     const std::string& path) {
  write_file(path, checkpoint_to_json(params, hyperparams_json));
}

void load_checkpoint(const std::string& path, ParamStore& params,
                     std::string* hyperparams_json) {
  checkpoint_from_json(read_file(path), params, hyperparams_json);
}

}  // namespace pickplan::nn
