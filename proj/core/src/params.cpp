#include "diffgmm/grad/params.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "diffgmm/errors.hpp"

namespace diffgmm::grad {

std::size_t ParamStore::add(std::string name, std::vector<std::size_t> dims) {
  if (find(name)) throw_contract("duplicate parameter name: " + name);
  const std::size_t count =
      std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  params_.push_back(Parameter{std::move(name), std::move(dims), std::vector<double>(count, 0.0)});
  return params_.size() - 1;
}

std::size_t ParamStore::add_uniform(std::string name, std::vector<std::size_t> dims,
                                    std::size_t fan_in, std::mt19937_64& rng) {
  const std::size_t idx = add(std::move(name), std::move(dims));
  const double bound = std::sqrt(1.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : params_[idx].values) v = dist(rng);
  return idx;
}

std::size_t ParamStore::total_values() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

std::optional<std::size_t> ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ParamStore::index_of(const std::string& name) const {
  auto idx = find(name);
  if (!idx) throw_contract("unknown parameter: " + name);
  return *idx;
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = other.params_[i];
    if (a.name != b.name || a.dims != b.dims || a.values != b.values) return false;
  }
  return true;
}

Gradients Gradients::zeros_like(const ParamStore& params) {
  Gradients g;
  g.per_param.reserve(params.size());
  for (const auto& p : params.all()) g.per_param.emplace_back(p.size(), 0.0);
  return g;
}

void Gradients::accumulate(const Gradients& other) {
  if (other.per_param.size() != per_param.size()) throw_shape("gradient sets differ in size");
  for (std::size_t i = 0; i < per_param.size(); ++i) {
    auto& dst = per_param[i];
    const auto& src = other.per_param[i];
    if (dst.size() != src.size()) throw_shape("gradient arrays differ in size");
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

void Gradients::scale(double factor) {
  for (auto& g : per_param) {
    for (double& v : g) v *= factor;
  }
}

bool Gradients::all_finite() const noexcept {
  for (const auto& g : per_param) {
    for (double v : g) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

double Gradients::squared_norm() const noexcept {
  double s = 0.0;
  for (const auto& g : per_param) {
    for (double v : g) s += v * v;
  }
  return s;
}

}  // namespace diffgmm::grad
