#include "diffgmm/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "diffgmm/errors.hpp"
#include "json.hpp"

namespace diffgmm::gmm {
namespace {

double log_sum_exp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double z = 0.0;
  for (double x : v) z += std::exp(x - mx);
  return mx + std::log(z);
}

double safe_log(double x) {
  return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
}

// ln(w_k N(x | mu_k, var_k)) for every component.
void joint_log(const GmmParams& p, double x, std::vector<double>& out) {
  out.resize(p.components());
  for (std::size_t k = 0; k < p.components(); ++k) {
    out[k] = safe_log(p.weights[k]) + normal_log_pdf(x, p.means[k], p.variances[k]);
  }
}

}  // namespace

void GmmParams::validate() const {
  const std::size_t K = weights.size();
  if (K == 0) throw_contract("GMM must have at least one component");
  if (means.size() != K || variances.size() != K) {
    throw_contract("GMM weights, means and variances must have equal length");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    if (!(weights[k] >= 0.0 && weights[k] <= 1.0)) throw_contract("GMM weight outside [0, 1]");
    if (!std::isfinite(means[k])) throw_contract("GMM mean is not finite");
    if (!(variances[k] >= kVarianceFloor) || !std::isfinite(variances[k])) {
      throw_contract("GMM variance below floor or not finite");
    }
    total += weights[k];
  }
  if (std::abs(total - 1.0) > 1e-9) throw_contract("GMM weights do not sum to 1");
}

GmmParams constrain(const GmmRaw& raw) {
  const std::size_t K = raw.weight_logits.size();
  if (K == 0 || raw.means.size() != K || raw.log_variances.size() != K) {
    throw_contract("GmmRaw arrays must be non-empty and of equal length");
  }
  GmmParams p;
  p.weights.resize(K);
  const double mx = *std::max_element(raw.weight_logits.begin(), raw.weight_logits.end());
  double z = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    p.weights[k] = std::exp(raw.weight_logits[k] - mx);
    z += p.weights[k];
  }
  for (double& w : p.weights) w /= z;
  p.means = raw.means;
  p.variances.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    // Clamp before exp so huge log-variances stay finite.
    p.variances[k] = std::exp(std::min(raw.log_variances[k], 700.0)) + kVarianceFloor;
  }
  return p;
}

double normal_log_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - 0.5 * d * d / variance;
}

double normal_pdf(double x, double mean, double variance) {
  return std::exp(normal_log_pdf(x, mean, variance));
}

double density(const GmmParams& params, double x) {
  double p = 0.0;
  for (std::size_t k = 0; k < params.components(); ++k) {
    p += params.weights[k] * normal_pdf(x, params.means[k], params.variances[k]);
  }
  return p;
}

double log_likelihood(const GmmParams& params, std::span<const double> data) {
  if (data.empty()) throw_contract("log_likelihood of empty data");
  std::vector<double> l;
  double total = 0.0;
  for (double x : data) {
    joint_log(params, x, l);
    total += log_sum_exp(l);
  }
  return total;
}

Responsibilities responsibilities(const GmmParams& params, std::span<const double> data) {
  const std::size_t K = params.components();
  Responsibilities r{data.size(), K, std::vector<double>(data.size() * K)};
  std::vector<double> l;
  for (std::size_t n = 0; n < data.size(); ++n) {
    joint_log(params, data[n], l);
    const double lp = log_sum_exp(l);
    double row = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      r(n, k) = std::exp(l[k] - lp);
      row += r(n, k);
    }
    for (std::size_t k = 0; k < K; ++k) r(n, k) /= row;
  }
  return r;
}

ElboDecomposition elbo_decomposition(const GmmParams& params, std::span<const double> data,
                                     const Responsibilities& q) {
  const std::size_t K = params.components();
  if (q.rows != data.size() || q.cols != K || q.values.size() != data.size() * K) {
    throw_contract("responsibility matrix must be N x K");
  }
  ElboDecomposition out;
  std::vector<double> l;
  for (std::size_t n = 0; n < data.size(); ++n) {
    double row = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      if (!(q(n, k) >= 0.0)) throw_contract("responsibility entries must be non-negative");
      row += q(n, k);
    }
    if (std::abs(row - 1.0) > 1e-9) throw_contract("responsibility rows must sum to 1");

    joint_log(params, data[n], l);
    const double lp = log_sum_exp(l);
    for (std::size_t k = 0; k < K; ++k) {
      const double qk = q(n, k);
      if (qk == 0.0) continue;
      const double lq = std::log(qk);
      out.lower_bound += qk * (l[k] - lq);
      out.kl -= qk * ((l[k] - lp) - lq);
    }
  }
  return out;
}

std::vector<double> sample(const GmmParams& params, std::size_t n, std::uint64_t seed) {
  params.validate();
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(params.weights.begin(), params.weights.end());
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& x : out) {
    const std::size_t k = pick(rng);
    x = params.means[k] + std::sqrt(params.variances[k]) * unit(rng);
  }
  return out;
}

double mixture_mean(const GmmParams& params) {
  double m = 0.0;
  for (std::size_t k = 0; k < params.components(); ++k) m += params.weights[k] * params.means[k];
  return m;
}

double mixture_variance(const GmmParams& params) {
  double second = 0.0;
  for (std::size_t k = 0; k < params.components(); ++k) {
    second += params.weights[k] * (params.variances[k] + params.means[k] * params.means[k]);
  }
  const double m = mixture_mean(params);
  return second - m * m;
}

std::vector<std::size_t> best_permutation(const GmmParams& a, const GmmParams& b) {
  const std::size_t K = a.components();
  if (b.components() != K) throw_contract("best_permutation: component counts differ");
  std::vector<std::size_t> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  if (K > 8) {
    // Greedy nearest-mean matching for large K.
    std::vector<bool> used(K, false);
    for (std::size_t i = 0; i < K; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < K; ++j) {
        const double d = std::abs(a.means[j] - b.means[i]);
        if (!used[j] && d < best) {
          best = d;
          perm[i] = j;
        }
      }
      used[perm[i]] = true;
    }
    return perm;
  }
  std::vector<std::size_t> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < K; ++i) cost += std::abs(a.means[perm[i]] - b.means[i]);
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::string to_json(const GmmParams& params, int indent) {
  nlohmann::json j;
  j["K"] = params.components();
  j["weights"] = params.weights;
  j["means"] = params.means;
  j["variances"] = params.variances;
  return j.dump(indent);
}

GmmParams from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("GMM JSON: ") + e.what());
  }
  GmmParams p;
  try {
    p.weights = j.at("weights").get<std::vector<double>>();
    p.means = j.at("means").get<std::vector<double>>();
    p.variances = j.at("variances").get<std::vector<double>>();
    if (j.contains("K") && j["K"].get<std::size_t>() != p.weights.size()) {
      throw FormatError("GMM JSON: K disagrees with array lengths");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("GMM JSON: ") + e.what());
  }
  p.validate();
  return p;
}

}  // namespace diffgmm::gmm
