#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "diffgmm/errors.hpp"
#include "diffgmm/gmm.hpp"

namespace diffgmm::gmm {
namespace {

std::size_t count_distinct(std::span<const double> data, std::size_t cap) {
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < sorted.size() && distinct < cap; ++i) {
    if (i == 0 || sorted[i] != sorted[i - 1]) ++distinct;
  }
  return distinct;
}

GmmParams initial_params(std::span<const double> data, const std::vector<double>& centers) {
  const std::size_t K = centers.size();
  std::vector<double> count(K, 0.0);
  std::vector<double> sum_sq(K, 0.0);
  for (double x : data) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      const double d = std::abs(x - centers[k]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    count[best] += 1.0;
    sum_sq[best] += (x - centers[best]) * (x - centers[best]);
  }
  GmmParams p;
  const auto N = static_cast<double>(data.size());
  for (std::size_t k = 0; k < K; ++k) {
    p.weights.push_back(count[k] / N);
    p.means.push_back(centers[k]);
    p.variances.push_back(std::max(count[k] > 0 ? sum_sq[k] / count[k] : 0.0, kVarianceFloor));
  }
  return p;
}

}  // namespace

std::vector<double> kmeans_plus_plus(std::span<const double> data, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw_contract("kmeans++: k must be positive");
  if (count_distinct(data, k) < k) {
    throw DegenerateDataError("kmeans++: fewer distinct values than requested centers");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> first(0, data.size() - 1);
  std::vector<double> centers{data[first(rng)]};
  std::vector<double> d2(data.size());
  for (std::size_t n = 0; n < data.size(); ++n) {
    const double d = data[n] - centers[0];
    d2[n] = d * d;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centers.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    double target = unit(rng) * total;
    std::size_t pick = data.size() - 1;
    for (std::size_t n = 0; n < data.size(); ++n) {
      target -= d2[n];
      if (target < 0.0 && d2[n] > 0.0) {
        pick = n;
        break;
      }
    }
    // Rounding can leave `pick` on an existing center; walk back to a fresh one.
    while (d2[pick] == 0.0 && pick > 0) --pick;
    if (d2[pick] == 0.0) {
      pick = static_cast<std::size_t>(std::max_element(d2.begin(), d2.end()) - d2.begin());
    }
    centers.push_back(data[pick]);
    for (std::size_t n = 0; n < data.size(); ++n) {
      const double d = data[n] - centers.back();
      d2[n] = std::min(d2[n], d * d);
    }
  }
  return centers;
}

EmResult em_fit(std::span<const double> data, const EmOptions& options) {
  const std::size_t K = options.components;
  if (K == 0) throw_contract("em_fit: K must be positive");
  if (data.empty()) throw DegenerateDataError("em_fit: empty data");
  for (double x : data) {
    if (!std::isfinite(x)) throw_contract("em_fit: data must be finite");
  }

  EmResult result;
  result.params = initial_params(data, kmeans_plus_plus(data, K, options.seed));
  double ll = log_likelihood(result.params, data);
  result.log_likelihood_trace.push_back(ll);

  const auto N = static_cast<double>(data.size());
  std::vector<double> nk(K);
  std::vector<double> sx(K);
  std::vector<double> sxx(K);
  std::vector<double> joint(K);
  std::vector<double> resp(data.size() * K);

  for (std::size_t it = 0; it < options.max_iters; ++it) {
    const GmmParams& p = result.params;
    std::vector<double> log_w(K);
    for (std::size_t k = 0; k < K; ++k) {
      log_w[k] = p.weights[k] > 0.0 ? std::log(p.weights[k]) : -std::numeric_limits<double>::infinity();
    }

    // E-step. Fixed-order accumulation keeps results deterministic.
    std::fill(nk.begin(), nk.end(), 0.0);
    std::fill(sx.begin(), sx.end(), 0.0);
    for (std::size_t n = 0; n < data.size(); ++n) {
      const double x = data[n];
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < K; ++k) {
        joint[k] = log_w[k] + normal_log_pdf(x, p.means[k], p.variances[k]);
        mx = std::max(mx, joint[k]);
      }
      double z = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        joint[k] = std::exp(joint[k] - mx);
        z += joint[k];
      }
      double* r = resp.data() + n * K;
      for (std::size_t k = 0; k < K; ++k) {
        r[k] = joint[k] / z;
        nk[k] += r[k];
        sx[k] += r[k] * x;
      }
    }

    // M-step: means, then variances about the new means.
    GmmParams next = p;
    for (std::size_t k = 0; k < K; ++k) {
      next.weights[k] = nk[k] / N;
      if (nk[k] > 0.0) next.means[k] = sx[k] / nk[k];
    }
    std::fill(sxx.begin(), sxx.end(), 0.0);
    for (std::size_t n = 0; n < data.size(); ++n) {
      const double* r = resp.data() + n * K;
      for (std::size_t k = 0; k < K; ++k) {
        const double d = data[n] - next.means[k];
        sxx[k] += r[k] * d * d;
      }
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (nk[k] > 0.0) next.variances[k] = std::max(sxx[k] / nk[k], kVarianceFloor);
    }
    // Renormalize against rounding drift in the weight sum.
    double wsum = 0.0;
    for (double w : next.weights) wsum += w;
    for (double& w : next.weights) w /= wsum;

    result.params = std::move(next);
    const double ll_new = log_likelihood(result.params, data);
    result.log_likelihood_trace.push_back(ll_new);
    result.iterations = it + 1;
    const double improvement = ll_new - ll;
    ll = ll_new;
    if (improvement <= options.tol * std::abs(ll)) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace diffgmm::gmm
