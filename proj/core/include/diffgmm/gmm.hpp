#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace diffgmm::gmm {

inline constexpr double kVarianceFloor = 1e-6;
inline constexpr std::size_t kDefaultComponents = 5;

/// Univariate K-component Gaussian mixture.
struct GmmParams {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;

  std::size_t components() const noexcept { return weights.size(); }

  /// Throws ContractError unless weights sum to 1 (1e-9), lie in [0, 1], and
  /// every variance is at least the floor.
  void validate() const;

  bool operator==(const GmmParams&) const = default;
};

/// Unconstrained carrier; constrain() maps any finite values to valid params.
struct GmmRaw {
  std::vector<double> weight_logits;
  std::vector<double> means;
  std::vector<double> log_variances;
};

/// Softmax for the weights, exp + floor for the variances.
GmmParams constrain(const GmmRaw& raw);

double normal_pdf(double x, double mean, double variance);
double normal_log_pdf(double x, double mean, double variance);

/// p(x) = sum_k w_k N(x | mu_k, var_k)
double density(const GmmParams& params, double x);

/// sum_n ln p(x_n), with log-sum-exp per sample. Empty data is a contract error.
double log_likelihood(const GmmParams& params, std::span<const double> data);

/// Row-major [N, K] matrix.
struct Responsibilities {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t n, std::size_t k) const { return values[n * cols + k]; }
  double& operator()(std::size_t n, std::size_t k) { return values[n * cols + k]; }
};

/// r_nk = w_k N(x_n | mu_k, var_k) / p(x_n)
Responsibilities responsibilities(const GmmParams& params, std::span<const double> data);

struct ElboDecomposition {
  double lower_bound = 0.0;
  double kl = 0.0;
};

/// ln p(X) = L(q, theta) + KL(q || p(z | x, theta)), summed over samples with
/// one latent component per sample. Rows of q must be distributions.
ElboDecomposition elbo_decomposition(const GmmParams& params, std::span<const double> data,
                                     const Responsibilities& q);

struct EmOptions {
  std::size_t components = kDefaultComponents;
  std::uint64_t seed = 0;
  std::size_t max_iters = 200;
  double tol = 1e-8;
};

struct EmResult {
  GmmParams params;
  std::vector<double> log_likelihood_trace;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Expectation-maximization with k-means++ seeding. Throws DegenerateDataError
/// when the data has fewer distinct values than components.
EmResult em_fit(std::span<const double> data, const EmOptions& options);

/// k-means++ seeding; returns `k` distinct centers drawn from the data.
std::vector<double> kmeans_plus_plus(std::span<const double> data, std::size_t k, std::uint64_t seed);

/// i.i.d. draws; deterministic for a given seed.
std::vector<double> sample(const GmmParams& params, std::size_t n, std::uint64_t seed);

double mixture_mean(const GmmParams& params);
double mixture_variance(const GmmParams& params);

/// Matches components of `a` to `b` by the permutation minimizing total
/// absolute mean distance; returns perm with a[perm[i]] ~ b[i].
std::vector<std::size_t> best_permutation(const GmmParams& a, const GmmParams& b);

/// {"K": .., "weights": [..], "means": [..], "variances": [..]}
std::string to_json(const GmmParams& params, int indent = 2);
GmmParams from_json(const std::string& text);

}  // namespace diffgmm::gmm
