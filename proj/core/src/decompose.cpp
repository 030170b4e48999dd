#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "diffgmm/denoiser.hpp"
#include "diffgmm/errors.hpp"
#include "json.hpp"

namespace diffgmm::denoise {

double trapezoid(std::span<const double> grid, std::span<const double> values) {
  if (grid.size() != values.size()) throw_shape("trapezoid: grid and values differ in length");
  if (grid.size() < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
  }
  return acc;
}

DecompositionReport decompose_report(const gmm::GmmParams& mixture, std::span<const double> estimated_noise,
                                     std::span<const double> true_noise, const DecomposeOptions& options) {
  mixture.validate();
  if (!true_noise.empty() && !estimated_noise.empty() && true_noise.size() != estimated_noise.size()) {
    throw_shape("decompose_report: overlay signals differ in length");
  }
  const std::size_t K = mixture.components();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double min_sigma = lo;
  for (std::size_t k = 0; k < K; ++k) {
    const double s = std::sqrt(mixture.variances[k]);
    lo = std::min(lo, mixture.means[k] - 6.0 * s);
    hi = std::max(hi, mixture.means[k] + 6.0 * s);
    min_sigma = std::min(min_sigma, s);
  }
  const double span = hi - lo;
  std::size_t points = static_cast<std::size_t>(std::ceil(span / (min_sigma / options.points_per_sigma))) + 1;
  points = std::clamp(points, options.min_points, options.max_points);

  DecompositionReport rep;
  rep.grid.resize(points);
  const double step = span / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) rep.grid[i] = lo + step * static_cast<double>(i);
  rep.grid.back() = hi;

  for (std::size_t k = 0; k < K; ++k) {
    ComponentCurve c;
    c.component = k + 1;
    c.weight = mixture.weights[k];
    c.mean = mixture.means[k];
    c.variance = mixture.variances[k];
    c.density.resize(points);
    for (std::size_t i = 0; i < points; ++i) {
      c.density[i] = c.weight * gmm::normal_pdf(rep.grid[i], c.mean, c.variance);
    }
    rep.curves.push_back(std::move(c));
  }
  rep.estimated_noise.assign(estimated_noise.begin(), estimated_noise.end());
  rep.true_noise.assign(true_noise.begin(), true_noise.end());
  return rep;
}

std::string DecompositionReport::curves_csv() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "amplitude";
  for (const auto& c : curves) os << ",density_" << c.component;
  os << '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    os << grid[i];
    for (const auto& c : curves) os << ',' << c.density[i];
    os << '\n';
  }
  return os.str();
}

std::string DecompositionReport::to_json(int indent) const {
  nlohmann::json j;
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : curves) {
    comps.push_back({{"component", c.component},
                     {"weight", c.weight},
                     {"mean", c.mean},
                     {"variance", c.variance},
                     {"mass", trapezoid(grid, c.density)}});
  }
  j["K"] = curves.size();
  j["components"] = std::move(comps);
  j["grid"] = {{"min", grid.empty() ? 0.0 : grid.front()},
               {"max", grid.empty() ? 0.0 : grid.back()},
               {"points", grid.size()}};
  if (!estimated_noise.empty()) j["overlay"]["estimated_noise"] = estimated_noise;
  if (!true_noise.empty()) j["overlay"]["true_noise"] = true_noise;
  return j.dump(indent);
}

}  // namespace diffgmm::denoise
