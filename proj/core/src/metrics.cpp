#include "diffgmm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "diffgmm/errors.hpp"

namespace diffgmm::metrics {
namespace {

void require_equal(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw_contract(std::string(what) + ": length mismatch");
}

Db ratio_db(double signal, double residual) {
  if (residual <= 0.0) return {kCapDb, true};
  const double v = 10.0 * std::log10(signal / residual);
  if (v >= kCapDb) return {kCapDb, true};
  return {std::max(v, -kCapDb), false};
}

}  // namespace

Db sdr(std::span<const double> reference, std::span<const double> estimate) {
  require_equal(reference, estimate, "sdr");
  double ref = 0.0;
  double err = 0.0;
  for (std::size_t n = 0; n < reference.size(); ++n) {
    ref += reference[n] * reference[n];
    const double d = reference[n] - estimate[n];
    err += d * d;
  }
  if (ref <= 0.0) throw_contract("sdr: reference has zero energy");
  return ratio_db(ref, err);
}

Db si_snr(std::span<const double> reference, std::span<const double> estimate) {
  require_equal(reference, estimate, "si_snr");
  if (reference.empty()) throw_contract("si_snr: empty input");
  const auto N = static_cast<double>(reference.size());
  double mr = 0.0;
  double me = 0.0;
  for (std::size_t n = 0; n < reference.size(); ++n) {
    mr += reference[n];
    me += estimate[n];
  }
  mr /= N;
  me /= N;
  double dot = 0.0;
  double rr = 0.0;
  double ee = 0.0;
  for (std::size_t n = 0; n < reference.size(); ++n) {
    const double r = reference[n] - mr;
    const double e = estimate[n] - me;
    dot += r * e;
    rr += r * r;
    ee += e * e;
  }
  if (rr <= 0.0) throw_contract("si_snr: reference has zero energy after mean removal");
  if (ee <= 0.0) throw_contract("si_snr: estimate has zero energy after mean removal");
  const double alpha = dot / rr;
  double target = 0.0;
  double resid = 0.0;
  for (std::size_t n = 0; n < reference.size(); ++n) {
    const double s = alpha * (reference[n] - mr);
    const double e = (estimate[n] - me) - s;
    target += s * s;
    resid += e * e;
  }
  if (target <= 0.0) return {-kCapDb, false};
  return ratio_db(target, resid);
}

double seg_snr(std::span<const double> reference, std::span<const double> estimate, std::size_t frame) {
  require_equal(reference, estimate, "seg_snr");
  if (frame == 0) throw_contract("seg_snr: frame must be positive");
  if (reference.size() < frame) throw_contract("seg_snr: input shorter than one frame");
  const std::size_t frames = reference.size() / frame;
  double acc = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    double ref = 0.0;
    double err = 0.0;
    for (std::size_t n = f * frame; n < (f + 1) * frame; ++n) {
      ref += reference[n] * reference[n];
      const double d = reference[n] - estimate[n];
      err += d * d;
    }
    double v;
    if (err <= 0.0) {
      v = kSegSnrMaxDb;
    } else if (ref <= 0.0) {
      v = kSegSnrMinDb;
    } else {
      v = std::clamp(10.0 * std::log10(ref / err), kSegSnrMinDb, kSegSnrMaxDb);
    }
    acc += v;
  }
  return acc / static_cast<double>(frames);
}

MetricResult evaluate(std::span<const double> reference, std::span<const double> estimate) {
  MetricResult m;
  const Db s = sdr(reference, estimate);
  const Db si = si_snr(reference, estimate);
  m.sdr_db = s.value;
  m.si_snr_db = si.value;
  m.capped = s.capped || si.capped;
  const std::size_t frame = std::min(kDefaultSegFrame, reference.size());
  m.seg_snr_db = seg_snr(reference, estimate, frame);
  return m;
}

MetricResult evaluate(const AudioClip& reference, const AudioClip& estimate) {
  return evaluate(std::span<const double>(reference.samples), std::span<const double>(estimate.samples));
}

}  // namespace diffgmm::metrics
