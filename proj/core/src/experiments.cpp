#include <chrono>
#include <ctime>
#include <iomanip>
#include <sstream>

#include "diffgmm/denoiser.hpp"
#include "diffgmm/errors.hpp"
#include "diffgmm/harness.hpp"
#include "diffgmm/train.hpp"
#include "json.hpp"

namespace diffgmm::harness {
namespace {

metrics::MetricResult mean_of(const std::vector<ClipResult>& clips, bool after) {
  metrics::MetricResult m;
  if (clips.empty()) return m;
  for (const auto& c : clips) {
    const auto& r = after ? c.after : c.before;
    m.sdr_db += r.sdr_db;
    m.si_snr_db += r.si_snr_db;
    m.seg_snr_db += r.seg_snr_db;
    m.capped = m.capped || r.capped;
  }
  const double n = static_cast<double>(clips.size());
  m.sdr_db /= n;
  m.si_snr_db /= n;
  m.seg_snr_db /= n;
  return m;
}

nlohmann::json metric_json(const metrics::MetricResult& m) {
  return {{"sdr_db", m.sdr_db}, {"si_snr_db", m.si_snr_db}, {"seg_snr_db", m.seg_snr_db}, {"capped", m.capped}};
}

std::string now_iso8601() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string ExperimentRecord::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "clip,sdr_before_db,sdr_after_db,si_snr_before_db,si_snr_after_db,seg_snr_before_db,seg_snr_after_db\n";
  auto row = [&](const std::string& id, const metrics::MetricResult& b, const metrics::MetricResult& a) {
    os << id << ',' << b.sdr_db << ',' << a.sdr_db << ',' << b.si_snr_db << ',' << a.si_snr_db << ','
       << b.seg_snr_db << ',' << a.seg_snr_db << '\n';
  };
  for (const auto& c : clips) row(c.id, c.before, c.after);
  row("mean", mean_before, mean_after);
  return os.str();
}

std::string ExperimentRecord::to_json(bool timestamp, int indent) const {
  nlohmann::json j;
  j["label"] = label;
  j["config"] = config_snapshot;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : clips) rows.push_back({{"id", c.id}, {"before", metric_json(c.before)}, {"after", metric_json(c.after)}});
  j["clips"] = std::move(rows);
  j["mean_before"] = metric_json(mean_before);
  j["mean_after"] = metric_json(mean_after);
  if (timestamp) {
    j["wall_seconds"] = wall_seconds;
    j["timestamp"] = now_iso8601();
  }
  return j.dump(indent);
}

ExperimentRecord evaluate(const model::Model& model, std::span<const NoisyPair> pairs,
                          const DenoiseSettings& settings, std::span<const std::string> ids,
                          const std::string& label) {
  if (!ids.empty() && ids.size() != pairs.size()) throw_contract("evaluate: ids and pairs differ in count");
  const auto start = std::chrono::steady_clock::now();
  const denoise::ReverseSchedule schedule = denoise::ReverseSchedule::uniform(settings.steps);

  ExperimentRecord rec;
  rec.label = label;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const NoisyPair& p = pairs[i];
    denoise::DenoiseOptions opts;
    opts.freeze_estimate = settings.freeze;
    opts.reference = &p.clean;
    const denoise::DenoiseResult r = denoise::denoise(model, p.noisy, schedule, opts);
    ClipResult c;
    c.id = ids.empty() ? "clip_" + std::to_string(i) : ids[i];
    c.before = metrics::evaluate(p.clean, p.noisy);
    c.after = metrics::evaluate(p.clean, r.denoised);
    rec.clips.push_back(std::move(c));
  }
  rec.mean_before = mean_of(rec.clips, false);
  rec.mean_after = mean_of(rec.clips, true);
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

ExperimentRecord train_and_evaluate(const Suite& suite, const RunConfig& config, const std::string& label,
                                    model::Model* trained_out) {
  const auto start = std::chrono::steady_clock::now();
  model::Model m(config.unet, config.mode, config.train.seed);
  if (config.mode != model::AblationMode::gmm_only) model::train(m, suite.train, config.train);
  ExperimentRecord rec = evaluate(m, suite.test, config.denoise, {}, label);
  rec.config_snapshot = config.to_text();
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (trained_out != nullptr) *trained_out = std::move(m);
  return rec;
}

std::vector<SweepRow> sweep_k(std::span<const std::size_t> ks, const RunConfig& config) {
  if (ks.empty()) throw_contract("sweep_k: no K values");
  const Suite suite = make_suite(config.suite);
  std::vector<SweepRow> rows;
  for (std::size_t k : ks) {
    RunConfig c = config;
    c.unet.components = k;
    c.mode = model::AblationMode::full;
    const ExperimentRecord rec = train_and_evaluate(suite, c, "K=" + std::to_string(k));
    rows.push_back({k, rec.mean_after.sdr_db, rec.mean_after.si_snr_db});
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "K,mean_sdr_db,mean_si_snr_db\n";
  for (const auto& r : rows) os << r.components << ',' << r.mean_sdr_db << ',' << r.mean_si_snr_db << '\n';
  return os.str();
}

std::size_t best_k(std::span<const SweepRow> rows) {
  if (rows.empty()) throw_contract("best_k: empty sweep");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].mean_sdr_db > rows[best].mean_sdr_db) best = i;
  }
  return rows[best].components;
}

std::vector<AblationRow> run_ablation(const RunConfig& config) {
  const Suite suite = make_suite(config.suite);
  std::vector<AblationRow> rows;
  for (auto mode : {model::AblationMode::gmm_only, model::AblationMode::diffusion_only, model::AblationMode::full}) {
    RunConfig c = config;
    c.mode = mode;
    if (mode != model::AblationMode::full && c.train.loss == model::LossKind::l2_plus_nll) {
      c.train.loss = model::LossKind::l2;
    }
    const ExperimentRecord rec = train_and_evaluate(suite, c, model::to_string(mode));
    rows.push_back({mode, rec.mean_after.sdr_db, rec.mean_after.si_snr_db});
  }
  return rows;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "mode,mean_sdr_db,mean_si_snr_db\n";
  for (const auto& r : rows) os << model::to_string(r.mode) << ',' << r.mean_sdr_db << ',' << r.mean_si_snr_db << '\n';
  return os.str();
}

}  // namespace diffgmm::harness
