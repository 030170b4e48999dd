#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "diffgmm/audio_io.hpp"
#include "diffgmm/config.hpp"
#include "diffgmm/denoiser.hpp"
#include "diffgmm/errors.hpp"
#include "diffgmm/gmm.hpp"
#include "diffgmm/harness.hpp"
#include "diffgmm/model.hpp"
#include "diffgmm/train.hpp"

using namespace diffgmm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
}

json parse_json_file(const fs::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

gmm::GmmParams gmm_from(const json& j) { return gmm::from_json(j.dump()); }

// suite spec: any subset of the SuiteConfig fields
SuiteConfig suite_from_json(const json& j, SuiteConfig s) {
  try {
    if (j.contains("train_clips")) s.train_clips = j.at("train_clips").get<std::size_t>();
    if (j.contains("test_clips")) s.test_clips = j.at("test_clips").get<std::size_t>();
    if (j.contains("duration_s")) s.duration_s = j.at("duration_s").get<double>();
    if (j.contains("sample_rate_hz")) s.sample_rate_hz = j.at("sample_rate_hz").get<int>();
    if (j.contains("input_snr_db")) s.input_snr_db = j.at("input_snr_db").get<double>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("noise_gmm")) s.noise_gmm = gmm_from(j.at("noise_gmm"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("suite spec: ") + e.what());
  }
  return s;
}

harness::SynthSpec pair_from_json(const json& j) {
  harness::SynthSpec s;
  s.noise_gmm = default_noise_gmm();
  try {
    if (j.contains("clean_kind")) s.clean_kind = harness::parse_clean_kind(j.at("clean_kind").get<std::string>());
    if (j.contains("duration_s")) s.duration_s = j.at("duration_s").get<double>();
    if (j.contains("sample_rate_hz")) s.sample_rate_hz = j.at("sample_rate_hz").get<int>();
    if (j.contains("target_input_snr_db")) s.target_input_snr_db = j.at("target_input_snr_db").get<double>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("noise_gmm")) s.noise_gmm = gmm_from(j.at("noise_gmm"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("synth spec: ") + e.what());
  }
  return s;
}

RunConfig base_config(const std::string& path) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_config(path);
  apply_env_overrides(cfg);
  return cfg;
}

std::vector<NoisyPair> load_pairs(const std::string& dir, const std::string& layout, std::vector<std::string>* ids) {
  const harness::Dataset ds = harness::ingest_dataset(dir, harness::parse_layout(layout));
  for (const auto& s : ds.skipped) std::cerr << "skipped " << s.file.string() << ": " << s.reason << '\n';
  if (ids != nullptr) {
    for (const auto& p : ds.pairs) ids->push_back(p.stem);
  }
  return ds.load_all();
}

WavEncoding parse_encoding(const std::string& s) {
  if (s == "pcm16") return WavEncoding::pcm16;
  if (s == "float32") return WavEncoding::float32;
  throw_contract("unknown encoding " + s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diffgmm: GMM-guided iterative denoising of 1-D audio"};
  app.require_subcommand(1);
  app.fallthrough();
  bool no_timestamp = false;
  app.add_flag("--no-timestamp", no_timestamp, "Leave timestamps and wall times out of JSON reports");

  // train
  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  std::string t_config, t_data, t_synth, t_out, t_mode, t_loss, t_layout = "paired_dirs", t_trace;
  std::optional<std::size_t> t_iters;
  std::optional<std::uint64_t> t_seed;
  train->add_option("--config", t_config, "key = value config file");
  auto* data_opt = train->add_option("--data", t_data, "Dataset root with noisy/clean pairs");
  auto* synth_opt = train->add_option("--synth", t_synth, "Synthetic suite spec (JSON file, or 'default')");
  data_opt->excludes(synth_opt);
  train->add_option("--layout", t_layout, "paired_dirs | voicebank_demand | birdsounds");
  train->add_option("--out", t_out, "Checkpoint path")->required();
  train->add_option("--mode", t_mode, "full | diffusion-only | gmm-only");
  train->add_option("--loss", t_loss, "l2 | l1 | l2+nll | simple");
  train->add_option("--iters", t_iters, "Training iterations");
  train->add_option("--seed", t_seed, "Seed for init and batching");
  train->add_option("--trace", t_trace, "Write the per-iteration loss as CSV");

  // denoise
  auto* den = app.add_subcommand("denoise", "Denoise one WAV file");
  std::string d_ckpt, d_in, d_out, d_report, d_curves, d_clean, d_encoding = "float32";
  std::size_t d_steps = denoise::kDefaultSteps;
  bool d_freeze = false;
  den->add_option("--ckpt", d_ckpt, "Checkpoint")->required();
  den->add_option("--in", d_in, "Noisy WAV")->required();
  den->add_option("--out", d_out, "Denoised WAV")->required();
  den->add_option("--steps", d_steps, "Reverse steps T");
  den->add_flag("--freeze", d_freeze, "Estimate the noise once and reuse it every step");
  den->add_option("--report", d_report, "Per-step JSON report");
  den->add_option("--curves", d_curves, "Component density curves (CSV) of the first-step mixture");
  den->add_option("--clean", d_clean, "Clean reference WAV for metrics in the report");
  den->add_option("--encoding", d_encoding, "pcm16 | float32");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a paired dataset");
  std::string e_ckpt, e_data, e_out, e_json, e_layout = "paired_dirs";
  std::size_t e_steps = denoise::kDefaultSteps;
  ev->add_option("--ckpt", e_ckpt, "Checkpoint")->required();
  ev->add_option("--data", e_data, "Dataset root")->required();
  ev->add_option("--layout", e_layout, "paired_dirs | voicebank_demand | birdsounds");
  ev->add_option("--out", e_out, "Per-clip metrics CSV")->required();
  ev->add_option("--json", e_json, "Full experiment record as JSON");
  ev->add_option("--steps", e_steps, "Reverse steps T");

  // gmm-fit
  auto* fit = app.add_subcommand("gmm-fit", "Fit a Gaussian mixture to the samples of a WAV file");
  std::string g_in, g_out;
  std::size_t g_k = gmm::kDefaultComponents, g_iters = 200;
  std::uint64_t g_seed = 0;
  fit->add_option("--in", g_in, "WAV file")->required();
  fit->add_option("--k", g_k, "Components");
  fit->add_option("--out", g_out, "Output JSON")->required();
  fit->add_option("--seed", g_seed, "k-means++ seed");
  fit->add_option("--max-iters", g_iters, "EM iteration cap");

  // sweep-k
  auto* sweep = app.add_subcommand("sweep-k", "Train one model per K on the synthetic suite");
  std::vector<std::size_t> s_ks{1, 2, 3, 4, 5, 6, 7, 8};
  std::string s_out, s_config;
  std::optional<std::size_t> s_iters;
  sweep->add_option("--ks", s_ks, "Comma-separated K values")->delimiter(',');
  sweep->add_option("--out", s_out, "CSV path")->required();
  sweep->add_option("--config", s_config, "key = value config file");
  sweep->add_option("--iters", s_iters, "Training iterations per K");

  // ablate
  auto* abl = app.add_subcommand("ablate", "gmm-only vs diffusion-only vs full on the synthetic suite");
  std::string a_out, a_config;
  std::optional<std::size_t> a_iters;
  abl->add_option("--out", a_out, "CSV path")->required();
  abl->add_option("--config", a_config, "key = value config file");
  abl->add_option("--iters", a_iters, "Training iterations per mode");

  // synth
  auto* syn = app.add_subcommand("synth", "Write synthetic noisy/clean WAVs");
  std::string y_spec, y_out;
  syn->add_option("--spec", y_spec, "JSON: a single pair spec, or a suite spec with train_clips")->required();
  syn->add_option("--out", y_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::usage);
  }

  try {
    if (*train) {
      RunConfig cfg = base_config(t_config);
      if (!t_mode.empty()) cfg.mode = model::parse_mode(t_mode);
      if (!t_loss.empty()) cfg.train.loss = model::parse_loss(t_loss);
      if (t_iters) cfg.train.iterations = *t_iters;
      if (t_seed) cfg.train.seed = *t_seed;

      std::vector<NoisyPair> pairs;
      if (!t_data.empty()) {
        pairs = load_pairs(t_data, t_layout, nullptr);
      } else {
        if (!t_synth.empty() && t_synth != "default") cfg.suite = suite_from_json(parse_json_file(t_synth), cfg.suite);
        pairs = harness::make_suite(cfg.suite).train;
      }
      model::Model m(cfg.unet, cfg.mode, cfg.train.seed);
      model::TrainResult r;
      if (cfg.mode != model::AblationMode::gmm_only) {
        r = model::train(m, pairs, cfg.train, [&](std::size_t it, const model::Model&, double loss) {
          if (it % cfg.train.trace_interval == 0 || it == cfg.train.iterations) {
            std::fprintf(stderr, "iter %zu loss %.6g\n", it, loss);
          }
        });
      }
      m.save(t_out);
      if (!t_trace.empty()) {
        std::ostringstream os;
        os << "iteration,loss\n";
        for (std::size_t i = 0; i < r.loss_trace.size(); ++i) os << i + 1 << ',' << r.loss_trace[i] << '\n';
        write_text(t_trace, os.str());
      }
      std::printf("wrote %s (%zu pairs, %zu iterations)\n", t_out.c_str(), pairs.size(), r.loss_trace.size());
    } else if (*den) {
      const model::Model m = model::Model::load(d_ckpt);
      const AudioClip x = read_wav(d_in);
      std::optional<AudioClip> clean;
      if (!d_clean.empty()) {
        clean = read_wav(d_clean);
        if (clean->sample_rate_hz != x.sample_rate_hz) clean = resample(*clean, x.sample_rate_hz);
        clean->samples.resize(x.size(), 0.0);
      }
      denoise::DenoiseOptions opts;
      opts.freeze_estimate = d_freeze;
      opts.reference = clean ? &*clean : nullptr;
      const auto r = denoise::denoise(m, x, denoise::ReverseSchedule::uniform(d_steps), opts);
      write_wav(r.denoised, d_out, parse_encoding(d_encoding));
      if (!d_report.empty()) write_text(d_report, r.report.to_json() + "\n");
      if (!d_curves.empty()) {
        if (r.report.steps.empty() || !r.report.steps.front().mixture) {
          throw_contract("--curves needs a model with a mixture head (full or gmm-only)");
        }
        std::vector<double> removed(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) removed[i] = x.samples[i] - r.denoised.samples[i];
        std::vector<double> truth;
        if (clean) {
          truth.resize(x.size());
          for (std::size_t i = 0; i < x.size(); ++i) truth[i] = x.samples[i] - clean->samples[i];
        }
        const auto rep = denoise::decompose_report(*r.report.steps.front().mixture, removed, truth);
        write_text(d_curves, rep.curves_csv());
        fs::path overlay = d_curves;
        overlay.replace_extension(".json");
        write_text(overlay, rep.to_json() + "\n");
      }
    } else if (*ev) {
      const model::Model m = model::Model::load(e_ckpt);
      std::vector<std::string> ids;
      const auto pairs = load_pairs(e_data, e_layout, &ids);
      DenoiseSettings settings;
      settings.steps = e_steps;
      harness::ExperimentRecord rec = harness::evaluate(m, pairs, settings, ids, "eval");
      write_text(e_out, rec.to_csv());
      if (!e_json.empty()) write_text(e_json, rec.to_json(!no_timestamp) + "\n");
      std::printf("mean SDR %.3f -> %.3f dB, SI-SNR %.3f -> %.3f dB over %zu clips\n", rec.mean_before.sdr_db,
                  rec.mean_after.sdr_db, rec.mean_before.si_snr_db, rec.mean_after.si_snr_db, rec.clips.size());
    } else if (*fit) {
      const AudioClip x = read_wav(g_in);
      const gmm::EmResult r = gmm::em_fit(x.samples, gmm::EmOptions{g_k, g_seed, g_iters, 1e-8});
      json j = json::parse(gmm::to_json(r.params));
      j["log_likelihood"] = r.log_likelihood_trace.empty() ? 0.0 : r.log_likelihood_trace.back();
      j["iterations"] = r.iterations;
      j["converged"] = r.converged;
      write_text(g_out, j.dump(2) + "\n");
    } else if (*sweep) {
      RunConfig cfg = base_config(s_config);
      if (s_iters) cfg.train.iterations = *s_iters;
      const auto rows = harness::sweep_k(s_ks, cfg);
      write_text(s_out, harness::sweep_csv(rows));
      std::printf("best K = %zu\n", harness::best_k(rows));
    } else if (*abl) {
      RunConfig cfg = base_config(a_config);
      if (a_iters) cfg.train.iterations = *a_iters;
      write_text(a_out, harness::ablation_csv(harness::run_ablation(cfg)));
    } else if (*syn) {
      const json spec = parse_json_file(y_spec);
      if (spec.contains("train_clips") || spec.contains("test_clips")) {
        harness::write_suite(harness::make_suite(suite_from_json(spec, SuiteConfig{})), y_out);
      } else {
        const NoisyPair p = harness::synth_pair(pair_from_json(spec));
        fs::create_directories(y_out);
        write_wav(p.noisy, fs::path(y_out) / "noisy.wav", WavEncoding::float32);
        write_wav(p.clean, fs::path(y_out) / "clean.wav", WavEncoding::float32);
        write_wav(*p.noise, fs::path(y_out) / "noise.wav", WavEncoding::float32);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  }
  return 0;
}
