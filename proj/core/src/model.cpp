#include "diffgmm/model.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "diffgmm/errors.hpp"
#include "json.hpp"

namespace diffgmm::model {

using grad::ConvSpec;
using grad::Shape;
using grad::Tape;
using grad::Var;

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::full: return "full";
    case AblationMode::diffusion_only: return "diffusion-only";
    case AblationMode::gmm_only: return "gmm-only";
  }
  return "full";
}

AblationMode parse_mode(std::string_view text) {
  if (text == "full") return AblationMode::full;
  if (text == "diffusion-only" || text == "diffusion_only") return AblationMode::diffusion_only;
  if (text == "gmm-only" || text == "gmm_only") return AblationMode::gmm_only;
  throw ContractError("unknown ablation mode: " + std::string(text));
}

void UNetConfig::validate() const {
  if (depth < 1) throw_contract("UNetConfig: depth must be >= 1");
  if (filters < 1) throw_contract("UNetConfig: filters must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw_contract("UNetConfig: kernel_size must be odd");
  if (downsample_factor < 1) throw_contract("UNetConfig: downsample_factor must be >= 1");
  if (components < 1) throw_contract("UNetConfig: components must be >= 1");
}

std::size_t UNetConfig::length_multiple() const {
  std::size_t m = 1;
  for (std::size_t i = 0; i < depth; ++i) m *= downsample_factor;
  return m;
}

Model::Model(UNetConfig config, AblationMode mode, std::uint64_t seed)
    : config_(config), mode_(mode) {
  config_.validate();
  allocate(seed);
  optimizer_ = grad::AdamState::zeros_like(params_);
}

void Model::set_mode(AblationMode mode) { mode_ = mode; }

void Model::allocate(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t C = config_.filters;
  const std::size_t k = config_.kernel_size;
  const std::size_t f = config_.downsample_factor;
  const std::size_t K = config_.components;

  levels_.clear();
  for (std::size_t l = 0; l < config_.depth; ++l) {
    Level lv{};
    lv.in_channels = l == 0 ? 1 : C;
    const std::string p = "enc" + std::to_string(l);
    lv.enc_w = params_.add_uniform(p + ".conv.w", {C, lv.in_channels, k}, lv.in_channels * k, rng);
    lv.enc_b = params_.add_uniform(p + ".conv.b", {C}, lv.in_channels * k, rng);
    lv.down_w = params_.add_uniform(p + ".down.w", {C, C, f}, C * f, rng);
    lv.down_b = params_.add_uniform(p + ".down.b", {C}, C * f, rng);
    levels_.push_back(lv);
  }
  for (std::size_t l = config_.depth; l-- > 0;) {
    Level& lv = levels_[l];
    const std::string p = "dec" + std::to_string(l);
    // Fan-in of the equivalent convolution over the concatenated channels.
    const std::size_t fan_in = 2 * C * k;
    lv.dec_up_w = params_.add_uniform(p + ".up.w", {C, C, k}, fan_in, rng);
    lv.dec_skip_w = params_.add_uniform(p + ".skip.w", {C, C, k}, fan_in, rng);
    lv.dec_b = params_.add_uniform(p + ".b", {C}, fan_in, rng);
  }
  heads_.resp_w = params_.add_uniform("head_resp.w", {K, C, 1}, C, rng);
  heads_.resp_b = params_.add_uniform("head_resp.b", {K}, C, rng);
  heads_.logits_w = params_.add_uniform("head_global.logits.w", {K, C}, C, rng);
  heads_.logits_b = params_.add_uniform("head_global.logits.b", {K}, C, rng);
  heads_.means_w = params_.add_uniform("head_global.means.w", {K, C}, C, rng);
  heads_.means_b = params_.add_uniform("head_global.means.b", {K}, C, rng);
  heads_.logvar_w = params_.add_uniform("head_global.log_var.w", {K, C}, C, rng);
  heads_.logvar_b = params_.add_uniform("head_global.log_var.b", {K}, C, rng);
  heads_.reg_w = params_.add_uniform("head_reg.w", {1, C, 1}, C, rng);
  heads_.reg_b = params_.add_uniform("head_reg.b", {1}, C, rng);
}

ForwardGraph Model::build(Tape& tape, Var input) const {
  if (mode_ == AblationMode::gmm_only) {
    throw_contract("gmm-only mode has no network forward pass");
  }
  const Shape in_shape = tape.shape(input);
  if (in_shape.channels != 1) throw_shape("model input must have one channel");
  const std::size_t mult = config_.length_multiple();
  if (in_shape.length == 0 || in_shape.length % mult != 0) {
    throw_contract("model input length " + std::to_string(in_shape.length) +
                   " is not a positive multiple of " + std::to_string(mult) + "; pad first");
  }

  const std::size_t C = config_.filters;
  const std::size_t k = config_.kernel_size;
  const std::size_t f = config_.downsample_factor;
  const std::size_t K = config_.components;
  const ConvSpec same{C, k, 1, k / 2};
  const ConvSpec down{C, f, f, 0};

  auto p = [&](std::size_t idx) { return tape.param(params_, idx); };

  Var h = input;
  std::vector<Var> skips;
  skips.reserve(levels_.size());
  for (const Level& lv : levels_) {
    h = tape.relu(tape.conv1d(h, p(lv.enc_w), p(lv.enc_b), same));
    skips.push_back(h);
    h = tape.conv1d(h, p(lv.down_w), p(lv.down_b), down);
  }
  ForwardGraph g;
  g.bottleneck = h;

  for (std::size_t l = levels_.size(); l-- > 0;) {
    const Level& lv = levels_[l];
    Var up = tape.upsample_linear(h, f);
    Var a = tape.conv1d(up, p(lv.dec_up_w), p(lv.dec_b), same);
    Var s = tape.conv1d(skips[l], p(lv.dec_skip_w), std::nullopt, same);
    h = tape.relu(tape.add(a, s));
  }

  if (mode_ == AblationMode::diffusion_only) {
    g.noise = tape.conv1d(h, p(heads_.reg_w), p(heads_.reg_b), ConvSpec{1, 1, 1, 0});
    return g;
  }

  g.responsibilities =
      tape.softmax(tape.conv1d(h, p(heads_.resp_w), p(heads_.resp_b), ConvSpec{K, 1, 1, 0}));

  Var pooled = tape.mean_time(g.bottleneck);
  auto head = [&](std::size_t w, std::size_t b) {
    return tape.linear(pooled, tape.param(params_, w, Shape{K, C}), p(b));
  };
  g.weights = tape.softmax(head(heads_.logits_w, heads_.logits_b));
  g.means = head(heads_.means_w, heads_.means_b);
  g.variances = tape.add_scalar(tape.exp(head(heads_.logvar_w, heads_.logvar_b)), gmm::kVarianceFloor);

  // noise[n] = sum_k r_nk mu_k, a pointwise conv with the means as weights.
  g.noise = tape.conv1d(g.responsibilities, g.means, std::nullopt, ConvSpec{1, 1, 1, 0});
  return g;
}

ForwardOutput Model::forward(std::span<const double> signal) const {
  Tape tape;
  Var x = tape.constant(Shape{1, signal.size()}, std::vector<double>(signal.begin(), signal.end()));
  const ForwardGraph g = build(tape, x);
  ForwardOutput out;
  const auto noise = tape.value(g.noise);
  out.noise_estimate.assign(noise.begin(), noise.end());
  if (mode_ == AblationMode::full) {
    auto copy = [&](Var v) {
      const auto s = tape.value(v);
      return std::vector<double>(s.begin(), s.end());
    };
    out.gmm.weights = copy(g.weights);
    out.gmm.means = copy(g.means);
    out.gmm.variances = copy(g.variances);
    out.responsibilities = grad::Tensor1D(tape.shape(g.responsibilities), copy(g.responsibilities));
  }
  return out;
}

std::filesystem::path Model::sidecar_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".json";
  return p;
}

void Model::save(const std::filesystem::path& path) const {
  grad::save_checkpoint(params_, path);
  nlohmann::json j;
  j["format"] = "diffgmm-sidecar";
  j["format_version"] = 1;
  j["config"] = {{"depth", config_.depth},
                 {"filters", config_.filters},
                 {"kernel_size", config_.kernel_size},
                 {"downsample_factor", config_.downsample_factor},
                 {"components", config_.components}};
  j["ablation_mode"] = to_string(mode_);
  j["iteration"] = iteration_;
  j["trace_interval"] = trace_interval_;
  j["loss_trace"] = loss_trace_;
  std::ofstream out(sidecar_path(path));
  if (!out) throw IoError("cannot write " + sidecar_path(path).string());
  out << j.dump(2) << '\n';
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(sidecar_path(path));
  if (!in) throw IoError("missing checkpoint sidecar " + sidecar_path(path).string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint sidecar: ") + e.what());
  }
  UNetConfig cfg;
  AblationMode mode;
  try {
    const auto& c = j.at("config");
    cfg.depth = c.at("depth").get<std::size_t>();
    cfg.filters = c.at("filters").get<std::size_t>();
    cfg.kernel_size = c.at("kernel_size").get<std::size_t>();
    cfg.downsample_factor = c.at("downsample_factor").get<std::size_t>();
    cfg.components = c.at("components").get<std::size_t>();
    mode = parse_mode(j.at("ablation_mode").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint sidecar: ") + e.what());
  }

  Model m(cfg, mode, 0);
  grad::ParamStore loaded = grad::load_checkpoint(path);
  if (loaded.size() != m.params_.size()) throw FormatError("checkpoint does not match model layout");
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    if (loaded[i].name != m.params_[i].name || loaded[i].dims != m.params_[i].dims) {
      throw FormatError("checkpoint parameter " + loaded[i].name + " does not match model layout");
    }
  }
  m.params_ = std::move(loaded);
  m.iteration_ = j.value("iteration", std::int64_t{0});
  m.trace_interval_ = j.value("trace_interval", std::size_t{250});
  m.loss_trace_ = j.value("loss_trace", std::vector<double>{});
  return m;
}

}  // namespace diffgmm::model
