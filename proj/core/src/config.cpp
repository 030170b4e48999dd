#include "diffgmm/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "diffgmm/errors.hpp"

namespace diffgmm {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw_contract("config: bad value '" + std::string(value) + "' for " + std::string(key));
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v);
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) { return static_cast<std::size_t>(to_u64(key, v)); }

double to_double(std::string_view key, std::string_view v) {
  // from_chars for double is missing on older libstdc++, strtod is fine here
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) bad_value(key, v);
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  bad_value(key, v);
}

std::vector<double> to_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(to_double(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) bad_value(key, v);
  return out;
}

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

}  // namespace

gmm::GmmParams default_noise_gmm() {
  gmm::GmmParams p;
  p.weights = {0.25, 0.5, 0.25};
  p.means = {-1.0, 0.0, 1.0};
  p.variances = {0.01, 0.01, 0.01};
  return p;
}

void set_option(RunConfig& c, std::string_view key, std::string_view value) {
  const std::string_view v = trim(value);
  if (key == "depth") c.unet.depth = to_size(key, v);
  else if (key == "filters") c.unet.filters = to_size(key, v);
  else if (key == "kernel_size") c.unet.kernel_size = to_size(key, v);
  else if (key == "downsample_factor") c.unet.downsample_factor = to_size(key, v);
  else if (key == "components" || key == "k") c.unet.components = to_size(key, v);
  else if (key == "mode") c.mode = model::parse_mode(v);
  else if (key == "loss") c.train.loss = model::parse_loss(v);
  else if (key == "lr") c.train.adam.lr = to_double(key, v);
  else if (key == "beta1") c.train.adam.beta1 = to_double(key, v);
  else if (key == "beta2") c.train.adam.beta2 = to_double(key, v);
  else if (key == "eps") c.train.adam.eps = to_double(key, v);
  else if (key == "iterations") c.train.iterations = to_size(key, v);
  else if (key == "batch_size") c.train.batch_size = to_size(key, v);
  else if (key == "segment_length") c.train.segment_length = to_size(key, v);
  else if (key == "nll_weight") c.train.nll_weight = to_double(key, v);
  else if (key == "seed") c.train.seed = to_u64(key, v);
  else if (key == "trace_interval") c.train.trace_interval = to_size(key, v);
  else if (key == "level_augment") c.train.level_augment = to_bool(key, v);
  else if (key == "threads") c.train.threads = to_size(key, v);
  else if (key == "steps") c.denoise.steps = to_size(key, v);
  else if (key == "freeze") c.denoise.freeze = to_bool(key, v);
  else if (key == "train_clips") c.suite.train_clips = to_size(key, v);
  else if (key == "test_clips") c.suite.test_clips = to_size(key, v);
  else if (key == "duration_s") c.suite.duration_s = to_double(key, v);
  else if (key == "sample_rate_hz") c.suite.sample_rate_hz = static_cast<int>(to_size(key, v));
  else if (key == "input_snr_db") c.suite.input_snr_db = to_double(key, v);
  else if (key == "suite_seed") c.suite.seed = to_u64(key, v);
  else if (key == "noise_weights") c.suite.noise_gmm.weights = to_list(key, v);
  else if (key == "noise_means") c.suite.noise_gmm.means = to_list(key, v);
  else if (key == "noise_variances") c.suite.noise_gmm.variances = to_list(key, v);
  else throw_contract("config: unknown key '" + std::string(key) + "'");
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw_contract("config line " + std::to_string(line_no) + ": expected key = value");
    }
    set_option(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  base.unet.validate();
  base.suite.noise_gmm.validate();
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

void apply_env_overrides(RunConfig& config) {
  if (const char* s = std::getenv("DIFFGMM_SEED"); s != nullptr && *s != '\0') {
    config.train.seed = to_u64("DIFFGMM_SEED", s);
  }
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "depth = " << unet.depth << '\n'
     << "filters = " << unet.filters << '\n'
     << "kernel_size = " << unet.kernel_size << '\n'
     << "downsample_factor = " << unet.downsample_factor << '\n'
     << "components = " << unet.components << '\n'
     << "mode = " << model::to_string(mode) << '\n'
     << "loss = " << model::to_string(train.loss) << '\n'
     << "lr = " << train.adam.lr << '\n'
     << "beta1 = " << train.adam.beta1 << '\n'
     << "beta2 = " << train.adam.beta2 << '\n'
     << "eps = " << train.adam.eps << '\n'
     << "iterations = " << train.iterations << '\n'
     << "batch_size = " << train.batch_size << '\n'
     << "segment_length = " << train.segment_length << '\n'
     << "nll_weight = " << train.nll_weight << '\n'
     << "seed = " << train.seed << '\n'
     << "trace_interval = " << train.trace_interval << '\n'
     << "level_augment = " << (train.level_augment ? "true" : "false") << '\n'
     << "threads = " << train.threads << '\n'
     << "steps = " << denoise.steps << '\n'
     << "freeze = " << (denoise.freeze ? "true" : "false") << '\n'
     << "train_clips = " << suite.train_clips << '\n'
     << "test_clips = " << suite.test_clips << '\n'
     << "duration_s = " << suite.duration_s << '\n'
     << "sample_rate_hz = " << suite.sample_rate_hz << '\n'
     << "input_snr_db = " << suite.input_snr_db << '\n'
     << "suite_seed = " << suite.seed << '\n'
     << "noise_weights = " << join(suite.noise_gmm.weights) << '\n'
     << "noise_means = " << join(suite.noise_gmm.means) << '\n'
     << "noise_variances = " << join(suite.noise_gmm.variances) << '\n';
  return os.str();
}

}  // namespace diffgmm
