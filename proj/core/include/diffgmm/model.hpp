#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diffgmm/gmm.hpp"
#include "diffgmm/grad/adam.hpp"
#include "diffgmm/grad/params.hpp"
#include "diffgmm/grad/tape.hpp"

namespace diffgmm::model {

enum class AblationMode {
  full,            // responsibilities x global mixture means
  diffusion_only,  // direct one-channel regression head, no mixture
  gmm_only,        // no network: EM on the noisy signal (see denoiser)
};

std::string to_string(AblationMode mode);
AblationMode parse_mode(std::string_view text);

struct UNetConfig {
  std::size_t depth = 6;
  std::size_t filters = 60;
  std::size_t kernel_size = 5;
  std::size_t downsample_factor = 2;
  std::size_t components = gmm::kDefaultComponents;

  void validate() const;
  /// Input lengths must be multiples of downsample_factor^depth.
  std::size_t length_multiple() const;

  bool operator==(const UNetConfig&) const = default;
};

/// Tape handles produced by Model::build. Mixture handles are invalid in
/// diffusion_only mode.
struct ForwardGraph {
  grad::Var noise;             // (1, L)
  grad::Var responsibilities;  // (K, L)
  grad::Var weights;           // (K, 1)
  grad::Var means;             // (K, 1)
  grad::Var variances;         // (K, 1)
  grad::Var bottleneck;
};

struct ForwardOutput {
  std::vector<double> noise_estimate;
  gmm::GmmParams gmm;                 // empty in diffusion_only mode
  grad::Tensor1D responsibilities;    // (K, L); empty in diffusion_only mode
};

/// U-Net encoder/decoder with a per-sample responsibility head, a global
/// mixture head on the pooled bottleneck, and a regression head for the
/// diffusion-only ablation. All heads are always allocated; the mode picks
/// which ones take part in the forward pass.
///
/// Encoder level l: relu(conv_k(h)) is kept as the skip, then a stride-f conv
/// (kernel f) downsamples. Decoder level l: upsample x f, conv_k of the
/// upsampled path plus conv_k of the skip (equivalent to one conv over their
/// channel concatenation), relu.
class Model {
 public:
  Model(UNetConfig config, AblationMode mode, std::uint64_t seed);

  const UNetConfig& config() const noexcept { return config_; }
  AblationMode mode() const noexcept { return mode_; }
  void set_mode(AblationMode mode);

  grad::ParamStore& params() noexcept { return params_; }
  const grad::ParamStore& params() const noexcept { return params_; }

  grad::AdamState& optimizer() noexcept { return optimizer_; }
  const grad::AdamState& optimizer() const noexcept { return optimizer_; }

  std::int64_t iteration() const noexcept { return iteration_; }
  void set_iteration(std::int64_t it) noexcept { iteration_ = it; }
  bool trained() const noexcept { return iteration_ > 0; }

  /// Loss samples recorded every `trace_interval` iterations.
  const std::vector<double>& loss_trace() const noexcept { return loss_trace_; }
  std::vector<double>& loss_trace() noexcept { return loss_trace_; }
  std::size_t trace_interval() const noexcept { return trace_interval_; }
  void set_trace_interval(std::size_t n) noexcept { trace_interval_ = n; }

  /// Builds the network on `tape` for an input node of shape (1, L). L must be a
  /// multiple of config().length_multiple() (ContractError otherwise).
  ForwardGraph build(grad::Tape& tape, grad::Var input) const;

  /// Evaluates the network on a padded signal.
  ForwardOutput forward(std::span<const double> signal) const;

  /// Writes the parameter checkpoint plus a JSON sidecar at `path` + ".json".
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

  static std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

  /// Head parameter indices, used by tests and the permutation check.
  struct HeadIndices {
    std::size_t resp_w, resp_b;
    std::size_t logits_w, logits_b;
    std::size_t means_w, means_b;
    std::size_t logvar_w, logvar_b;
    std::size_t reg_w, reg_b;
  };
  const HeadIndices& heads() const noexcept { return heads_; }

 private:
  struct Level {
    std::size_t enc_w, enc_b, down_w, down_b;
    std::size_t dec_up_w, dec_skip_w, dec_b;
    std::size_t in_channels;
  };

  void allocate(std::uint64_t seed);

  UNetConfig config_;
  AblationMode mode_;
  grad::ParamStore params_;
  grad::AdamState optimizer_;
  std::vector<Level> levels_;
  HeadIndices heads_{};
  std::int64_t iteration_ = 0;
  std::vector<double> loss_trace_;
  std::size_t trace_interval_ = 250;
};

}  // namespace diffgmm::model
