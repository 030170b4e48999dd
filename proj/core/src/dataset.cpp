#include <algorithm>
#include <map>

#include "diffgmm/errors.hpp"
#include "diffgmm/harness.hpp"

namespace diffgmm::harness {
namespace fs = std::filesystem;
namespace {

bool is_wav(const fs::directory_entry& e) {
  if (!e.is_regular_file()) return false;
  std::string ext = e.path().extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav";
}

std::map<std::string, fs::path> list_wavs(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (is_wav(e)) out.emplace(e.path().stem().string(), e.path());
  }
  return out;
}

void require_dir(const fs::path& p) {
  if (!fs::is_directory(p)) throw IoError("expected directory " + p.string());
}

void match_dirs(const fs::path& noisy_dir, const fs::path& clean_dir, const std::string& prefix, Dataset& out) {
  const auto noisy = list_wavs(noisy_dir);
  const auto clean = list_wavs(clean_dir);
  for (const auto& [stem, path] : noisy) {
    auto it = clean.find(stem);
    if (it == clean.end()) {
      out.skipped.push_back({path, "no clean counterpart"});
    } else {
      out.pairs.push_back({prefix + stem, path, it->second});
    }
  }
  for (const auto& [stem, path] : clean) {
    if (noisy.find(stem) == noisy.end()) out.skipped.push_back({path, "no noisy counterpart"});
  }
}

std::vector<fs::path> sorted_subdirs(const fs::path& root) {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace

std::string to_string(DatasetLayout layout) {
  switch (layout) {
    case DatasetLayout::paired_dirs: return "paired_dirs";
    case DatasetLayout::voicebank_demand: return "voicebank_demand";
    case DatasetLayout::birdsounds: return "birdsounds";
  }
  return "?";
}

DatasetLayout parse_layout(std::string_view text) {
  if (text == "paired_dirs" || text == "paired") return DatasetLayout::paired_dirs;
  if (text == "voicebank_demand" || text == "voicebank") return DatasetLayout::voicebank_demand;
  if (text == "birdsounds") return DatasetLayout::birdsounds;
  throw_contract("unknown dataset layout '" + std::string(text) + "'");
}

NoisyPair PairRef::load(int rate_hz) const {
  AudioClip noisy_clip = read_wav(noisy);
  AudioClip clean_clip = read_wav(clean);
  if (noisy_clip.sample_rate_hz != rate_hz) noisy_clip = resample(noisy_clip, rate_hz);
  if (clean_clip.sample_rate_hz != rate_hz) clean_clip = resample(clean_clip, rate_hz);
  const std::size_t n = std::min(noisy_clip.size(), clean_clip.size());
  if (n == 0) throw DegenerateDataError("empty audio in pair " + stem);
  noisy_clip.samples.resize(n);
  clean_clip.samples.resize(n);
  return NoisyPair::from_noisy_clean(std::move(noisy_clip), std::move(clean_clip));
}

std::vector<NoisyPair> Dataset::load_all(int rate_hz) const {
  std::vector<NoisyPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.load(rate_hz));
  return out;
}

Dataset ingest_dataset(const fs::path& root, DatasetLayout layout) {
  require_dir(root);
  Dataset ds;
  switch (layout) {
    case DatasetLayout::paired_dirs:
      require_dir(root / "noisy");
      require_dir(root / "clean");
      match_dirs(root / "noisy", root / "clean", "", ds);
      break;
    case DatasetLayout::voicebank_demand: {
      bool any = false;
      for (const auto& dir : sorted_subdirs(root)) {
        const std::string name = dir.filename().string();
        if (name.rfind("noisy_", 0) != 0) continue;
        const fs::path clean = root / ("clean_" + name.substr(6));
        if (!fs::is_directory(clean)) {
          ds.skipped.push_back({dir, "no clean_" + name.substr(6) + " directory"});
          continue;
        }
        any = true;
        match_dirs(dir, clean, name.substr(6) + "/", ds);
      }
      if (!any) throw IoError("no noisy_*/clean_* directory pair under " + root.string());
      break;
    }
    case DatasetLayout::birdsounds: {
      std::vector<std::pair<fs::path, std::string>> splits;
      if (fs::is_directory(root / "Raw_audios")) splits.emplace_back(root, "");
      for (const auto& dir : sorted_subdirs(root)) {
        if (fs::is_directory(dir / "Raw_audios")) splits.emplace_back(dir, dir.filename().string() + "/");
      }
      if (splits.empty()) throw IoError("no Raw_audios directory under " + root.string());
      for (const auto& [dir, prefix] : splits) {
        if (!fs::is_directory(dir / "Denoised_audios")) {
          ds.skipped.push_back({dir / "Raw_audios", "no Denoised_audios directory"});
          continue;
        }
        match_dirs(dir / "Raw_audios", dir / "Denoised_audios", prefix, ds);
      }
      break;
    }
  }
  if (ds.pairs.empty()) throw DegenerateDataError("no matching noisy/clean pairs under " + root.string());
  return ds;
}

}  // namespace diffgmm::harness
