#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "diffgmm/errors.hpp"
#include "diffgmm/grad/params.hpp"

namespace diffgmm::grad {
namespace {

constexpr char kMagic[8] = {'D', 'G', 'M', 'M', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::vector<unsigned char>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
  }
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  template <typename T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint truncated");
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const ParamStore& params) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params.all()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.dims.size()));
    for (auto d : p.dims) put_le<std::uint64_t>(out, d);
    put_le<std::uint64_t>(out, p.values.size());
    for (double v : p.values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

ParamStore decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw FormatError("not a diffgmm checkpoint");
  }
  Reader r(bytes);
  r.str(8);
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw UnsupportedError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.le<std::uint32_t>();
  ParamStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.le<std::uint32_t>();
    std::string name = r.str(name_len);
    const auto rank = r.le<std::uint32_t>();
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = static_cast<std::size_t>(r.le<std::uint64_t>());
    const std::size_t idx = store.add(name, dims);
    const auto n = r.le<std::uint64_t>();
    auto& values = store[idx].values;
    if (n != values.size()) throw FormatError("checkpoint value count disagrees with dims for " + name);
    for (auto& v : values) v = std::bit_cast<double>(r.le<std::uint64_t>());
  }
  if (!r.done()) throw FormatError("trailing bytes in checkpoint");
  return store;
}

void save_checkpoint(const ParamStore& params, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace diffgmm::grad
