// SPDX-License-Identifier: Apache-2.0
#include "danet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "danet/error.hpp"

namespace danet {

namespace {

constexpr char kMagic[8] = {'D', 'A', 'N', 'E', 'T', 'C', 'K', '1'};

template <typename T>
void put(std::ostream& os, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    os.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xffU));
  }
}

template <typename T>
T get(std::istream& is) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = is.get();
    if (c == EOF) throw ParseError("checkpoint truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return static_cast<T>(v);
}

std::string get_bytes(std::istream& is, std::size_t n) {
  std::string s(n, '\0');
  if (!is.read(s.data(), static_cast<std::streamsize>(n))) throw ParseError("checkpoint truncated");
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof kMagic);
  const std::string cfg = config.to_json();
  put<std::uint64_t>(os, cfg.size());
  os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  put<std::uint64_t>(os, params.size());
  for (const auto& [name, t] : params.entries()) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) put<std::uint64_t>(os, e);
    for (double v : t.values()) put<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint " + path.string());
  if (get_bytes(is, sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw ParseError(path.string() + " is not a checkpoint file");
  }
  Checkpoint ck;
  const auto cfg_len = get<std::uint64_t>(is);
  ck.config = ModelConfig::from_json(get_bytes(is, cfg_len));
  const auto count = get<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = get_bytes(is, get<std::uint32_t>(is));
    const auto rank = get<std::uint32_t>(is);
    if (rank > kMaxRank) throw ParseError("checkpoint: parameter " + name + " has rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& e : shape) e = get<std::uint64_t>(is);
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = std::bit_cast<double>(get<std::uint64_t>(is));
    ck.params.add(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return ck;
}

}  // namespace danet
