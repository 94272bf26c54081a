#include "approxfl/dataset.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace approxfl {

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.samples <= 0 || spec.classes < 2) {
    throw std::invalid_argument("synthetic dataset needs samples > 0 and >= 2 classes");
  }
  Dataset d;
  d.channels = spec.channels;
  d.height = spec.height;
  d.width = spec.width;
  d.classes = spec.classes;
  const int n = spec.samples;
  const int elems = d.sample_elems();
  std::vector<std::vector<float>> templates(spec.classes);
  for (int c = 0; c < spec.classes; ++c) {
    Rng trng(Rng::mix(spec.seed, 0x7E3Aull, static_cast<std::uint64_t>(c)));
    templates[c].resize(elems);
    for (int i = 0; i < elems; ++i) {
      templates[c][i] = static_cast<float>(trng.normal());
    }
  }
  d.images.resize(static_cast<std::size_t>(n) * elems);
  d.labels.resize(n);
  for (int s = 0; s < n; ++s) {
    const int y = s % spec.classes;
    d.labels[s] = y;
    Rng srng(Rng::mix(spec.seed, 0x5A3Dull, static_cast<std::uint64_t>(s)));
    float* img = d.images.data() + static_cast<std::size_t>(s) * elems;
    for (int i = 0; i < elems; ++i) {
      img[i] = templates[y][i] + static_cast<float>(spec.noise * srng.normal());
    }
  }
  return d;
}

namespace {
constexpr char kMagic[4] = {'A', 'X', 'F', 'D'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<T>(v);
}
}  // namespace

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open dataset file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::invalid_argument("not a dataset file (bad magic): " + path);
  }
  const auto version = read_le<std::uint32_t>(in);
  if (version != kVersion) {
    throw std::invalid_argument("unsupported dataset version " +
                                std::to_string(version) + ": " + path);
  }
  const auto count = read_le<std::uint32_t>(in);
  Dataset d;
  d.channels = read_le<std::uint16_t>(in);
  d.height = read_le<std::uint16_t>(in);
  d.width = read_le<std::uint16_t>(in);
  d.classes = read_le<std::uint16_t>(in);
  if (!in || count == 0 || d.classes < 2 || d.sample_elems() <= 0) {
    throw std::invalid_argument("dataset header is malformed: " + path);
  }
  d.labels.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto y = read_le<std::uint16_t>(in);
    if (y >= d.classes) {
      throw std::invalid_argument("label out of range at sample " +
                                  std::to_string(i) + ": " + path);
    }
    d.labels[i] = y;
  }
  const std::size_t total = static_cast<std::size_t>(count) * d.sample_elems();
  d.images.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    const auto bits = read_le<std::uint32_t>(in);
    float f;
    std::memcpy(&f, &bits, 4);
    d.images[i] = f;
  }
  if (!in) throw std::invalid_argument("dataset file truncated: " + path);
  return d;
}

void write_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write dataset file: " + path);
  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, kVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.size()));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(d.channels));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(d.height));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(d.width));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(d.classes));
  for (int y : d.labels) write_le<std::uint16_t>(out, static_cast<std::uint16_t>(y));
  for (float f : d.images) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_le<std::uint32_t>(out, bits);
  }
  if (!out) throw std::runtime_error("failed writing dataset file: " + path);
}

}  // namespace approxfl
