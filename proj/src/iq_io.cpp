#include "multiscout/iq_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace multiscout {
namespace {

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace

void write_iq_file(const std::filesystem::path& path, std::span<const Complex> samples) {
  std::vector<std::uint32_t> words;
  words.reserve(samples.size() * 2);
  for (const auto& s : samples) {
    for (float f : {static_cast<float>(s.real()), static_cast<float>(s.imag())})
      words.push_back(to_little_endian(std::bit_cast<std::uint32_t>(f)));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_iq_file: cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(words.data()),
            static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
}

ComplexVector read_iq_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("read_iq_file: cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % 8 != 0) throw std::runtime_error("read_iq_file: size is not a multiple of 8 bytes");
  in.seekg(0);
  std::vector<std::uint32_t> words(bytes / 4);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
  ComplexVector out(words.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float re = std::bit_cast<float>(to_little_endian(words[2 * i]));
    const float im = std::bit_cast<float>(to_little_endian(words[2 * i + 1]));
    out[i] = {re, im};
  }
  return out;
}

void write_iq_sidecar(const std::filesystem::path& iq_path, std::size_t num_samples,
                      double sample_rate_hz, const nlohmann::json& metadata) {
  nlohmann::json j;
  j["format"] = "cf32_le";
  j["data_file"] = iq_path.filename().string();
  j["num_samples"] = num_samples;
  j["sample_rate_hz"] = sample_rate_hz;
  j["config"] = metadata;
  auto sidecar = iq_path;
  sidecar += ".json";
  std::ofstream out(sidecar);
  if (!out) throw std::runtime_error("write_iq_sidecar: cannot open " + sidecar.string());
  out << j.dump(2) << '\n';
}

}  // namespace multiscout
