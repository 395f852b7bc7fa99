#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bemopt/ad/tensor.hpp"

namespace bemopt::ad {

// Named-tensor container: raw little-endian float64 data in one binary file,
// described by a JSON index {name, shape, offset (bytes), count} per tensor.

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

inline std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffULL) << (8 * (7 - i));
    return r;
  } else {
    return v;
  }
}

inline nlohmann::json write_tensors(const std::string& bin_path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write tensor file '" + bin_path + "'");
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& nt : tensors) {
    index.push_back({{"name", nt.name}, {"shape", nt.tensor.shape()}, {"offset", offset}, {"count", nt.tensor.size()}});
    for (double v : nt.tensor.values()) {
      const std::uint64_t le = to_little_endian(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&le), sizeof le);
    }
    offset += 8 * nt.tensor.size();
  }
  if (!out) throw InputError("failed writing tensor file '" + bin_path + "'");
  return index;
}

inline std::vector<NamedTensor> read_tensors(const std::string& bin_path, const nlohmann::json& index) {
  std::ifstream in(bin_path, std::ios::binary);
  if (!in) throw InputError("cannot open tensor file '" + bin_path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<NamedTensor> out;
  for (const auto& entry : index) {
    const auto shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto count = entry.at("count").get<std::uint64_t>();
    if (count != shape_size(shape) || offset + 8 * count > bytes.size())
      throw InputError("tensor file '" + bin_path + "': bad index entry for '" + entry.at("name").get<std::string>() + "'");
    std::vector<double> data(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint64_t le;
      std::memcpy(&le, bytes.data() + offset + 8 * i, sizeof le);
      data[i] = std::bit_cast<double>(to_little_endian(le));
    }
    out.push_back({entry.at("name").get<std::string>(), Tensor(shape, std::move(data))});
  }
  return out;
}

}  // namespace bemopt::ad
