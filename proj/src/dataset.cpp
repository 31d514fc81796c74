// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#include "socketrain/dataset.hpp"

#include <fstream>
#include <stdexcept>

#include "socketrain/bytes.hpp"

namespace socketrain {

namespace {
constexpr char kMagic[4] = {'F', 'D', 'S', '1'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void validate_dataset(const FeatureDataset& data) {
  if (data.n < 1) throw std::invalid_argument("dataset: n must be >= 1");
  if (data.d < 1 || data.c < 1) throw std::invalid_argument("dataset: d and c must be >= 1");
  if (data.features.rows != data.n || data.features.cols != data.d) {
    throw std::invalid_argument("dataset: feature matrix shape mismatch");
  }
  if (static_cast<int>(data.labels.size()) != data.n) {
    throw std::invalid_argument("dataset: labels length mismatch");
  }
  for (int label : data.labels) {
    if (label < 0 || label >= data.c) {
      throw std::invalid_argument("dataset: label out of range");
    }
  }
}

void save_dataset(const FeatureDataset& data, const std::string& path) {
  validate_dataset(data);
  std::vector<std::uint8_t> buf;
  buf.reserve(20 + data.features.data.size() * 4 + data.labels.size() * 4);
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u32le(buf, kVersion);
  put_u32le(buf, static_cast<std::uint32_t>(data.n));
  put_u32le(buf, static_cast<std::uint32_t>(data.d));
  put_u32le(buf, static_cast<std::uint32_t>(data.c));
  for (float v : data.features.data) put_f32le(buf, v);
  for (int label : data.labels) put_u32le(buf, static_cast<std::uint32_t>(label));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("dataset: cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("dataset: short write to '" + path + "'");
}

FeatureDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("dataset: cannot open '" + path + "'");
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());

  if (buf.size() < 4 || !std::equal(kMagic, kMagic + 4, buf.begin())) {
    throw std::runtime_error("dataset: bad magic in '" + path + "'");
  }
  ByteReader reader(buf.data() + 4, buf.size() - 4);
  std::uint32_t version, n, d, c;
  try {
    version = reader.u32le();
    n = reader.u32le();
    d = reader.u32le();
    c = reader.u32le();
  } catch (const std::runtime_error&) {
    throw std::runtime_error("dataset: truncated header in '" + path + "'");
  }
  if (version != kVersion) {
    throw std::runtime_error("dataset: unsupported version " + std::to_string(version));
  }
  if (n == 0 || d == 0 || c == 0) {
    throw std::runtime_error("dataset: zero-sized dimension in header");
  }

  const std::size_t expected = static_cast<std::size_t>(n) * d * 4 + static_cast<std::size_t>(n) * 4;
  if (reader.remaining() < expected) {
    throw std::runtime_error("dataset: truncated file '" + path + "'");
  }
  if (reader.remaining() > expected) {
    throw std::runtime_error("dataset: trailing bytes in '" + path + "'");
  }

  FeatureDataset data;
  data.n = static_cast<int>(n);
  data.d = static_cast<int>(d);
  data.c = static_cast<int>(c);
  data.features = Matrix(data.n, data.d);
  for (float& v : data.features.data) v = reader.f32le();
  data.labels.resize(data.n);
  for (int& label : data.labels) {
    const std::uint32_t raw = reader.u32le();
    if (raw >= c) {
      throw std::runtime_error("dataset: label " + std::to_string(raw) + " >= C in '" + path + "'");
    }
    label = static_cast<int>(raw);
  }
  return data;
}

}  // namespace socketrain
