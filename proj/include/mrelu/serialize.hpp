#pragma once

// Network file format, version 1.
//
// Binary (all integers and doubles little-endian):
//   "MRNN"                      4-byte magic
//   u32 version                 currently 1
//   u8  weight_mode             0 = strict, 1 = relaxed
//   u64 L                       number of hidden layers
//   u64 p[0..L+1]               widths
//   for i in 0..L:              weight matrix W_i
//     u64 n_i; n_i x (u32 row, u32 col, f64 value)
//   for i in 1..L:              shift vector v_i, nonzeros only
//     u64 k_i; k_i x (u32 index, f64 value)
//
// JSON (canonical text form, same content):
//   {"format":"mrelu-network","version":1,"weight_mode":"strict","depth":L,
//    "widths":[...],"weights":[[[row,col,value],...],...],
//    "shifts":[[[index,value],...],...]}

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrelu/error.hpp"
#include "mrelu/network.hpp"

namespace mrelu {

inline constexpr std::uint32_t kFormatVersion = 1;

namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    std::array<unsigned char, sizeof(T)> raw{};
    std::memcpy(raw.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    bytes_.insert(bytes_.end(), raw.begin(), raw.end());
  }
  void put_raw(const char* s, std::size_t n) { bytes_.insert(bytes_.end(), s, s + n); }
  std::vector<unsigned char> take() { return std::move(bytes_); }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > bytes_.size()) throw ParseError(std::string("truncated stream reading ") + what, pos_);
    std::array<unsigned char, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    T value;
    std::memcpy(&value, raw.data(), sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> serialize(const Network& net) {
  detail::ByteWriter w;
  w.put_raw("MRNN", 4);
  w.put<std::uint32_t>(kFormatVersion);
  w.put<std::uint8_t>(net.mode() == WeightMode::strict ? 0 : 1);
  w.put<std::uint64_t>(net.depth());
  for (std::size_t p : net.arch().widths) w.put<std::uint64_t>(p);
  for (const auto& m : net.weights()) {
    w.put<std::uint64_t>(m.entries().size());
    for (const Entry& e : m.entries()) {
      w.put<std::uint32_t>(e.row);
      w.put<std::uint32_t>(e.col);
      w.put<double>(e.value);
    }
  }
  for (const auto& v : net.shifts()) {
    std::uint64_t count = 0;
    for (double x : v) count += x != 0.0;
    w.put<std::uint64_t>(count);
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (v[k] == 0.0) continue;
      w.put<std::uint32_t>(static_cast<std::uint32_t>(k));
      w.put<double>(v[k]);
    }
  }
  return w.take();
}

inline Network deserialize(std::span<const unsigned char> bytes) {
  detail::ByteReader r(bytes);
  std::array<char, 4> magic{};
  for (char& c : magic) c = static_cast<char>(r.get<std::uint8_t>("magic"));
  if (std::string(magic.data(), 4) != "MRNN") throw ParseError("bad magic, not a network file", 0);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kFormatVersion) {
    throw ParseError("unsupported format version " + std::to_string(version) + " (reader supports " +
                         std::to_string(kFormatVersion) + ")",
                     4);
  }
  const auto mode_byte = r.get<std::uint8_t>("weight mode");
  if (mode_byte > 1) throw ParseError("invalid weight mode", r.pos() - 1);
  const WeightMode mode = mode_byte == 0 ? WeightMode::strict : WeightMode::relaxed;
  Architecture arch;
  arch.depth = r.get<std::uint64_t>("depth");
  if (arch.depth > (1u << 24)) throw ParseError("implausible depth", r.pos() - 8);
  for (std::size_t i = 0; i < arch.depth + 2; ++i) {
    const auto p = r.get<std::uint64_t>("width");
    if (p == 0 || p > (1ull << 32)) throw ParseError("invalid width", r.pos() - 8);
    arch.widths.push_back(p);
  }
  std::vector<SparseMatrix> weights;
  for (std::size_t i = 0; i <= arch.depth; ++i) {
    SparseMatrix m(arch.widths[i + 1], arch.widths[i]);
    const auto n = r.get<std::uint64_t>("entry count");
    for (std::uint64_t k = 0; k < n; ++k) {
      const std::size_t at = r.pos();
      const auto row = r.get<std::uint32_t>("row");
      const auto col = r.get<std::uint32_t>("col");
      const auto value = r.get<double>("value");
      if (row >= m.rows() || col >= m.cols()) throw ParseError("weight entry out of range", at);
      m.add(row, col, value);
    }
    m.finalize();
    weights.push_back(std::move(m));
  }
  std::vector<std::vector<double>> shifts;
  for (std::size_t i = 1; i <= arch.depth; ++i) {
    std::vector<double> v(arch.widths[i], 0.0);
    const auto n = r.get<std::uint64_t>("shift count");
    for (std::uint64_t k = 0; k < n; ++k) {
      const std::size_t at = r.pos();
      const auto idx = r.get<std::uint32_t>("shift index");
      const auto value = r.get<double>("shift value");
      if (idx >= v.size()) throw ParseError("shift index out of range", at);
      v[idx] = value;
    }
    shifts.push_back(std::move(v));
  }
  if (!r.done()) throw ParseError("trailing bytes after network", r.pos());
  return Network(std::move(arch), std::move(weights), std::move(shifts), mode);
}

inline nlohmann::json to_json(const Network& net) {
  nlohmann::json j;
  j["format"] = "mrelu-network";
  j["version"] = kFormatVersion;
  j["weight_mode"] = to_string(net.mode());
  j["depth"] = net.depth();
  j["widths"] = net.arch().widths;
  auto& ws = j["weights"] = nlohmann::json::array();
  for (const auto& m : net.weights()) {
    auto layer = nlohmann::json::array();
    for (const Entry& e : m.entries()) layer.push_back({e.row, e.col, e.value});
    ws.push_back(std::move(layer));
  }
  auto& ss = j["shifts"] = nlohmann::json::array();
  for (const auto& v : net.shifts()) {
    auto layer = nlohmann::json::array();
    for (std::size_t k = 0; k < v.size(); ++k)
      if (v[k] != 0.0) layer.push_back({k, v[k]});
    ss.push_back(std::move(layer));
  }
  return j;
}

inline Network from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "mrelu-network") throw ParseError("not a network document", 0);
    const auto version = j.at("version").get<std::uint32_t>();
    if (version != kFormatVersion) throw ParseError("unsupported format version " + std::to_string(version), 0);
    const std::string mode = j.at("weight_mode");
    if (mode != "strict" && mode != "relaxed") throw ParseError("invalid weight_mode", 0);
    Architecture arch;
    arch.depth = j.at("depth");
    arch.widths = j.at("widths").get<std::vector<std::size_t>>();
    if (!arch.valid()) throw ParseError("invalid architecture", 0);
    const auto& ws = j.at("weights");
    const auto& ss = j.at("shifts");
    if (ws.size() != arch.depth + 1 || ss.size() != arch.depth) throw ParseError("layer count mismatch", 0);
    std::vector<SparseMatrix> weights;
    for (std::size_t i = 0; i <= arch.depth; ++i) {
      SparseMatrix m(arch.widths[i + 1], arch.widths[i]);
      for (const auto& e : ws[i]) {
        const auto row = e.at(0).get<std::size_t>();
        const auto col = e.at(1).get<std::size_t>();
        if (row >= m.rows() || col >= m.cols()) throw ParseError("weight entry out of range", i);
        m.add(row, col, e.at(2).get<double>());
      }
      m.finalize();
      weights.push_back(std::move(m));
    }
    std::vector<std::vector<double>> shifts;
    for (std::size_t i = 0; i < arch.depth; ++i) {
      std::vector<double> v(arch.widths[i + 1], 0.0);
      for (const auto& e : ss[i]) {
        const auto idx = e.at(0).get<std::size_t>();
        if (idx >= v.size()) throw ParseError("shift index out of range", i);
        v[idx] = e.at(1).get<double>();
      }
      shifts.push_back(std::move(v));
    }
    return Network(std::move(arch), std::move(weights), std::move(shifts),
                   mode == "strict" ? WeightMode::strict : WeightMode::relaxed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed network JSON: ") + e.what(), 0);
  }
}

inline void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  if (path.size() > 5 && path.ends_with(".json")) {
    out << to_json(net).dump(1) << '\n';
  } else {
    const auto bytes = serialize(net);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw Error("write failed for " + path);
}

inline Network load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (path.size() > 5 && path.ends_with(".json")) {
    try {
      return from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), e.byte);
    }
  }
  return deserialize(bytes);
}

}  // namespace mrelu
