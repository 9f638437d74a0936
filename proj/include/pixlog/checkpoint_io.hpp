#pragma once

// Checkpoint container format:
//   bytes 0..3   magic "PXLG"
//   bytes 4..7   format version, little-endian u32
//   bytes 8..15  header length in bytes, little-endian u64
//   header       UTF-8 text: spec line, seed, epochs, optional label names,
//                then one "param <name> <shape>" line per tensor
//   payload      raw little-endian float32 values, concatenated in header
//                table order
// The payload is written byte-for-byte from the in-memory floats, so a
// save/load round-trip is bit-exact.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pixlog/common.hpp"
#include "pixlog/model.hpp"

namespace pixlog {

inline constexpr char kCheckpointMagic[4] = {'P', 'X', 'L', 'G'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}
inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt,
                            const std::filesystem::path& path) {
  ckpt.validate();
  Graph g(ckpt.spec);

  std::string header;
  header += "spec " + ckpt.spec.serialize() + "\n";
  header += "seed " + std::to_string(ckpt.seed) + "\n";
  header += "epochs " + std::to_string(ckpt.epochs) + "\n";
  if (!ckpt.labels.empty()) {
    header += "labels";
    for (const auto& l : ckpt.labels) header += " " + l;
    header += "\n";
  }
  for (std::size_t i = 0; i < g.params().size(); ++i)
    header += "param " + g.params()[i].name + " " +
              shape_to_string(g.params()[i].shape) + "\n";

  std::string blob;
  blob.append(kCheckpointMagic, 4);
  detail::put_u32(blob, kCheckpointVersion);
  detail::put_u64(blob, header.size());
  blob += header;
  for (const auto& t : ckpt.params) {
    for (float f : t.data) {
      const auto u = std::bit_cast<std::uint32_t>(f);
      detail::put_u32(blob, u);
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("short write: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (blob.size() < 16) throw FormatError("checkpoint truncated: " + path.string());
  if (std::memcmp(blob.data(), kCheckpointMagic, 4) != 0)
    throw FormatError("bad checkpoint magic in " + path.string());
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  const std::uint32_t version = detail::get_u32(bytes + 4);
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version));
  const std::uint64_t header_len = detail::get_u64(bytes + 8);
  if (16 + header_len > blob.size())
    throw FormatError("checkpoint header extends past end of file");

  Checkpoint ckpt;
  std::vector<std::pair<std::string, std::vector<std::int64_t>>> table;
  {
    std::istringstream hs(blob.substr(16, header_len));
    std::string line;
    bool have_spec = false;
    while (std::getline(hs, line)) {
      if (line.empty()) continue;
      auto sp = line.find(' ');
      std::string key = line.substr(0, sp);
      std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
      if (key == "spec") {
        ckpt.spec = ModelSpec::parse(rest);
        have_spec = true;
      } else if (key == "seed") {
        ckpt.seed = parse_uint64(rest, "seed");
      } else if (key == "epochs") {
        ckpt.epochs = parse_int(rest, "epochs");
      } else if (key == "labels") {
        for (auto n : split(rest, ' '))
          if (!n.empty()) ckpt.labels.emplace_back(n);
      } else if (key == "param") {
        auto f = split(rest, ' ');
        if (f.size() != 2) throw FormatError("bad param line '" + line + "'");
        std::vector<std::int64_t> shape;
        for (auto d : split(f[1], 'x')) shape.push_back(parse_int(d, "shape"));
        table.emplace_back(std::string(f[0]), std::move(shape));
      } else {
        throw FormatError("unknown checkpoint header key '" + key + "'");
      }
    }
    if (!have_spec) throw FormatError("checkpoint header missing spec");
  }

  std::uint64_t total = 0;
  for (const auto& [name, shape] : table)
    total += static_cast<std::uint64_t>(Tensor::numel_of(shape));
  const std::uint64_t want = 16 + header_len + total * 4;
  if (blob.size() != want)
    throw FormatError("checkpoint payload length " +
                      std::to_string(blob.size() - 16 - header_len) +
                      " inconsistent with shape table (expected " +
                      std::to_string(total * 4) + " bytes)");

  const unsigned char* p = bytes + 16 + header_len;
  for (const auto& [name, shape] : table) {
    Tensor t(shape);
    for (auto& v : t.data) {
      v = std::bit_cast<float>(detail::get_u32(p));
      p += 4;
    }
    ckpt.params.push_back(std::move(t));
  }
  ckpt.validate();  // also confirms table order/shapes match the spec
  {
    Graph g(ckpt.spec);
    for (std::size_t i = 0; i < table.size(); ++i)
      if (table[i].first != g.params()[i].name)
        throw FormatError("checkpoint parameter table does not match spec: '" +
                          table[i].first + "' vs '" + g.params()[i].name + "'");
  }
  return ckpt;
}

}  // namespace pixlog
