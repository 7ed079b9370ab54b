#pragma once

// Spinor checkpoint container:
//   line 1  "ATOMLASER-SPINOR 1"
//   line 2  one-line JSON header: x_min, x_max, n_points, time, components
//           (sublevels in storage order), encoding
//   rest    for each component in order, n_points (re, im) pairs as
//           IEEE-754 float64 little-endian

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "atomlaser/errors.hpp"
#include "atomlaser/gpe_solver.hpp"

namespace atomlaser {

inline constexpr const char* kCheckpointMagic = "ATOMLASER-SPINOR 1";

namespace detail {

inline void put_f64_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

inline double get_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

// Writes to a sibling temporary and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorKind::precondition, "cannot open " + tmp.string() + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error(ErrorKind::precondition, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline std::string encode_checkpoint(const SpinorField& s) {
  nlohmann::json header = {{"x_min", s.grid.x_min},
                           {"x_max", s.grid.x_max},
                           {"n_points", s.grid.n_points},
                           {"time", s.time},
                           {"components", {-1, 0, 1}},
                           {"encoding", "float64-le re,im"}};
  std::string out = std::string(kCheckpointMagic) + "\n" + header.dump() + "\n";
  out.reserve(out.size() + 3 * 16 * s.grid.n_points);
  for (const auto& comp : s.components) {
    if (comp.size() != s.grid.n_points) throw Error(ErrorKind::grid_mismatch, "component size differs from grid");
    for (const auto& v : comp) {
      detail::put_f64_le(out, v.real());
      detail::put_f64_le(out, v.imag());
    }
  }
  return out;
}

inline SpinorField decode_checkpoint(const std::string& bytes) {
  auto fail = [](const std::string& why) { return Error(ErrorKind::precondition, "bad checkpoint: " + why); };
  const auto l1 = bytes.find('\n');
  if (l1 == std::string::npos || bytes.compare(0, l1, kCheckpointMagic) != 0) throw fail("missing magic line");
  const auto l2 = bytes.find('\n', l1 + 1);
  if (l2 == std::string::npos) throw fail("missing header line");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(l1 + 1, l2 - l1 - 1));
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  if (!h.contains("n_points") || !h.contains("x_min") || !h.contains("x_max") || !h.contains("time")) {
    throw fail("header lacks grid or time");
  }
  if (h.value("encoding", "") != "float64-le re,im") throw fail("unknown encoding");
  Grid1D grid{h["x_min"].get<double>(), h["x_max"].get<double>(), h["n_points"].get<std::size_t>()};
  grid.validate();
  const std::size_t payload = bytes.size() - (l2 + 1);
  if (payload != 3 * 16 * grid.n_points) throw fail("payload size does not match the grid");
  SpinorField s(grid, h["time"].get<double>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + l2 + 1;
  for (auto& comp : s.components) {
    for (auto& v : comp) {
      v = cplx(detail::get_f64_le(p), detail::get_f64_le(p + 8));
      p += 16;
    }
  }
  return s;
}

inline void write_checkpoint(const std::filesystem::path& path, const SpinorField& s) {
  detail::write_file_atomic(path, encode_checkpoint(s));
}

inline SpinorField read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::precondition, "cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace atomlaser
