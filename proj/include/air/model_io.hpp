#pragma once

#include <cstdint>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "air/data_io.hpp"
#include "air/group_operator.hpp"

namespace air {

/// "AIRW", u32 version=1, u32 p, u32 C, then p*C little-endian f32,
/// column-major by class (all of class 0 first).
inline void write_model(std::ostream& os, const Weights& w) {
  os.write("AIRW", 4);
  detail::put_le<std::uint32_t>(os, 1);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(w.rows()));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(w.cols()));
  for (std::size_t c = 0; c < w.cols(); ++c)
    for (std::size_t j = 0; j < w.rows(); ++j) detail::put_f32(os, static_cast<float>(w(j, c)));
}

inline Weights read_model(const std::vector<unsigned char>& bytes, const std::string& what = "model") {
  detail::ByteReader r(bytes, what);
  r.magic("AIRW");
  const auto version = r.le<std::uint32_t>();
  require(version == 1, ErrorKind::parse, what + ": unsupported version " + std::to_string(version));
  const auto p = r.le<std::uint32_t>();
  const auto C = r.le<std::uint32_t>();
  r.need(static_cast<std::size_t>(p) * C * 4);
  Weights w(p, C);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t j = 0; j < p; ++j) w(j, c) = static_cast<double>(r.f32_le());
  return w;
}

inline void save_model(const std::string& path, const Weights& w) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), ErrorKind::io, "cannot write '" + path + "'");
  write_model(os, w);
}

inline Weights load_model(const std::string& path) { return read_model(detail::read_file(path), path); }

}  // namespace air
