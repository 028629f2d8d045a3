/*
 * serialize.hh
 *
 * versioned binary persistence for the symbolic model and synthesized
 * controllers.  Every file embeds the configuration hash it was built
 * from; loading refuses on a mismatch so artifacts can never silently
 * pair with a different scenario than the one that produced them
 */

#pragma once

#include <freqsynth/abstraction.hh>
#include <freqsynth/io.hh>
#include <freqsynth/synthesis.hh>

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>

namespace freqsynth {

inline constexpr std::uint32_t kModelMagic = 0x4d535146;      /* "FQSM" little-endian */
inline constexpr std::uint32_t kControllerMagic = 0x43535146; /* "FQSC" little-endian */
inline constexpr std::uint32_t kFormatVersion = 1;

namespace detail {

struct ByteWriter {
  std::string buf;

  void raw(const void* p, std::size_t n) { buf.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void vec4(const std::array<double, 4>& v) {
    for (double x : v)
      f64(x);
  }
};

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;
  std::string what;

  ByteReader(const std::string& b, std::string w) : buf(b), what(std::move(w)) {}

  void raw(void* p, std::size_t n) {
    if (pos + n > buf.size())
      throw std::runtime_error(what + ": truncated file");
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    std::uint64_t n = u64();
    if (pos + n > buf.size())
      throw std::runtime_error(what + ": truncated file");
    std::string s(buf, pos, n);
    pos += n;
    return s;
  }
  std::array<double, 4> vec4() {
    std::array<double, 4> v;
    for (double& x : v)
      x = f64();
    return v;
  }
  void done() {
    if (pos != buf.size())
      throw std::runtime_error(what + ": trailing bytes after payload");
  }
};

inline void check_header(ByteReader& r, std::uint32_t magic, std::uint64_t expected_hash) {
  if (r.u32() != magic)
    throw std::runtime_error(r.what + ": not a recognized artifact file");
  std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw std::runtime_error(r.what + ": unsupported format version " + std::to_string(version));
  std::uint64_t h = r.u64();
  if (h != expected_hash)
    throw std::runtime_error(r.what + ": config hash mismatch (file " + std::to_string(h) +
                             ", expected " + std::to_string(expected_hash) +
                             ") - rebuild the artifact from the current configuration");
}

inline void write_grid(ByteWriter& w, const GridSpec& g) {
  w.vec4(g.lb);
  w.vec4(g.ub);
  w.vec4(g.eta);
}

inline GridSpec read_grid(ByteReader& r) {
  GridSpec g;
  g.lb = r.vec4();
  g.ub = r.vec4();
  g.eta = r.vec4();
  g.finalize();
  return g;
}

inline void write_inputs(ByteWriter& w, const InputGrid& in) {
  w.u64(in.levels.size());
  for (double v : in.levels)
    w.f64(v);
}

inline InputGrid read_inputs(ByteReader& r) {
  InputGrid in;
  std::uint64_t n = r.u64();
  if (n > 253)
    throw std::runtime_error(r.what + ": implausible input count");
  in.levels.reserve(n);
  for (std::uint64_t j = 0; j < n; j++)
    in.levels.push_back(r.f64());
  in.validate();
  return in;
}

}  // namespace detail

inline std::string model_bytes(const SymbolicModel& m, std::uint64_t config_hash) {
  detail::ByteWriter w;
  w.u32(kModelMagic);
  w.u32(kFormatVersion);
  w.u64(config_hash);
  detail::write_grid(w, m.grid);
  detail::write_inputs(w, m.inputs);
  w.f64(m.tau);
  w.f64(m.w_lo);
  w.f64(m.w_hi);
  for (int i = 0; i < 4; i++)
    for (int j = 0; j < 4; j++)
      w.f64(m.E(i, j));
  for (const auto& k : m.K)
    for (int i = 0; i < 4; i++)
      w.f64(k(i));
  for (int i = 0; i < 4; i++)
    w.f64(m.radius(i));
  w.u64(m.trans.size());
  w.raw(m.trans.data(), m.trans.size());
  return std::move(w.buf);
}

inline void save_model(const std::string& path, const SymbolicModel& m,
                       std::uint64_t config_hash) {
  write_file_atomic(path, model_bytes(m, config_hash));
}

inline SymbolicModel model_from_bytes(const std::string& bytes, std::uint64_t expected_hash,
                                      const std::string& what = "model") {
  detail::ByteReader r(bytes, what);
  detail::check_header(r, kModelMagic, expected_hash);
  SymbolicModel m;
  m.grid = detail::read_grid(r);
  m.inputs = detail::read_inputs(r);
  m.tau = r.f64();
  m.w_lo = r.f64();
  m.w_hi = r.f64();
  for (int i = 0; i < 4; i++)
    for (int j = 0; j < 4; j++)
      m.E(i, j) = r.f64();
  m.K.resize(m.inputs.size());
  for (auto& k : m.K)
    for (int i = 0; i < 4; i++)
      k(i) = r.f64();
  for (int i = 0; i < 4; i++)
    m.radius(i) = r.f64();
  std::uint64_t n = r.u64();
  if (n != m.grid.n_cells() * m.inputs.size() * kRecBytes)
    throw std::runtime_error(what + ": transition table size does not match the grid");
  m.trans.resize(n);
  r.raw(m.trans.data(), n);
  r.done();
  return m;
}

inline SymbolicModel load_model(const std::string& path, std::uint64_t expected_hash) {
  return model_from_bytes(read_file(path), expected_hash, "model " + path);
}

inline std::string controller_bytes(const Controller& c, std::uint64_t config_hash) {
  detail::ByteWriter w;
  w.u32(kControllerMagic);
  w.u32(kFormatVersion);
  w.u64(config_hash);
  w.str(c.kind);
  detail::write_grid(w, c.grid);
  detail::write_inputs(w, c.inputs);
  std::size_t n = c.grid.n_cells();
  w.u64(n);
  w.u64(c.winning.words().size());
  w.raw(c.winning.words().data(), c.winning.words().size() * sizeof(std::uint64_t));
  w.raw(c.policy.data(), c.policy.size());
  w.raw(c.rank.data(), c.rank.size() * sizeof(std::uint32_t));
  return std::move(w.buf);
}

inline void save_controller(const std::string& path, const Controller& c,
                            std::uint64_t config_hash) {
  write_file_atomic(path, controller_bytes(c, config_hash));
}

inline Controller controller_from_bytes(const std::string& bytes, std::uint64_t expected_hash,
                                        const std::string& what = "controller") {
  detail::ByteReader r(bytes, what);
  detail::check_header(r, kControllerMagic, expected_hash);
  Controller c;
  c.kind = r.str();
  c.grid = detail::read_grid(r);
  c.inputs = detail::read_inputs(r);
  std::uint64_t n = r.u64();
  if (n != c.grid.n_cells())
    throw std::runtime_error(what + ": cell count does not match the grid");
  std::uint64_t words = r.u64();
  c.winning = CellSet(n);
  if (words != c.winning.words().size())
    throw std::runtime_error(what + ": winning-set size does not match the grid");
  r.raw(c.winning.words().data(), words * sizeof(std::uint64_t));
  c.policy.resize(n);
  r.raw(c.policy.data(), n);
  c.rank.resize(n);
  r.raw(c.rank.data(), n * sizeof(std::uint32_t));
  r.done();
  return c;
}

inline Controller load_controller(const std::string& path, std::uint64_t expected_hash) {
  return controller_from_bytes(read_file(path), expected_hash, "controller " + path);
}

}  // namespace freqsynth
