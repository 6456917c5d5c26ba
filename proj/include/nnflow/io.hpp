#pragma once

// File formats.
//
//   field dump: one JSON header line (kind, dim, n, extent, periodic,
//     components) terminated by '\n', followed by the raw payload: float64
//     little-endian, cell-major in the grid's x-fastest order, components
//     interleaved per cell.
//
//   diagnostics CSV: header "rung_id,eps,alpha,delta,eta,name,value", one row
//     per (rung, diagnostic), values printed with %.17g.
//
// Every write is atomic: a temporary sibling is written, flushed, and renamed
// over the target.

#include "nnflow/fields.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nnflow::io {

inline void atomic_write_bytes(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("atomic_write_bytes: cannot open " + tmp.string());
    out.write(bytes.data(), (std::streamsize)bytes.size());
    out.flush();
    if (!out) throw std::runtime_error("atomic_write_bytes: short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_bytes: cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  atomic_write_bytes(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json(const std::string& path) {
  return nlohmann::json::parse(read_bytes(path));
}

namespace detail {

static_assert(sizeof(double) == 8, "field dumps assume 8-byte IEEE doubles");

inline bool little_endian_host() {
  const std::uint16_t probe = 1;
  return *reinterpret_cast<const std::uint8_t*>(&probe) == 1;
}

template <int Dim>
nlohmann::json field_header(const Grid<Dim>& g, const char* kind, int components) {
  nlohmann::json h;
  h["magic"] = "nnflow-field";
  h["version"] = 1;
  h["kind"] = kind;
  h["dim"] = Dim;
  h["components"] = components;
  h["n"] = std::vector<int>(g.n.begin(), g.n.end());
  h["extent"] = std::vector<double>(g.extent.begin(), g.extent.end());
  h["periodic"] = g.periodic;
  return h;
}

inline void append_payload(std::string& bytes, const double* data, size_t count) {
  if (!little_endian_host())
    throw std::runtime_error("field dumps require a little-endian host");
  bytes.append(reinterpret_cast<const char*>(data), count * sizeof(double));
}

template <int Dim>
Grid<Dim> grid_from_header(const nlohmann::json& h) {
  if (h.value("magic", "") != "nnflow-field" || h.value("dim", 0) != Dim)
    throw std::runtime_error("field dump: bad header");
  std::array<int, Dim> n{};
  std::array<double, Dim> extent{};
  for (int a = 0; a < Dim; ++a) {
    n[a] = h["n"][a].get<int>();
    extent[a] = h["extent"][a].get<double>();
  }
  return Grid<Dim>(n, extent, h.value("periodic", false));
}

} // namespace detail

template <int Dim> void write_field(const std::string& path, const ScalarField<Dim>& f) {
  std::string bytes = detail::field_header(*f.grid, "scalar", 1).dump();
  bytes.push_back('\n');
  detail::append_payload(bytes, f.v.data(), (size_t)f.v.size());
  atomic_write_bytes(path, bytes);
}

template <int Dim> void write_field(const std::string& path, const VectorField<Dim>& f) {
  std::string bytes = detail::field_header(*f.grid, "vector", Dim).dump();
  bytes.push_back('\n');
  const int N = f.grid->cells();
  std::vector<double> interleaved((size_t)N * Dim);
  for (int c = 0; c < N; ++c)
    for (int a = 0; a < Dim; ++a) interleaved[(size_t)c * Dim + a] = f.v(c, a);
  detail::append_payload(bytes, interleaved.data(), interleaved.size());
  atomic_write_bytes(path, bytes);
}

namespace detail {

inline std::pair<nlohmann::json, std::string> split_dump(const std::string& raw) {
  const size_t nl = raw.find('\n');
  if (nl == std::string::npos) throw std::runtime_error("field dump: missing header line");
  return {nlohmann::json::parse(raw.substr(0, nl)), raw.substr(nl + 1)};
}

} // namespace detail

// Readers bind the payload to a caller-owned grid, which must match the
// header's layout (fields refer to their grid by pointer).
template <int Dim>
ScalarField<Dim> read_scalar_field(const std::string& path, const Grid<Dim>& g) {
  auto [h, payload] = detail::split_dump(read_bytes(path));
  if (h.value("kind", "") != "scalar") throw std::runtime_error("field dump: not a scalar field");
  if (!detail::grid_from_header<Dim>(h).same_layout(g))
    throw std::runtime_error("field dump: grid layout mismatch");
  const size_t want = (size_t)g.cells() * sizeof(double);
  if (payload.size() != want) throw std::runtime_error("field dump: payload size mismatch");
  ScalarField<Dim> f(g);
  std::memcpy(f.v.data(), payload.data(), want);
  return f;
}

template <int Dim>
VectorField<Dim> read_vector_field(const std::string& path, const Grid<Dim>& g) {
  auto [h, payload] = detail::split_dump(read_bytes(path));
  if (h.value("kind", "") != "vector") throw std::runtime_error("field dump: not a vector field");
  if (!detail::grid_from_header<Dim>(h).same_layout(g))
    throw std::runtime_error("field dump: grid layout mismatch");
  const int N = g.cells();
  const size_t want = (size_t)N * Dim * sizeof(double);
  if (payload.size() != want) throw std::runtime_error("field dump: payload size mismatch");
  VectorField<Dim> f(g);
  const double* data = reinterpret_cast<const double*>(payload.data());
  for (int c = 0; c < N; ++c)
    for (int a = 0; a < Dim; ++a) f.v(c, a) = data[(size_t)c * Dim + a];
  return f;
}

// ---------------------------------------------------------------------------
// Diagnostics CSV
// ---------------------------------------------------------------------------

struct DiagnosticsRow {
  int rung_id = 0;
  double eps = 0.0, alpha = 0.0, delta = 0.0, eta = 0.0;
  std::string name;
  double value = 0.0;
};

inline std::string diagnostics_csv(const std::vector<DiagnosticsRow>& rows) {
  std::string out = "rung_id,eps,alpha,delta,eta,name,value\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%s,%.17g\n", r.rung_id, r.eps,
                  r.alpha, r.delta, r.eta, r.name.c_str(), r.value);
    out += buf;
  }
  return out;
}

inline void write_diagnostics_csv(const std::string& path,
                                  const std::vector<DiagnosticsRow>& rows) {
  atomic_write_bytes(path, diagnostics_csv(rows));
}

} // namespace nnflow::io
