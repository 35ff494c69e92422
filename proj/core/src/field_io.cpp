/*=========================================================================
 *
 *  Copyright the geoflow project contributors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *         http://www.apache.org/licenses/LICENSE-2.0.txt
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 *
 *=========================================================================*/
#include "geoflow/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace geoflow {

namespace {

constexpr char kMagic[8] = {'G', 'E', 'O', 'F', 'L', 'O', 'W', '1'};

void put_u8(std::string& buf, std::uint8_t v) {
  buf.push_back(static_cast<char>(v));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& buf, double v) {
  put_u64(buf, std::bit_cast<std::uint64_t>(v));
}

void put_f32(std::string& buf, float v) {
  put_u32(buf, std::bit_cast<std::uint32_t>(v));
}

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xFF));
  buf.push_back(static_cast<char>((v >> 8) & 0xFF));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw Error("truncated_payload",
                  path + ": file ends before the declared payload");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i)
      v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[pos++]))
           << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos++]))
           << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos++]))
           << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  float f32() { return std::bit_cast<float>(u32()); }
};

struct Header {
  FieldKind kind;
  FieldDtype dtype;
  GridSpec grid;
  std::uint32_t ncomp;
};

void write_file(const std::string& path, const std::string& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io_error", "cannot open " + path + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("io_error", "write failed for " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  return buf;
}

std::string header_bytes(FieldKind kind, FieldDtype dtype, const GridSpec& g,
                         std::uint32_t ncomp) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put_u8(buf, static_cast<std::uint8_t>(kind));
  put_u8(buf, static_cast<std::uint8_t>(dtype));
  put_u8(buf, static_cast<std::uint8_t>(g.dim));
  put_u8(buf, 0);
  put_u32(buf, ncomp);
  for (int a = 0; a < g.dim; ++a)
    put_u32(buf, static_cast<std::uint32_t>(g.dims[a]));
  for (int a = 0; a < g.dim; ++a) put_f64(buf, g.spacing[a]);
  for (int a = 0; a < g.dim; ++a) put_f64(buf, g.origin[a]);
  return buf;
}

Header read_header(Reader& r, FieldKind expected_kind) {
  r.need(sizeof(kMagic));
  if (std::memcmp(r.buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw Error("bad_magic", r.path + ": not a GEOFLOW1 field file");
  r.pos = sizeof(kMagic);
  Header h;
  const std::uint8_t kind = r.u8();
  if (kind > 3)
    throw Error("kind_mismatch", r.path + ": unknown field kind");
  h.kind = static_cast<FieldKind>(kind);
  const std::uint8_t dtype = r.u8();
  if (dtype > 2)
    throw Error("dtype_mismatch", r.path + ": unknown dtype");
  h.dtype = static_cast<FieldDtype>(dtype);
  const std::uint8_t dim = r.u8();
  r.u8();  // reserved
  if (dim != 2 && dim != 3)
    throw Error("bad_magic", r.path + ": unsupported dimensionality");
  h.grid.dim = dim;
  h.ncomp = r.u32();
  for (int a = 0; a < dim; ++a) h.grid.dims[a] = static_cast<int>(r.u32());
  if (dim == 2) h.grid.dims[2] = 1;
  for (int a = 0; a < dim; ++a) h.grid.spacing[a] = r.f64();
  for (int a = 0; a < dim; ++a) h.grid.origin[a] = r.f64();
  h.grid.validate();
  if (h.kind != expected_kind)
    throw Error("kind_mismatch", r.path + ": field kind does not match reader");
  return h;
}

void append_payload(std::string& buf, const double* values, std::size_t n,
                    FieldDtype dtype) {
  if (dtype == FieldDtype::F64) {
    for (std::size_t i = 0; i < n; ++i) put_f64(buf, values[i]);
  } else if (dtype == FieldDtype::F32) {
    for (std::size_t i = 0; i < n; ++i)
      put_f32(buf, static_cast<float>(values[i]));
  } else {
    throw Error("dtype_mismatch", "real fields store f32 or f64");
  }
}

void read_payload(Reader& r, double* values, std::size_t n, FieldDtype dtype) {
  if (dtype == FieldDtype::F64) {
    for (std::size_t i = 0; i < n; ++i) values[i] = r.f64();
  } else if (dtype == FieldDtype::F32) {
    for (std::size_t i = 0; i < n; ++i)
      values[i] = static_cast<double>(r.f32());
  } else {
    throw Error("dtype_mismatch", r.path + ": real field stored as integers");
  }
}

std::pair<int, int> plane_axes(int axis) {
  switch (axis) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    case 2: return {0, 1};
    default: throw Error("bad_slice", "slice axis must be 0, 1, or 2");
  }
}

template <typename Fetch>
void write_pnm(const std::string& path, const GridSpec& g, int axis, int slice,
               bool color, Fetch fetch) {
  if (g.dim == 2) {
    axis = 2;
    slice = 0;
  }
  if (axis < 0 || axis > 2 || slice < 0 || slice >= g.dims[axis])
    throw Error("bad_slice", "slice index out of range");
  const auto [ax, ay] = plane_axes(axis);
  const int w = g.dims[ax];
  const int h = g.dims[ay];
  std::string buf;
  buf += color ? "P6\n" : "P5\n";
  buf += std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  int idx[3];
  idx[axis] = slice;
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i) {
      idx[ax] = i;
      idx[ay] = j;
      fetch(idx, buf);
    }
  write_file(path, buf);
}

}  // namespace

void write_scalar(const std::string& path, const ScalarField& f,
                  FieldDtype dtype) {
  f.grid.validate();
  std::string buf = header_bytes(FieldKind::Scalar, dtype, f.grid, 1);
  append_payload(buf, f.values.data(), f.values.size(), dtype);
  write_file(path, buf);
}

ScalarField read_scalar(const std::string& path) {
  const std::string buf = read_file(path);
  Reader r{buf, 0, path};
  const Header h = read_header(r, FieldKind::Scalar);
  if (h.ncomp != 1)
    throw Error("kind_mismatch", path + ": scalar field with ncomp != 1");
  ScalarField f(h.grid);
  read_payload(r, f.values.data(), f.values.size(), h.dtype);
  return f;
}

void write_vector(const std::string& path, const VectorField& v,
                  FieldDtype dtype) {
  v.grid.validate();
  std::string buf = header_bytes(FieldKind::Vector, dtype, v.grid,
                                 static_cast<std::uint32_t>(v.ncomp));
  append_payload(buf, v.data.data(), v.data.size(), dtype);
  write_file(path, buf);
}

VectorField read_vector(const std::string& path) {
  const std::string buf = read_file(path);
  Reader r{buf, 0, path};
  const Header h = read_header(r, FieldKind::Vector);
  VectorField v(h.grid, static_cast<int>(h.ncomp));
  read_payload(r, v.data.data(), v.data.size(), h.dtype);
  return v;
}

void write_map(const std::string& path, const DeformationMap& m,
               FieldDtype dtype) {
  m.grid.validate();
  std::string buf = header_bytes(FieldKind::Map, dtype, m.grid,
                                 static_cast<std::uint32_t>(m.grid.dim));
  append_payload(buf, m.coords.data(), m.coords.size(), dtype);
  write_file(path, buf);
}

DeformationMap read_map(const std::string& path) {
  const std::string buf = read_file(path);
  Reader r{buf, 0, path};
  const Header h = read_header(r, FieldKind::Map);
  if (h.ncomp != static_cast<std::uint32_t>(h.grid.dim))
    throw Error("kind_mismatch", path + ": map with ncomp != dim");
  DeformationMap m(h.grid);
  read_payload(r, m.coords.data(), m.coords.size(), h.dtype);
  return m;
}

void write_labels(const std::string& path, const LabelMap& l) {
  l.validate();
  std::string buf = header_bytes(FieldKind::Labels, FieldDtype::U16, l.grid,
                                 static_cast<std::uint32_t>(l.label_count));
  for (std::uint16_t v : l.labels) put_u16(buf, v);
  write_file(path, buf);
}

LabelMap read_labels(const std::string& path) {
  const std::string buf = read_file(path);
  Reader r{buf, 0, path};
  const Header h = read_header(r, FieldKind::Labels);
  if (h.dtype != FieldDtype::U16)
    throw Error("dtype_mismatch", path + ": labels must be stored u16");
  LabelMap l(h.grid, static_cast<int>(h.ncomp));
  for (std::uint16_t& v : l.labels) v = r.u16();
  l.validate();
  return l;
}

FieldKind read_field_kind(const std::string& path) {
  const std::string buf = read_file(path);
  Reader r{buf, 0, path};
  r.need(sizeof(kMagic) + 1);
  if (std::memcmp(r.buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw Error("bad_magic", path + ": not a GEOFLOW1 field file");
  r.pos = sizeof(kMagic);
  const std::uint8_t kind = r.u8();
  if (kind > 3) throw Error("kind_mismatch", path + ": unknown field kind");
  return static_cast<FieldKind>(kind);
}

void export_image_2d(const ScalarField& f, const std::string& path, int axis,
                     int slice) {
  const double lo = min_value(f);
  const double hi = max_value(f);
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  write_pnm(path, f.grid, axis, slice, false,
            [&](const int* idx, std::string& buf) {
              const double v = f.values[f.grid.index(idx[0], idx[1], idx[2])];
              const int g = hi > lo
                                ? static_cast<int>((v - lo) * scale + 0.5)
                                : 128;
              buf.push_back(static_cast<char>(std::min(255, std::max(0, g))));
            });
}

void export_labels_2d(const LabelMap& l, const std::string& path, int axis,
                      int slice) {
  static const std::uint8_t palette[16][3] = {
      {0, 0, 0},       {230, 25, 75},   {60, 180, 75},   {255, 225, 25},
      {0, 130, 200},   {245, 130, 48},  {145, 30, 180},  {70, 240, 240},
      {240, 50, 230},  {210, 245, 60},  {250, 190, 190}, {0, 128, 128},
      {170, 110, 40},  {255, 250, 200}, {128, 0, 0},     {170, 255, 195}};
  write_pnm(path, l.grid, axis, slice, true,
            [&](const int* idx, std::string& buf) {
              const int v = l.labels[l.grid.index(idx[0], idx[1], idx[2])] % 16;
              buf.push_back(static_cast<char>(palette[v][0]));
              buf.push_back(static_cast<char>(palette[v][1]));
              buf.push_back(static_cast<char>(palette[v][2]));
            });
}

}  // namespace geoflow
