// Copyright 2026 The sstraj Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sstraj/array_io.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace sstraj {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'S', 'T'};

template <class T>
void put_le(std::vector<char>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <class T>
T get_le(const std::vector<char>& in, std::size_t& pos) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>;
  if (pos + sizeof(T) > in.size()) fail(Errc::format, "truncated array file");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bits |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i));
  pos += sizeof(T);
  return std::bit_cast<T>(bits);
}

std::size_t doubles_per_element(DType t) { return t == DType::complex128 ? 2 : 1; }

void expect(const Array& a, DType dtype, std::size_t rank, const char* what) {
  if (a.dtype != dtype || a.dims.size() != rank)
    fail(Errc::format, std::string("array does not hold ") + what);
}

}  // namespace

std::uint64_t Array::elements() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<char> encode_array(const Array& a) {
  if (a.dims.size() > 255) fail(Errc::invalid_argument, "array rank exceeds 255");
  if (a.values.size() != a.elements() * doubles_per_element(a.dtype))
    fail(Errc::invalid_argument, "array payload does not match its dimensions");
  std::vector<char> out(kMagic, kMagic + 4);
  out.reserve(8 + 8 * a.dims.size() + 8 * a.values.size());
  put_le<std::uint16_t>(out, kArrayFormatVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(a.dtype));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(a.dims.size()));
  for (auto d : a.dims) put_le<std::uint64_t>(out, d);
  for (double v : a.values) put_le<double>(out, v);
  return out;
}

Array decode_array(const std::vector<char>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(Errc::format, "not an LSST array file (bad magic)");
  std::size_t pos = 4;
  const auto version = get_le<std::uint16_t>(bytes, pos);
  if (version != kArrayFormatVersion) fail(Errc::format, "unsupported array format version " + std::to_string(version));
  const auto tag = get_le<std::uint8_t>(bytes, pos);
  if (tag != 1 && tag != 2) fail(Errc::format, "unknown dtype tag " + std::to_string(tag));
  Array a;
  a.dtype = static_cast<DType>(tag);
  const auto rank = get_le<std::uint8_t>(bytes, pos);
  for (int i = 0; i < rank; ++i) a.dims.push_back(get_le<std::uint64_t>(bytes, pos));
  const std::uint64_t count = a.elements() * doubles_per_element(a.dtype);
  if (bytes.size() - pos != count * 8) fail(Errc::format, "array payload size does not match header");
  a.values.resize(count);
  for (auto& v : a.values) v = get_le<double>(bytes, pos);
  return a;
}

void write_array(const std::filesystem::path& path, const Array& a) {
  const auto bytes = encode_array(a);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(Errc::io, "cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(Errc::io, "failed writing " + path.string());
}

Array read_array(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Errc::io, "cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_array(bytes);
}

namespace {

Array complex_array(const CMatrix& m, std::vector<std::uint64_t> dims) {
  Array a;
  a.dtype = DType::complex128;
  a.dims = std::move(dims);
  a.values.resize(static_cast<std::size_t>(m.size()) * 2);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const auto at = static_cast<std::size_t>(2 * (i * m.cols() + j));
      a.values[at] = m(i, j).real();
      a.values[at + 1] = m(i, j).imag();
    }
  return a;
}

CMatrix complex_matrix(const Array& a, Index rows, Index cols) {
  CMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      const auto at = static_cast<std::size_t>(2 * (i * cols + j));
      m(i, j) = Complex(a.values[at], a.values[at + 1]);
    }
  return m;
}

}  // namespace

Array to_array(const ComplexImage& x) {
  return complex_array(x.pixels, {static_cast<std::uint64_t>(x.ny()), static_cast<std::uint64_t>(x.nx())});
}

Array to_array(const CoilMaps& csm) {
  return complex_array(csm.stacked, {static_cast<std::uint64_t>(csm.coils), static_cast<std::uint64_t>(csm.ny()),
                                     static_cast<std::uint64_t>(csm.nx())});
}

Array to_array(const KSpaceSamples& y) {
  return complex_array(y.data, {static_cast<std::uint64_t>(y.coils()), static_cast<std::uint64_t>(y.samples())});
}

Array to_array(const RMatrix& m) {
  Array a;
  a.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  a.values.assign(m.data(), m.data() + m.size());
  return a;
}

Array to_array(const RVector& v) {
  Array a;
  a.dims = {static_cast<std::uint64_t>(v.size())};
  a.values.assign(v.data(), v.data() + v.size());
  return a;
}

ComplexImage image_from_array(const Array& a) {
  expect(a, DType::complex128, 2, "a complex image (rank 2, complex128)");
  return ComplexImage(complex_matrix(a, static_cast<Index>(a.dims[0]), static_cast<Index>(a.dims[1])));
}

CoilMaps coils_from_array(const Array& a) {
  expect(a, DType::complex128, 3, "coil maps (rank 3, complex128)");
  const auto nc = static_cast<Index>(a.dims[0]);
  return CoilMaps(complex_matrix(a, nc * static_cast<Index>(a.dims[1]), static_cast<Index>(a.dims[2])), nc);
}

KSpaceSamples kspace_from_array(const Array& a) {
  expect(a, DType::complex128, 2, "k-space samples (rank 2, complex128)");
  return KSpaceSamples(complex_matrix(a, static_cast<Index>(a.dims[0]), static_cast<Index>(a.dims[1])));
}

RMatrix real_matrix_from_array(const Array& a) {
  expect(a, DType::float64, 2, "a real matrix (rank 2, float64)");
  RMatrix m(static_cast<Index>(a.dims[0]), static_cast<Index>(a.dims[1]));
  std::copy(a.values.begin(), a.values.end(), m.data());
  return m;
}

Array stack_arrays(const std::vector<Array>& items) {
  if (items.empty()) fail(Errc::empty_input, "nothing to stack");
  Array out;
  out.dtype = items.front().dtype;
  out.dims = items.front().dims;
  out.dims.insert(out.dims.begin(), items.size());
  for (const auto& a : items) {
    if (a.dtype != out.dtype || a.dims != items.front().dims) fail(Errc::shape_mismatch, "stacked arrays differ in shape");
    out.values.insert(out.values.end(), a.values.begin(), a.values.end());
  }
  return out;
}

Array slice_array(const Array& a, std::uint64_t index) {
  if (a.dims.empty() || index >= a.dims[0]) fail(Errc::invalid_argument, "slice index out of range");
  Array out;
  out.dtype = a.dtype;
  out.dims.assign(a.dims.begin() + 1, a.dims.end());
  const std::size_t chunk = out.elements() * doubles_per_element(a.dtype);
  const auto first = a.values.begin() + static_cast<std::ptrdiff_t>(index * chunk);
  out.values.assign(first, first + static_cast<std::ptrdiff_t>(chunk));
  return out;
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& k, const std::string& extra_json) {
  validate(k);
  nlohmann::ordered_json header;
  header["format"] = "sstraj-trajectory";
  header["version"] = 1;
  header["samples"] = k.size();
  header["dwell"] = k.dwell;
  header["fov"] = k.fov;
  nlohmann::ordered_json extra;
  try {
    extra = nlohmann::ordered_json::parse(extra_json);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::invalid_argument, std::string("trajectory header is not valid JSON: ") + e.what());
  }
  if (!extra.is_object()) fail(Errc::invalid_argument, "trajectory header must be a JSON object");
  for (auto it = extra.begin(); it != extra.end(); ++it)
    if (!header.contains(it.key())) header[it.key()] = it.value();
  write_array(path, to_array(k.points));
  const auto sidecar = path.string() + ".json";
  std::ofstream f(sidecar, std::ios::trunc);
  if (!f) fail(Errc::io, "cannot open " + sidecar + " for writing");
  f << header.dump(2) << '\n';
  if (!f) fail(Errc::io, "failed writing " + sidecar);
}

Trajectory read_trajectory(const std::filesystem::path& path, std::string* sidecar_json) {
  Trajectory k;
  k.points = real_matrix_from_array(read_array(path));
  if (k.points.cols() != 2) fail(Errc::format, "trajectory array must be m x 2");
  const auto sidecar = path.string() + ".json";
  std::ifstream f(sidecar);
  if (!f) fail(Errc::io, "missing trajectory header " + sidecar);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(f);
    k.dwell = header.at("dwell").get<double>();
    k.fov = header.at("fov").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, "malformed trajectory header " + sidecar + ": " + e.what());
  }
  validate(k);
  if (sidecar_json) *sidecar_json = header.dump();
  return k;
}

}  // namespace sstraj
