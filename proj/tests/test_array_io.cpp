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

#include "helpers.hpp"
#include "sstraj/array_io.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <fstream>
#include <limits>

using namespace sstraj;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sstraj_test_array_io";
  fs::create_directories(dir);
  return dir / name;
}

Array random_array(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> rank_dist(0, 4), dim_dist(0, 5), type_dist(0, 1);
  std::uniform_int_distribution<std::uint64_t> bits;
  Array a;
  a.dtype = type_dist(rng) ? DType::complex128 : DType::float64;
  const int rank = rank_dist(rng);
  for (int r = 0; r < rank; ++r) a.dims.push_back(static_cast<std::uint64_t>(dim_dist(rng)));
  a.values.resize(a.elements() * (a.dtype == DType::complex128 ? 2 : 1));
  // Arbitrary bit patterns: subnormals, infinities, NaN payloads and -0 all appear.
  for (double& v : a.values) {
    const std::uint64_t b = bits(rng);
    std::memcpy(&v, &b, sizeof v);
  }
  return a;
}

bool same_bits(const Array& a, const Array& b) {
  return a.dtype == b.dtype && a.dims == b.dims && a.values.size() == b.values.size() &&
         std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("Array round trip is bit exact", "[array_io]")
{
  std::mt19937_64 rng(60);
  const fs::path path = temp_path("round_trip.lsst");
  for (int rep = 0; rep < 1000; ++rep) {
    const Array a = random_array(rng);
    REQUIRE(same_bits(decode_array(encode_array(a)), a));
    if (rep % 10 == 0) {
      write_array(path, a);
      REQUIRE(same_bits(read_array(path), a));
    }
  }
}

TEST_CASE("Array layout", "[array_io]")
{
  Array a;
  a.dtype = DType::float64;
  a.dims = {2};
  a.values = {1.0, -2.0};
  const std::vector<char> bytes = encode_array(a);
  REQUIRE(bytes.size() == 4 + 2 + 1 + 1 + 8 + 16);
  CHECK(std::string(bytes.data(), 4) == "LSST");
  CHECK(static_cast<unsigned char>(bytes[4]) == kArrayFormatVersion);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 2);
  CHECK(bytes[7] == 1);
  CHECK(static_cast<unsigned char>(bytes[8]) == 2);
  // 1.0 little-endian is 00 .. 00 f0 3f
  CHECK(static_cast<unsigned char>(bytes[16 + 6]) == 0xf0);
  CHECK(static_cast<unsigned char>(bytes[16 + 7]) == 0x3f);
}

TEST_CASE("Malformed arrays are rejected", "[array_io]")
{
  Array a;
  a.dims = {3};
  a.values = {1, 2, 3};
  const std::vector<char> good = encode_array(a);
  auto code_of = [](const std::vector<char>& bytes) {
    try {
      decode_array(bytes);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::invalid_argument;
  };

  std::vector<char> bad = good;
  bad[0] = 'X';
  CHECK(code_of(bad) == Errc::format);
  bad = good;
  bad[4] = 9;
  CHECK(code_of(bad) == Errc::format);
  bad = good;
  bad[6] = 7;
  CHECK(code_of(bad) == Errc::format);
  bad = good;
  bad.pop_back();
  CHECK(code_of(bad) == Errc::format);
  bad = good;
  bad.push_back(0);
  CHECK(code_of(bad) == Errc::format);
  CHECK(code_of(std::vector<char>(3, 'L')) == Errc::format);

  Array inconsistent = a;
  inconsistent.values.push_back(4);
  CHECK_THROWS_AS(encode_array(inconsistent), Error);
  CHECK_THROWS_AS(read_array(temp_path("does_not_exist.lsst")), Error);
}

TEST_CASE("Typed conversions", "[array_io]")
{
  std::mt19937_64 rng(61);
  const ComplexImage x(test::random_complex(5, 7, rng));
  const Array ax = to_array(x);
  CHECK(ax.dtype == DType::complex128);
  CHECK(ax.dims == std::vector<std::uint64_t>{5, 7});
  CHECK(image_from_array(ax).pixels == x.pixels);
  // Row-major: element (0, 1) follows element (0, 0).
  CHECK(ax.values[2] == x.pixels(0, 1).real());

  const CoilMaps csm = test::random_csm(6, 3, rng);
  const Array ac = to_array(csm);
  CHECK(ac.dims == std::vector<std::uint64_t>{3, 6, 6});
  const CoilMaps back = coils_from_array(ac);
  CHECK(back.coils == 3);
  CHECK(back.stacked == csm.stacked);

  const KSpaceSamples y(test::random_complex(2, 9, rng));
  CHECK(kspace_from_array(to_array(y)).data == y.data);

  const RMatrix m = RMatrix::Random(4, 2);
  CHECK(real_matrix_from_array(to_array(m)) == m);

  CHECK_THROWS_AS(image_from_array(to_array(m)), Error);
  CHECK_THROWS_AS(coils_from_array(ax), Error);
}

TEST_CASE("Stacking", "[array_io]")
{
  std::mt19937_64 rng(62);
  std::vector<Array> items;
  for (int i = 0; i < 3; ++i) items.push_back(to_array(ComplexImage(test::random_complex(4, 4, rng))));
  const Array s = stack_arrays(items);
  CHECK(s.dims == std::vector<std::uint64_t>{3, 4, 4});
  for (std::uint64_t i = 0; i < 3; ++i) CHECK(slice_array(s, i) == items[i]);
  CHECK_THROWS_AS(slice_array(s, 3), Error);
  items.push_back(to_array(ComplexImage(test::random_complex(4, 5, rng))));
  CHECK_THROWS_AS(stack_arrays(items), Error);
  CHECK_THROWS_AS(stack_arrays({}), Error);
}

TEST_CASE("Trajectory files", "[array_io]")
{
  std::mt19937_64 rng(63);
  Trajectory k = test::random_trajectory(20, 16, rng, 0.24, 4e-6);
  const fs::path path = temp_path("traj.lsst");
  write_trajectory(path, k, R"({"seed": 7, "command": "init-traj"})");
  REQUIRE(fs::exists(path.string() + ".json"));

  std::string sidecar;
  const Trajectory back = read_trajectory(path, &sidecar);
  CHECK(back.points == k.points);
  CHECK(back.dwell == k.dwell);
  CHECK(back.fov == k.fov);
  CHECK(sidecar.find("\"seed\"") != std::string::npos);
  CHECK(sidecar.find("init-traj") != std::string::npos);

  SECTION("Missing sidecar")
  {
    fs::remove(path.string() + ".json");
    CHECK_THROWS_AS(read_trajectory(path), Error);
  }

  SECTION("Wrong shape")
  {
    write_array(path, to_array(RMatrix(RMatrix::Zero(5, 3))));
    CHECK_THROWS_AS(read_trajectory(path), Error);
  }

  CHECK_THROWS_AS(write_trajectory(path, k, "[1, 2]"), Error);
}
