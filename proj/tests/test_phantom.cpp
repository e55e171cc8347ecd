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
#include "sstraj/phantom.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <numbers>

using namespace sstraj;
using Catch::Approx;

namespace {

// Second implementation of the modified (Toft) Shepp-Logan phantom, written
// from the published table: A, a, b, x0, y0, phi.
double reference_energy(int n) {
  static const double table[10][6] = {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},         {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0}, {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},  {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  };
  double energy = 0.0;
  for (int row = 0; row < n; ++row) {
    const double y = 1.0 - (2.0 * row + 1.0) / n;
    for (int col = 0; col < n; ++col) {
      const double x = (2.0 * col + 1.0) / n - 1.0;
      double v = 0.0;
      for (const auto& e : table) {
        const double phi = e[5] * std::numbers::pi / 180.0;
        const double dx = x - e[3], dy = y - e[4];
        const double u = dx * std::cos(phi) + dy * std::sin(phi);
        const double w = -dx * std::sin(phi) + dy * std::cos(phi);
        if ((u * u) / (e[1] * e[1]) + (w * w) / (e[2] * e[2]) <= 1.0) v += e[0];
      }
      v = std::min(1.0, std::max(0.0, v));
      energy += v * v;
    }
  }
  return energy;
}

}  // namespace

TEST_CASE("Shepp-Logan", "[phantom]")
{
  const ComplexImage x = shepp_logan(64);
  REQUIRE(x.ny() == 64);
  REQUIRE(x.nx() == 64);
  CHECK(x.pixels(32, 32).real() > 0.0);
  CHECK(x.pixels(0, 0) == Complex(0.0));
  CHECK(x.pixels(0, 63) == Complex(0.0));
  CHECK(x.pixels(63, 0) == Complex(0.0));
  CHECK(x.pixels(63, 63) == Complex(0.0));
  CHECK(x.pixels.imag().cwiseAbs().maxCoeff() == 0.0);
  CHECK(x.pixels.real().minCoeff() >= 0.0);
  CHECK(x.pixels.real().maxCoeff() <= 1.0);
  CHECK(std::abs(x.pixels.squaredNorm() - reference_energy(64)) <= 1e-10);
  CHECK_THROWS_AS(shepp_logan(15), Error);
}

TEST_CASE("Symmetric ellipse sets rasterize symmetrically", "[phantom]")
{
  // The standard table is not mirror-symmetric (the small lower ellipses are
  // offset), so build a set that is: mirrored pairs plus centered ones.
  std::vector<Ellipse> set{
      {1.0, 0.7, 0.9, 0.0, 0.0, 0.0},
      {-0.6, 0.6, 0.8, 0.0, -0.02, 0.0},
      {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},
      {-0.2, 0.11, 0.31, -0.22, 0.0, 18.0},
      {0.3, 0.05, 0.05, 0.0, 0.35, 0.0},
  };
  for (Index n : {32, 48, 64}) {
    const CMatrix p = rasterize(set, n).pixels;
    CHECK((p - p.rowwise().reverse()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(p.cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("Synthetic coil maps", "[phantom]")
{
  SECTION("One coil")
  {
    const CoilMaps c = synthetic_csm(16, 1, 3);
    REQUIRE(c.coils == 1);
    CHECK((c.stacked.cwiseAbs().array() - 1.0).abs().maxCoeff() <= 1e-12);
  }

  SECTION("Normalized and smooth")
  {
    const Index n = 64;
    const CoilMaps c = synthetic_csm(n, 4, 9);
    REQUIRE(c.coils == 4);
    std::mt19937_64 rng(70);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    const RMatrix sos = sum_of_squares(c);
    for (int i = 0; i < 100; ++i) CHECK(std::abs(sos(pick(rng), pick(rng)) - 1.0) <= 1e-6);
    CHECK((sos.array() - 1.0).abs().maxCoeff() <= 1e-6);

    double worst = 0.0;
    for (Index cc = 0; cc < 4; ++cc) {
      const CMatrix m = c.coil(cc);
      for (Index y = 0; y + 1 < n; ++y)
        for (Index x = 0; x + 1 < n; ++x)
          worst = std::max({worst, std::abs(m(y + 1, x) - m(y, x)), std::abs(m(y, x + 1) - m(y, x))});
    }
    CHECK(worst <= 0.2);
    // Coils must differ, or there is nothing for SENSE to exploit.
    CHECK((c.coil(0) - c.coil(1)).norm() > 0.1 * c.coil(0).norm());
  }

  SECTION("Seeded")
  {
    CHECK(synthetic_csm(16, 3, 5).stacked == synthetic_csm(16, 3, 5).stacked);
    CHECK(synthetic_csm(16, 3, 5).stacked != synthetic_csm(16, 3, 6).stacked);
  }

  CHECK_THROWS_AS(synthetic_csm(16, 0, 1), Error);
}

TEST_CASE("Datasets", "[phantom]")
{
  SECTION("Distinct elements")
  {
    const std::vector<PhantomCase> set = make_dataset(50, 32, 2, 11);
    REQUIRE(set.size() == 50);
    double closest = 1e300;
    for (std::size_t i = 0; i < set.size(); ++i)
      for (std::size_t j = i + 1; j < set.size(); ++j)
        closest = std::min(closest, test::nrmse(set[i].image.pixels, set[j].image.pixels));
    CHECK(closest > 1e-3);
  }

  SECTION("Deterministic and addressable by index")
  {
    const std::vector<PhantomCase> a = make_dataset(6, 32, 2, 12), b = make_dataset(6, 32, 2, 12);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].image.pixels == b[i].image.pixels);
      CHECK(a[i].csm.stacked == b[i].csm.stacked);
    }
    const PhantomCase fourth = make_phantom_case(32, 2, 12, 4);
    CHECK(fourth.image.pixels == a[4].image.pixels);
    CHECK(make_dataset(1, 32, 2, 13)[0].image.pixels != a[0].image.pixels);
  }

  SECTION("Jitter stays near the base phantom")
  {
    DatasetOptions still;
    still.intensity_jitter = 0.0;
    still.max_rotation_deg = 0.0;
    CHECK(make_phantom_case(32, 1, 14, 0, still).image.pixels == shepp_logan(32).pixels);
    const ComplexImage jittered = make_phantom_case(32, 1, 14, 0).image;
    CHECK(test::nrmse(jittered.pixels, shepp_logan(32).pixels) < 0.5);
    CHECK(jittered.pixels.cwiseAbs().maxCoeff() <= 1.0);
  }

  SECTION("Optional phase")
  {
    DatasetOptions opts;
    opts.smooth_phase = true;
    const ComplexImage x = make_phantom_case(32, 1, 15, 0, opts).image;
    CHECK(x.pixels.imag().cwiseAbs().maxCoeff() > 0.0);
    CHECK(make_phantom_case(32, 1, 15, 0).image.pixels.imag().cwiseAbs().maxCoeff() == 0.0);
  }

  CHECK_THROWS_AS(make_dataset(0, 32, 1, 1), Error);
}
