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

#pragma once

// Binary array container shared by every file the toolkit reads or writes:
//
//   "LSST" | version u16 | dtype u8 | rank u8 | dims u64[rank] | payload
//
// All integers and the float64 payload are little-endian, row-major.
// complex128 elements are stored as interleaved (re, im) pairs.

#include "sstraj/core.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sstraj {

enum class DType : std::uint8_t { complex128 = 1, float64 = 2 };

inline constexpr std::uint16_t kArrayFormatVersion = 1;

struct Array {
  DType dtype = DType::float64;
  std::vector<std::uint64_t> dims;
  std::vector<double> values;  // 2 doubles per element for complex128

  std::uint64_t elements() const;
  bool operator==(const Array&) const = default;
};

std::vector<char> encode_array(const Array& a);
Array decode_array(const std::vector<char>& bytes);

void write_array(const std::filesystem::path& path, const Array& a);
Array read_array(const std::filesystem::path& path);

Array to_array(const ComplexImage& x);
Array to_array(const CoilMaps& csm);
Array to_array(const KSpaceSamples& y);
Array to_array(const RMatrix& m);
Array to_array(const RVector& v);

ComplexImage image_from_array(const Array& a);
CoilMaps coils_from_array(const Array& a);
KSpaceSamples kspace_from_array(const Array& a);
RMatrix real_matrix_from_array(const Array& a);

// Stacks equally shaped arrays along a new leading axis, and the reverse.
Array stack_arrays(const std::vector<Array>& items);
Array slice_array(const Array& a, std::uint64_t index);

// Trajectory file: float64 m × 2 array plus a JSON sidecar at path + ".json"
// carrying dwell, fov and whatever extra fields `extra_json` (an object) holds.
void write_trajectory(const std::filesystem::path& path, const Trajectory& k,
                      const std::string& extra_json = "{}");
Trajectory read_trajectory(const std::filesystem::path& path, std::string* sidecar_json = nullptr);

}  // namespace sstraj
