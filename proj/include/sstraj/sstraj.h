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

#ifndef SSTRAJ_SSTRAJ_H_
#define SSTRAJ_SSTRAJ_H_

/* C interface to the trajectory-learning toolkit.
 *
 * Every call returns an sstraj_status. On failure the message is available
 * from sstraj_last_error() on the same thread until the next failing call.
 * Objects are opaque and owned by the caller once returned; release them with
 * the matching *_free function. Strings returned through char** are released
 * with sstraj_string_free.
 *
 * Operations take a JSON configuration document (see README). Sections that an
 * operation does not use are still validated, so a typo anywhere is reported.
 * NULL or "" selects all defaults.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SSTRAJ_API __declspec(dllexport)
#else
#define SSTRAJ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sstraj_status {
  SSTRAJ_OK = 0,
  SSTRAJ_ERR_INVALID_ARGUMENT = 1,
  SSTRAJ_ERR_SHAPE_MISMATCH = 2,
  SSTRAJ_ERR_NON_FINITE = 3,
  SSTRAJ_ERR_CSM_NOT_NORMALIZED = 4,
  SSTRAJ_ERR_ACCEL_TOO_LARGE = 5,
  SSTRAJ_ERR_EMPTY_INPUT = 6,
  SSTRAJ_ERR_SINGULAR_DENSITY = 7,
  SSTRAJ_ERR_CG_BREAKDOWN = 8,
  SSTRAJ_ERR_DIVERGENCE = 9,
  SSTRAJ_ERR_IO = 10,
  SSTRAJ_ERR_FORMAT = 11,
  SSTRAJ_ERR_UNKNOWN_PLUGIN = 12,
  SSTRAJ_ERR_PLUGIN_FAILED = 13,
  SSTRAJ_ERR_CONFIG = 14,
  SSTRAJ_ERR_INTERNAL = 15
} sstraj_status;

typedef enum sstraj_dtype { SSTRAJ_COMPLEX128 = 1, SSTRAJ_FLOAT64 = 2 } sstraj_dtype;

typedef struct sstraj_array sstraj_array;
typedef struct sstraj_trajectory sstraj_trajectory;
typedef struct sstraj_dataset sstraj_dataset;

/* Receives one JSON object per optimizer step. */
typedef void (*sstraj_progress_fn)(const char* record_json, void* user);

SSTRAJ_API const char* sstraj_version(void);
SSTRAJ_API const char* sstraj_last_error(void);
SSTRAJ_API const char* sstraj_status_name(sstraj_status status);
SSTRAJ_API void sstraj_string_free(char* s);

/* Parses a configuration and returns it with every default filled in, keys
 * sorted. Equal resolved documents mean equal runs. */
SSTRAJ_API sstraj_status sstraj_config_resolve(const char* config_json, char** resolved_json);

/* ---- Arrays (images, coil maps, k-space data, real matrices) ---- */

SSTRAJ_API sstraj_status sstraj_array_create(sstraj_dtype dtype, size_t rank, const uint64_t* dims,
                                             const double* values, sstraj_array** out);
SSTRAJ_API sstraj_status sstraj_array_read(const char* path, sstraj_array** out);
SSTRAJ_API sstraj_status sstraj_array_write(const sstraj_array* a, const char* path);
SSTRAJ_API sstraj_dtype sstraj_array_dtype(const sstraj_array* a);
SSTRAJ_API size_t sstraj_array_rank(const sstraj_array* a);
SSTRAJ_API const uint64_t* sstraj_array_dims(const sstraj_array* a);
/* Interleaved (re, im) for complex arrays; row-major. */
SSTRAJ_API const double* sstraj_array_data(const sstraj_array* a);
SSTRAJ_API uint64_t sstraj_array_elements(const sstraj_array* a);
SSTRAJ_API void sstraj_array_free(sstraj_array* a);

/* ---- Trajectories ---- */

SSTRAJ_API sstraj_status sstraj_trajectory_create(size_t m, const double* points, double dwell, double fov,
                                                  sstraj_trajectory** out);
/* sidecar_json may be NULL. */
SSTRAJ_API sstraj_status sstraj_trajectory_read(const char* path, sstraj_trajectory** out, char** sidecar_json);
SSTRAJ_API sstraj_status sstraj_trajectory_write(const sstraj_trajectory* k, const char* path,
                                                 const char* extra_json);
SSTRAJ_API size_t sstraj_trajectory_size(const sstraj_trajectory* k);
/* m × 2 row-major (kx, ky) in cycles/m. */
SSTRAJ_API const double* sstraj_trajectory_points(const sstraj_trajectory* k);
SSTRAJ_API double sstraj_trajectory_dwell(const sstraj_trajectory* k);
SSTRAJ_API double sstraj_trajectory_fov(const sstraj_trajectory* k);
SSTRAJ_API void sstraj_trajectory_free(sstraj_trajectory* k);

/* Kinematic summary against the configured limits and loss weights. */
SSTRAJ_API sstraj_status sstraj_trajectory_stats(const sstraj_trajectory* k, const char* config_json,
                                                 char** stats_json);

/* Variable-density draw and TSP ordering per the "sampling" section. The
 * point set (raster order, m × 2 float64) is returned when points != NULL. */
SSTRAJ_API sstraj_status sstraj_init_trajectory(const char* config_json, sstraj_trajectory** out,
                                                sstraj_array** points, char** info_json);

/* ---- Phantom datasets ---- */

/* split is "train", "validation" or "test" (sections of "data"). */
SSTRAJ_API sstraj_status sstraj_dataset_make(const char* config_json, const char* split, sstraj_dataset** out);
SSTRAJ_API sstraj_status sstraj_dataset_read(const char* dir, sstraj_dataset** out);
/* Creates dir if needed; refuses to overwrite unless force != 0. */
SSTRAJ_API sstraj_status sstraj_dataset_write(const sstraj_dataset* d, const char* dir, const char* extra_json,
                                              int force);
SSTRAJ_API size_t sstraj_dataset_size(const sstraj_dataset* d);
SSTRAJ_API sstraj_status sstraj_dataset_image(const sstraj_dataset* d, size_t index, sstraj_array** out);
SSTRAJ_API sstraj_status sstraj_dataset_coils(const sstraj_dataset* d, size_t index, sstraj_array** out);
SSTRAJ_API void sstraj_dataset_free(sstraj_dataset* d);

/* ---- Inference path ---- */

/* Blurred, optionally noisy k-space (coils × m). case_index seeds the noise. */
SSTRAJ_API sstraj_status sstraj_simulate(const sstraj_array* image, const sstraj_array* coils,
                                         const sstraj_trajectory* k, const char* config_json, uint64_t case_index,
                                         sstraj_array** kspace);

/* Regridded, CG-SENSE and post-reconstructed images. Any output may be NULL. */
SSTRAJ_API sstraj_status sstraj_reconstruct(const sstraj_array* kspace, const sstraj_array* coils,
                                            const sstraj_trajectory* k, const char* config_json,
                                            sstraj_array** regridded, sstraj_array** sense, sstraj_array** final_image,
                                            char** info_json);

/* PSNR/SSIM/task loss of images against references; both rank 2 or both
 * stacked rank 3. */
SSTRAJ_API sstraj_status sstraj_evaluate_images(const sstraj_array* images, const sstraj_array* references,
                                                char** metrics_json);

/* simulate + reconstruct + metrics over a dataset; identical to the
 * optimizer's validation pass. */
SSTRAJ_API sstraj_status sstraj_evaluate_trajectory(const sstraj_dataset* d, const sstraj_trajectory* k,
                                                    const char* config_json, char** metrics_json);

/* ---- Training ---- */

/* best is chosen by validation total loss; last is the final iterate. Either
 * output may be NULL. report_json holds initial/best validation and summary. */
SSTRAJ_API sstraj_status sstraj_optimize(const sstraj_dataset* train, const sstraj_dataset* validation,
                                         const sstraj_trajectory* k0, const char* config_json,
                                         sstraj_progress_fn progress, void* user, sstraj_trajectory** best,
                                         sstraj_trajectory** last, char** report_json);

/* Finite-difference check of the trajectory gradient on one dataset case. */
SSTRAJ_API sstraj_status sstraj_grad_check(const sstraj_dataset* d, size_t index, const sstraj_trajectory* k,
                                           const char* config_json, char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* SSTRAJ_SSTRAJ_H_ */
