#ifndef PENALMHD_H
#define PENALMHD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PmhdField {
  PMHD_FIELD_DENSITY = 0,
  PMHD_FIELD_VELOCITY = 1,
  PMHD_FIELD_MAGNETIC = 2,
  PMHD_FIELD_INDICATOR = 3,
} PmhdField;

typedef enum PmhdStatus {
  PMHD_STATUS_OK = 0,
  PMHD_STATUS_NULL_POINTER = 1,
  PMHD_STATUS_INVALID_UTF8 = 2,
  PMHD_STATUS_CONFIG = 3,
  PMHD_STATUS_SOLVER = 4,
  PMHD_STATUS_IO = 5,
  PMHD_STATUS_BODY_LOST = 6,
  // `T` reached or the body hit the clearance threshold; no step taken.
  PMHD_STATUS_FINISHED = 7,
  PMHD_STATUS_BUFFER_TOO_SMALL = 8,
  PMHD_STATUS_INTERNAL = 9,
} PmhdStatus;

// Opaque simulation handle.
typedef struct PmhdSim PmhdSim;

// Energy bookkeeping of the latest step (step 0: initial energies only).
typedef struct PmhdEnergies {
  uint64_t step;
  double time;
  double kinetic;
  double magnetic;
  double dissipation;
  double penalty_work;
  double source_work;
  double mixed_residual;
  // 1 if the energy inequality held for the latest step.
  int32_t inequality_passed;
} PmhdEnergies;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a simulation from configuration text (`key = value` lines).
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum PmhdStatus pmhd_create_from_text(const char *text, struct PmhdSim **out);

// Creates a simulation from a configuration file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum PmhdStatus pmhd_create_from_file(const char *path, struct PmhdSim **out);

// Advances one step. Returns `Finished` without stepping at the end.
//
// # Safety
// `sim` must be a handle from `pmhd_create_*` that has not been freed.
enum PmhdStatus pmhd_step(struct PmhdSim *sim);

// Steps until the run ends; `steps` (may be null) receives the count taken.
//
// # Safety
// `sim` must be a live handle; `steps` null or valid.
enum PmhdStatus pmhd_run(struct PmhdSim *sim, uint64_t *steps);

// Energies of the current state.
//
// # Safety
// `sim` must be a live handle and `out` a valid pointer.
enum PmhdStatus pmhd_energies(const struct PmhdSim *sim, struct PmhdEnergies *out);

// Cells per side of the grid (0 for a null handle).
//
// # Safety
// `sim` must be null or a live handle.
size_t pmhd_grid_cells(const struct PmhdSim *sim);

// Copies a field into `buf`. Scalars take `n³` values, vectors `3n³`
// stored component by component; cell `(i, j, k)` sits at `(k n + j) n + i`.
//
// # Safety
// `sim` must be a live handle and `buf` valid for `len` writes.
enum PmhdStatus pmhd_copy_field(const struct PmhdSim *sim,
                                enum PmhdField field,
                                double *buf,
                                size_t len);

// Releases a handle. Null is ignored.
//
// # Safety
// `sim` must be null or a handle not yet freed.
void pmhd_free(struct PmhdSim *sim);

// Message of the last failure on this thread; valid until the next call
// into the library from the same thread.
const char *pmhd_last_error(void);

// Library version as a static string.
const char *pmhd_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PENALMHD_H */
