#ifndef GYROCAV_H
#define GYROCAV_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define GC_SELECTION_NONE 0

#define GC_SELECTION_PLUS 1

#define GC_SELECTION_MINUS 2

#define GC_SELECTION_BOTH 3

#define GC_LABEL_R 0

#define GC_LABEL_L 1

#define GC_LABEL_SPIN_PLUS 2

#define GC_LABEL_SPIN_MINUS 3

#define GC_COUPLING_POPULATION 0

#define GC_COUPLING_POLARIZATION 1

typedef enum GcStatus {
  GC_STATUS_OK = 0,
  GC_STATUS_NULL_POINTER = 1,
  GC_STATUS_VALIDATION = 2,
  GC_STATUS_NUMERICAL = 3,
  GC_STATUS_NO_CROSSING = 4,
  GC_STATUS_BUFFER_TOO_SMALL = 5,
  GC_STATUS_OUT_OF_RANGE = 6,
  GC_STATUS_PANIC = 7,
} GcStatus;

/**
 * Spin Hamiltonian parameters (opaque).
 */
typedef struct GcSpinSystem GcSpinSystem;

/**
 * Result of a field sweep (opaque).
 */
typedef struct GcSweep GcSweep;

typedef struct GcThermal {
  double partition_function;
  double n_plus;
  double n_minus;
  double chi_plus;
  double chi_minus;
} GcThermal;

typedef struct GcDoublet {
  double f_r_ghz;
  double f_l_ghz;
  double kappa_r_mhz;
  double kappa_l_mhz;
  double g_rl_mhz;
} GcDoublet;

typedef struct GcEnsemble {
  double g_plus_mhz;
  double g_minus_mhz;
  double gamma_mhz;
  double f_plus_ghz;
  double f_minus_ghz;
} GcEnsemble;

typedef struct GcPorts {
  double input_r;
  double input_l;
  double output_r;
  double output_l;
} GcPorts;

typedef struct GcGap {
  double field_mt;
  double gap_mhz;
} GcGap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gc_version(void);

/**
 * Length in bytes of the last error message on this thread, excluding the
 * terminating NUL; 0 when there is none.
 */
size_t gc_last_error_length(void);

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to
 * `len - 1` bytes). Returns the number of bytes written excluding the NUL.
 *
 * # Safety
 * `buf` must point to at least `len` writable bytes.
 */
size_t gc_last_error_message(char *buf, size_t len);

/**
 * Creates a spin system. Zero-field splittings in GHz.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one pointer.
 */
enum GcStatus gc_spin_system_new(double zfs_12_32_ghz,
                                 double zfs_32_52_ghz,
                                 double g_factor,
                                 double total_ions,
                                 struct GcSpinSystem **out);

/**
 * # Safety
 * `system` must be NULL or a pointer from [`gc_spin_system_new`] not yet
 * freed.
 */
void gc_spin_system_free(struct GcSpinSystem *system);

/**
 * Energy of level `m = twice_m / 2` at `field_mt`, GHz.
 *
 * # Safety
 * Pointers must be valid.
 */
enum GcStatus gc_level_energy(const struct GcSpinSystem *system,
                              int32_t twice_m,
                              double field_mt,
                              double *out);

/**
 * Frequencies of the `+1/2 → +3/2` and `−1/2 → −3/2` lines, GHz.
 *
 * # Safety
 * Pointers must be valid.
 */
enum GcStatus gc_transition_frequencies(const struct GcSpinSystem *system,
                                        double field_mt,
                                        double *out_plus_ghz,
                                        double *out_minus_ghz);

/**
 * Thermal statistics at one field and temperature.
 *
 * # Safety
 * Pointers must be valid.
 */
enum GcStatus gc_thermal_state(const struct GcSpinSystem *system,
                               double field_mt,
                               double temperature_k,
                               struct GcThermal *out);

/**
 * Eigenfrequencies (ascending, GHz) of the coupled-mode matrix.
 *
 * `*out_len` always receives the number of branches; if `capacity` is
 * smaller, nothing else is written and `GC_STATUS_BUFFER_TOO_SMALL` is
 * returned.
 *
 * # Safety
 * `out_freqs` must have room for `capacity` values; other pointers valid.
 */
enum GcStatus gc_eigenmodes(const struct GcDoublet *doublet,
                            const struct GcEnsemble *ensemble,
                            int32_t selection_code,
                            double *out_freqs,
                            size_t capacity,
                            size_t *out_len);

/**
 * `|S21|` at each of `n` ascending frequencies, written to `out_mag`.
 *
 * # Safety
 * `f_grid_ghz` and `out_mag` must each hold `n` values; other pointers
 * valid.
 */
enum GcStatus gc_transmission(const struct GcDoublet *doublet,
                              const struct GcEnsemble *ensemble,
                              int32_t selection_code,
                              const struct GcPorts *ports,
                              const double *f_grid_ghz,
                              size_t n,
                              double *out_mag);

/**
 * Sweeps the field over `n` monotone values. Per-spin couplings in MHz.
 *
 * # Safety
 * `field_grid_mt` must hold `n` values; `out` must be valid; other
 * pointers valid.
 */
enum GcStatus gc_field_sweep(const struct GcSpinSystem *system,
                             const struct GcDoublet *doublet,
                             double per_spin_plus_mhz,
                             double per_spin_minus_mhz,
                             double gamma_mhz,
                             double temperature_k,
                             int32_t coupling_model_code,
                             int32_t selection_code,
                             const double *field_grid_mt,
                             size_t n,
                             struct GcSweep **out);

/**
 * # Safety
 * `sweep` must be NULL or a pointer from [`gc_field_sweep`] not yet freed.
 */
void gc_sweep_free(struct GcSweep *sweep);

/**
 * Number of rows; 0 for NULL.
 *
 * # Safety
 * `sweep` must be NULL or valid.
 */
size_t gc_sweep_rows(const struct GcSweep *sweep);

/**
 * Branches per row; 0 for NULL.
 *
 * # Safety
 * `sweep` must be NULL or valid.
 */
size_t gc_sweep_branches(const struct GcSweep *sweep);

/**
 * Field, frequency (GHz) and composition weight of one branch.
 * `label_code` is one of the `GC_LABEL_*` constants.
 *
 * # Safety
 * Pointers must be valid.
 */
enum GcStatus gc_sweep_branch(const struct GcSweep *sweep,
                              size_t row,
                              size_t index,
                              int32_t label_code,
                              double *out_field_mt,
                              double *out_frequency_ghz,
                              double *out_fraction);

/**
 * Minimum separation between branches `a` and `b` over the sweep.
 *
 * # Safety
 * Pointers must be valid.
 */
enum GcStatus gc_sweep_gap(const struct GcSweep *sweep, size_t a, size_t b, struct GcGap *out);

/**
 * Minimum separation of the two branches left after dropping, in each
 * row, the branch with the largest weight on `label_code`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum GcStatus gc_sweep_gap_excluding(const struct GcSweep *sweep,
                                     int32_t label_code,
                                     struct GcGap *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GYROCAV_H */
