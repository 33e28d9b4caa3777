#ifndef TNSP_H
#define TNSP_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define TNSP_FAMILY_BINARY1D 0

#define TNSP_FAMILY_TERNARY1D 1

#define TNSP_FAMILY_NONARY2D 2

#define TNSP_FLAVOR_MERA 0

#define TNSP_FLAVOR_TTNS 1

#define TNSP_MOVER_AVERAGE 0

#define TNSP_MOVER_LEFT 1

#define TNSP_MOVER_CENTER 2

#define TNSP_MOVER_RIGHT 3

typedef enum TnspStatus {
  TNSP_STATUS_OK = 0,
  TNSP_STATUS_NULL_POINTER = 1,
  TNSP_STATUS_INVALID_ARGUMENT = 2,
  TNSP_STATUS_INVALID_DIMENSION = 3,
  TNSP_STATUS_SHAPE_MISMATCH = 4,
  TNSP_STATUS_NOT_HERMITIAN = 5,
  TNSP_STATUS_NOT_UNITARY = 6,
  TNSP_STATUS_CONSTRAINT = 7,
  TNSP_STATUS_OUT_OF_RANGE = 8,
  TNSP_STATUS_INSUFFICIENT_SAMPLES = 9,
  TNSP_STATUS_INVALID_CONFIG = 10,
  TNSP_STATUS_IO = 11,
  TNSP_STATUS_SERIALIZATION = 12,
  /**
   * The experiment ran but at least one tolerance gate failed.
   */
  TNSP_STATUS_GATE_FAILED = 13,
  TNSP_STATUS_BUFFER_TOO_SMALL = 14,
  TNSP_STATUS_PANIC = 15,
} TnspStatus;

/**
 * Haar-random MERA or TTNS.
 */
typedef struct TnspMera TnspMera;

/**
 * Haar-random open-boundary MPS.
 */
typedef struct TnspMps TnspMps;

/**
 * Local Hamiltonian term.
 */
typedef struct TnspTerm TnspTerm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next call
 * on the same thread; never null.
 */
const char *tnsp_last_error(void);

/**
 * Term from `terms` weighted Pauli words (`words[k]` over {I,X,Y,Z}, all the
 * same length).
 *
 * # Safety
 * `weights` and `words` must point to `count` valid entries; `out` must be writable.
 */
enum TnspStatus tnsp_term_pauli(const double *weights,
                                const char *const *words,
                                size_t count,
                                struct TnspTerm **out);

/**
 * Term from a row-major Hermitian matrix on `support` sites of dimension
 * `site_dim`; `re` and `im` each hold (site_dim^support)^2 entries.
 *
 * # Safety
 * `re` and `im` must point to enough entries; `out` must be writable.
 */
enum TnspStatus tnsp_term_from_matrix(size_t support,
                                      size_t site_dim,
                                      const double *re,
                                      const double *im,
                                      struct TnspTerm **out);

/**
 * Transverse-field Ising term with field `g` on 2 (bond) or 3 (periodic window) sites.
 *
 * # Safety
 * `out` must be writable.
 */
enum TnspStatus tnsp_term_tfim(double g, size_t support, struct TnspTerm **out);

/**
 * # Safety
 * `term` must come from a `tnsp_term_*` constructor and not be freed twice.
 */
void tnsp_term_free(struct TnspTerm *term);

/**
 * # Safety
 * `out` must be writable.
 */
enum TnspStatus tnsp_mps_random(size_t length,
                                size_t phys_dim,
                                size_t bond_dim,
                                uint64_t seed,
                                struct TnspMps **out);

/**
 * Expectation of a term whose first site is `first_site` (1-based).
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum TnspStatus tnsp_mps_expectation(const struct TnspMps *mps,
                                     const struct TnspTerm *term,
                                     size_t first_site,
                                     double *out);

/**
 * Energy of the open chain carrying `term` at every position.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum TnspStatus tnsp_mps_energy(const struct TnspMps *mps,
                                const struct TnspTerm *term,
                                double *out);

/**
 * # Safety
 * `mps` must come from `tnsp_mps_random` and not be freed twice.
 */
void tnsp_mps_free(struct TnspMps *mps);

/**
 * Random network with 2^`lattice_exp` (binary) or 3^`lattice_exp` (ternary)
 * sites and `layers` layers above a product top state.
 *
 * # Safety
 * `out` must be writable.
 */
enum TnspStatus tnsp_mera_random(uint32_t family_code,
                                 uint32_t flavor_code,
                                 size_t chi,
                                 size_t layers,
                                 size_t lattice_exp,
                                 uint64_t seed,
                                 struct TnspMera **out);

/**
 * Number of physical sites.
 *
 * # Safety
 * `mera` must be live.
 */
size_t tnsp_mera_length(const struct TnspMera *mera);

/**
 * Periodic energy with `term` on every window of the network.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum TnspStatus tnsp_mera_energy(const struct TnspMera *mera,
                                 const struct TnspTerm *term,
                                 double *out);

/**
 * # Safety
 * `mera` must come from `tnsp_mera_random` and not be freed twice.
 */
void tnsp_mera_free(struct TnspMera *mera);

/**
 * Eigenvalues (real and imaginary parts, sorted by decreasing modulus) of a
 * layer-transition channel. `*len` receives the count; returns
 * `BufferTooSmall` without writing when `capacity` is insufficient.
 *
 * # Safety
 * `re` and `im` must have room for `capacity` entries; `len` must be writable.
 */
enum TnspStatus tnsp_channel_spectrum(uint32_t family_code,
                                      uint32_t flavor_code,
                                      uint32_t mover_code,
                                      size_t chi,
                                      double *re,
                                      double *im,
                                      size_t capacity,
                                      size_t *len);

/**
 * Runs a JSON experiment config and hands back the JSON summary (release it
 * with `tnsp_string_free`). Returns `GateFailed` with the summary still set
 * when a tolerance gate fails.
 *
 * # Safety
 * `config` must be a NUL-terminated string; `summary` must be writable.
 */
enum TnspStatus tnsp_run_experiment(const char *config, char **summary);

/**
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void tnsp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TNSP_H */
