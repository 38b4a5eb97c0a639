#ifndef FRANSON_CNOT_H
#define FRANSON_CNOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum FcStatus {
  FC_STATUS_OK = 0,
  FC_STATUS_NULL_POINTER = 1,
  FC_STATUS_INVALID_ARGUMENT = 2,
  FC_STATUS_PRECONDITION = 3,
  FC_STATUS_EMPTY_OUTCOME = 4,
  FC_STATUS_FIT = 5,
  FC_STATUS_IO = 6,
  FC_STATUS_PANIC = 7,
} FcStatus;

// A gate together with its coincidence window.
typedef struct FcGate FcGate;

typedef struct FcEntangleResult {
  double success;
  // P(HH), P(HV), P(VH), P(VV) of the post-selected state.
  double histogram[4];
  double concurrence;
} FcEntangleResult;

typedef struct FcFringeFit {
  double amplitude;
  double visibility;
  double phase;
  // NaN when the fit has no spare degrees of freedom.
  double visibility_stderr;
} FcFringeFit;

typedef struct FcNoiseConfig {
  double pair_rate;
  double efficiency_1;
  double efficiency_2;
  double dark_rate_1;
  double dark_rate_2;
  double phase_jitter_sigma;
  double leakage;
  double integration_s;
  double window_s;
  uint64_t seed;
} FcNoiseConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a gate with the given path delay (in bins), interferometer
// phases and coincidence window (in bins, must be below the delay).
//
// # Safety
// `out` must be valid for a pointer write.
enum FcStatus fc_gate_new(uint32_t delay_bins,
                          double theta1,
                          double theta2,
                          uint32_t window_bins,
                          struct FcGate **out);

// # Safety
// `gate` must come from [`fc_gate_new`] and not be freed twice. Null is a no-op.
void fc_gate_free(struct FcGate *gate);

// Writes the 4×4 table of post-selected probabilities, row-major; rows
// are inputs HH, HV, VH, VV and columns detected outputs in the same order.
//
// # Safety
// `out` must point to 16 writable doubles.
enum FcStatus fc_truth_table(const struct FcGate *gate, double *out);

// Runs the control input `alpha|H> + beta|V>` with the target in `H`
// (`target_v == 0`) or `V`.
//
// # Safety
// `out` must be valid for a write.
enum FcStatus fc_entangle(const struct FcGate *gate,
                          double alpha_re,
                          double alpha_im,
                          double beta_re,
                          double beta_im,
                          uint8_t target_v,
                          struct FcEntangleResult *out);

// Coincidence probability behind diagonal analyzers at each total phase.
// The gate's own phases are replaced by `thetas[k]`.
//
// # Safety
// `thetas` and `out` must point to `n` doubles each.
enum FcStatus fc_fringe_scan(const struct FcGate *gate,
                             const double *thetas,
                             size_t n,
                             double *out);

// # Safety
// `thetas` and `values` must point to `n` doubles; `out` must be writable.
enum FcStatus fc_fit_fringe(const double *thetas,
                            const double *values,
                            size_t n,
                            struct FcFringeFit *out);

// `(p_hh + p_vv + visibility) / 2`
//
// # Safety
// `out` must be valid for a write.
enum FcStatus fc_fidelity(double p_hh, double p_vv, double visibility, double *out);

// Number of branch pairs of a cascade that land inside the window.
// Zero means the cascade is safe.
//
// # Safety
// `delays` must point to `n` values; `out` must be writable.
enum FcStatus fc_cascade_conflict_count(const uint32_t *delays,
                                        size_t n,
                                        uint32_t window_bins,
                                        size_t *out);

// Fills `out` with the noiseless defaults (unit efficiencies, no dark
// counts, leakage or jitter).
//
// # Safety
// `out` must be valid for a write.
enum FcStatus fc_noise_default(struct FcNoiseConfig *out);

// Counting version of [`fc_truth_table`]. Both outputs are 16 values,
// row-major; `renormalized` divides each row by its count total.
//
// # Safety
// `noise` must be readable; `counts` and `renormalized` must each point to
// 16 writable values.
enum FcStatus fc_montecarlo_truth_table(const struct FcGate *gate,
                                        const struct FcNoiseConfig *noise,
                                        uint64_t *counts,
                                        double *renormalized);

// Copies the calling thread's last error message into `buf` (always NUL
// terminated when `len > 0`) and returns the length the full message needs,
// including the terminator. Returns 0 when there is no error.
//
// # Safety
// `buf` must point to `len` writable bytes, or be null with `len == 0`.
size_t fc_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *fc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRANSON_CNOT_H */
