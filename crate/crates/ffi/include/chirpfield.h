#ifndef CHIRPFIELD_H
#define CHIRPFIELD_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CfStatus {
  CF_STATUS_OK = 0,
  CF_STATUS_INVALID_ARGUMENT = 1,
  CF_STATUS_NUMERIC_FAILURE = 2,
  CF_STATUS_CONFIG = 3,
  CF_STATUS_IO = 4,
  CF_STATUS_NULL_POINTER = 5,
  CF_STATUS_PANIC = 6,
  /*
   scenario has no closed form (RIS-free, blind)
   */
  CF_STATUS_UNSUPPORTED = 7,
} CfStatus;

enum CfScenario
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : uint32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  CF_SCENARIO_CASE_A = 0,
  CF_SCENARIO_CASE_B = 1,
  CF_SCENARIO_RIS_FREE = 2,
  CF_SCENARIO_BLIND = 3,
  CF_SCENARIO_NO_INTERFERENCE = 4,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum CfScenario CfScenario;
#else
typedef uint32_t CfScenario;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

enum CfDetection
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : uint32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  CF_DETECTION_NON_COHERENT = 0,
  CF_DETECTION_COHERENT = 1,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum CfDetection CfDetection;
#else
typedef uint32_t CfDetection;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/*
 Opaque analytic context: LoRa parameters and Gamma fits for one `(SF, m, N)`.
 */
typedef struct CfAnalytic CfAnalytic;

/*
 Analytic BER components.
 */
typedef struct CfBer {
  double ber;
  double p_noise;
  double p_interf;
} CfBer;

/*
 Monte Carlo estimate with a 95% Wilson interval.
 */
typedef struct CfSimResult {
  double ber;
  double ci_low;
  double ci_high;
  uint64_t bit_errors;
  uint64_t bits_sent;
} CfSimResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *cf_version(void);

/*
 Message of the last failed call on this thread, or NULL. Valid until the
 next failing call on the same thread.
 */
const char *cf_last_error(void);

/*
 Gaussian tail probability `Q(x)`.
 */
double cf_q_exact(double x);

/*
 Peak-bin interference bound `χ_I` for symbol difference `i` and offset `tau`.

 # Safety
 `out` must be valid for one `double` write.
 */
enum CfStatus cf_chi_of_i(uint32_t sf, size_t i, size_t tau, double *out);

/*
 Creates an analytic context for spreading factor `sf`, Nakagami shape `m`
 on every link and `n_elements` RIS elements.

 # Safety
 `out` must be valid for one pointer write.
 */
enum CfStatus cf_analytic_new(uint32_t sf, double m, size_t n_elements, struct CfAnalytic **out);

/*
 Releases a context. NULL is ignored.

 # Safety
 `handle` must come from [`cf_analytic_new`] and not be used afterwards.
 */
void cf_analytic_free(struct CfAnalytic *handle);

/*
 Analytic BER at `snr_db`. RIS-free and blind scenarios return
 `CF_STATUS_UNSUPPORTED`.

 # Safety
 `handle` must be a live context; `out` must be valid for one write.
 */
enum CfStatus cf_analytic_ber(const struct CfAnalytic *handle,
                              uint32_t scenario_id,
                              uint32_t detection_id,
                              double snr_db,
                              struct CfBer *out);

/*
 Monte Carlo BER for the context's `(SF, m, N)` at one SNR. `max_bit_errors`
 of 0 disables early stopping.

 # Safety
 `handle` must be a live context; `out` must be valid for one write.
 */
enum CfStatus cf_simulate_point(const struct CfAnalytic *handle,
                                uint32_t scenario_id,
                                uint32_t detection_id,
                                double snr_db,
                                uint64_t trials,
                                uint64_t seed,
                                uint64_t max_bit_errors,
                                struct CfSimResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHIRPFIELD_H */
