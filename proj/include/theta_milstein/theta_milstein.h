/*
 * Copyright 2026 The theta-milstein Authors
 * SPDX-License-Identifier: Apache-2.0
 */

/* C interface to the theta-Milstein library.
 *
 * Every function that can fail returns a tm_status. On failure the message is
 * available from tm_last_error() on the same thread until the next failing
 * call. Objects handed out through `**out` parameters are owned by the caller
 * and released with the matching *_free function. Handles are immutable and
 * may be shared between threads.
 */

#ifndef THETA_MILSTEIN_H
#define THETA_MILSTEIN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(THETA_MILSTEIN_BUILDING)
#    define TM_API __declspec(dllexport)
#  else
#    define TM_API __declspec(dllimport)
#  endif
#else
#  define TM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tm_status {
  TM_OK = 0,
  TM_ERR_CONTRACT = 1,
  TM_ERR_DOMAIN = 2,
  TM_ERR_NONCONVERGENCE = 3,
  TM_ERR_DIVERGENCE = 4,
  TM_ERR_GUARD = 5,
  TM_ERR_REFERENCE = 6,
  TM_ERR_MISSING_CONSTANT = 7,
  TM_ERR_SINGULAR = 8,
  TM_ERR_IO = 9,
  TM_ERR_NULL_ARGUMENT = 10,
  TM_ERR_INTERNAL = 11
} tm_status;

typedef enum tm_scheme { TM_SCHEME_SSTM = 0, TM_SCHEME_STM = 1 } tm_scheme;
typedef enum tm_guard_policy { TM_GUARD_STRICT = 0, TM_GUARD_WARN = 1, TM_GUARD_OFF = 2 } tm_guard_policy;
typedef enum tm_solver_method { TM_SOLVER_NEWTON_FALLBACK = 0, TM_SOLVER_FIXED_POINT = 1 } tm_solver_method;
typedef enum tm_format { TM_FORMAT_CSV = 0, TM_FORMAT_JSON = 1 } tm_format;

typedef struct tm_problem tm_problem;
typedef struct tm_trajectory tm_trajectory;
typedef struct tm_report tm_report;

TM_API const char* tm_version(void);
TM_API const char* tm_status_name(tm_status status);
TM_API const char* tm_last_error(void);
/* Step index carried by the last TM_ERR_DIVERGENCE on this thread. */
TM_API size_t tm_last_divergence_step(void);

/* ---- problems ---------------------------------------------------------- */

typedef struct tm_problem_constants {
  double mu;
  double c;
  double sigma;
  int has_k_linear;
  double k_linear;
  int has_gamma;
  double gamma;
} tm_problem_constants;

typedef void (*tm_vector_fn)(const double* x, double* out, size_t dim, void* user);
/* Writes a dim x dim matrix in row-major order. */
typedef void (*tm_matrix_fn)(const double* x, double* out, size_t dim, void* user);

typedef struct tm_problem_callbacks {
  size_t dim;
  tm_vector_fn drift;
  tm_vector_fn diffusion;
  tm_matrix_fn diffusion_jacobian;
  tm_matrix_fn drift_jacobian; /* may be NULL */
  void* user;
} tm_problem_callbacks;

/* name is one of "linear", "ginzburg_landau", "cubic_additive". */
TM_API tm_status tm_problem_builtin(const char* name, const char* const* keys, const double* values, size_t count,
                                    tm_problem** out);
/* The callbacks and `user` must outlive the returned handle. */
TM_API tm_status tm_problem_custom(const char* name, const tm_problem_callbacks* callbacks,
                                   const tm_problem_constants* constants, tm_problem** out);
TM_API void tm_problem_free(tm_problem* problem);
TM_API size_t tm_problem_dim(const tm_problem* problem);
TM_API int tm_problem_has_exact_solution(const tm_problem* problem);
TM_API tm_status tm_problem_get_constants(const tm_problem* problem, tm_problem_constants* out);
TM_API tm_status tm_l1g(const tm_problem* problem, const double* x, double* out);
TM_API tm_status tm_monotone_constants(const tm_problem* problem, double* alpha, double* beta);

typedef struct tm_thresholds {
  double wellposed_max;
  double moment_bound_max;
  int has_stability_max;
  double stability_max;
} tm_thresholds;

TM_API tm_status tm_stepsize_thresholds(const tm_problem* problem, double theta, tm_thresholds* out);

/* ---- noise ------------------------------------------------------------- */

/* Writes fine_steps increments to `out`. */
TM_API tm_status tm_noise_generate(uint64_t seed, uint64_t path_index, double t_end, size_t fine_steps, double* out);
/* Writes count / factor sums to `out`. */
TM_API tm_status tm_noise_coarsen(const double* fine, size_t count, size_t factor, double* out);

typedef struct tm_moment_estimate {
  double estimate;
  double standard_error;
  double target;
} tm_moment_estimate;

typedef struct tm_moment_report {
  double dt;
  size_t count;
  tm_moment_estimate second;
  tm_moment_estimate fourth;
  tm_moment_estimate centered_square;
  tm_moment_estimate sixth;
} tm_moment_report;

TM_API tm_status tm_noise_moment_check(uint64_t seed, uint64_t path_index, double t_end, size_t fine_steps,
                                       tm_moment_report* out);
TM_API tm_status tm_noise_save(const char* path, uint64_t seed, uint64_t path_index, double t_end,
                               size_t fine_steps);
/* Reads a dump. If `out` is NULL or too small only the header fields are
 * filled and TM_OK is returned with *count set; call again with room. */
TM_API tm_status tm_noise_load(const char* path, double* out, size_t capacity, size_t* count, uint64_t* seed,
                               uint64_t* path_index, double* t_end);

/* ---- schemes ----------------------------------------------------------- */

typedef struct tm_scheme_config {
  double theta;
  double dt;
  double rel_tol;
  double abs_tol;
  int max_iters;
  tm_solver_method method;
  tm_guard_policy guard;
} tm_scheme_config;

TM_API void tm_scheme_config_init(tm_scheme_config* config);

TM_API tm_status tm_implicit_solve(const tm_problem* problem, const double* z, const tm_scheme_config* config,
                                   double* y, int* iterations);
TM_API tm_status tm_sstm_step(const tm_problem* problem, const double* z, double dw, const tm_scheme_config* config,
                              double* z_next, double* y);
TM_API tm_status tm_stm_step(const tm_problem* problem, const double* y, double dw, const tm_scheme_config* config,
                             double* y_next);
TM_API tm_status tm_integrate(const tm_problem* problem, tm_scheme scheme, const double* y0, const double* noise,
                              size_t steps, const tm_scheme_config* config, tm_trajectory** out);

TM_API void tm_trajectory_free(tm_trajectory* trajectory);
TM_API size_t tm_trajectory_points(const tm_trajectory* trajectory);
TM_API size_t tm_trajectory_dim(const tm_trajectory* trajectory);
TM_API const double* tm_trajectory_times(const tm_trajectory* trajectory);
TM_API tm_status tm_trajectory_y(const tm_trajectory* trajectory, size_t k, double* out);
TM_API int tm_trajectory_has_z(const tm_trajectory* trajectory);
TM_API tm_status tm_trajectory_z(const tm_trajectory* trajectory, size_t k, double* out);
TM_API int tm_trajectory_max_solver_iters(const tm_trajectory* trajectory);
TM_API size_t tm_trajectory_warning_count(const tm_trajectory* trajectory);
TM_API const char* tm_trajectory_warning(const tm_trajectory* trajectory, size_t index);
TM_API tm_status tm_trajectory_write(const tm_trajectory* trajectory, const char* path, tm_format format);

/* ---- analysis ---------------------------------------------------------- */

typedef struct tm_mc_setup {
  tm_scheme scheme;
  double theta;
  const double* y0; /* tm_problem_dim values */
  double t_end;
  int paths;
  uint64_t seed;
  int workers;
  double rel_tol;
  double abs_tol;
  int max_iters;
  tm_solver_method method;
  tm_guard_policy guard;
} tm_mc_setup;

TM_API void tm_mc_setup_init(tm_mc_setup* setup);

TM_API tm_status tm_estimate_strong_order(const tm_problem* problem, const tm_mc_setup* setup,
                                          const double* stepsizes, size_t count, int p, int refinement,
                                          tm_report** out);
TM_API tm_status tm_check_moment_bound(const tm_problem* problem, const tm_mc_setup* setup, double dt, int p,
                                       tm_report** out);
TM_API tm_status tm_estimate_ms_decay(const tm_problem* problem, const tm_mc_setup* setup, double dt,
                                      tm_report** out);
TM_API tm_status tm_linear_region_scan(const double* thetas, size_t n_thetas, const double* dts, size_t n_dts,
                                       const double* mus, size_t n_mus, const double* cs, size_t n_cs,
                                       tm_report** out);

TM_API tm_status tm_gamma_delta(double theta, double dt, double gamma, int has_k_linear, double k_linear,
                                double sigma, double* out);
TM_API tm_status tm_linear_amplification(double theta, double mu, double c, double dt, double* out);
TM_API tm_status tm_linear_critical_dt(double theta, double mu, double c, double* out);

/* ---- reports ----------------------------------------------------------- */

TM_API void tm_report_free(tm_report* report);
/* "convergence", "stability", "moment_bound" or "linear_region". */
TM_API const char* tm_report_kind(const tm_report* report);
/* Named scalar, e.g. "fitted_order", "fitted_decay", "estimate". */
TM_API tm_status tm_report_scalar(const tm_report* report, const char* key, double* out);
/* Named column, e.g. "errors", "second_moments", "R". With out == NULL only
 * *length is set. */
TM_API tm_status tm_report_column(const tm_report* report, const char* key, double* out, size_t capacity,
                                  size_t* length);
/* Serialized report. CSV output starts with the schema comment line when
 * `schema_tag` is non-NULL. Writes at most capacity-1 chars plus a NUL and
 * sets *needed to the full length (without NUL). */
TM_API tm_status tm_report_render(const tm_report* report, tm_format format, const char* schema_tag, char* buffer,
                                  size_t capacity, size_t* needed);
TM_API tm_status tm_report_write(const tm_report* report, const char* path, tm_format format,
                                 const char* schema_tag);

#ifdef __cplusplus
}
#endif

#endif /* THETA_MILSTEIN_H */
