/* C interface to the single-index-model learning library.
 *
 * All functions return sim_status; on failure sim_last_error() describes the
 * most recent error in the calling thread. Objects returned through out
 * parameters are owned by the caller and released with the matching _free.
 */
#ifndef SIM_CAPI_H
#define SIM_CAPI_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SIM_API __declspec(dllexport)
#else
#define SIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sim_status {
    SIM_OK = 0,
    SIM_ERR_CONFIG = 1,  /* invalid configuration or hyperparameters */
    SIM_ERR_IO = 2,      /* file or parse failure */
    SIM_ERR_INVALID = 3, /* bad argument (null pointer, dimension mismatch) */
    SIM_ERR_INTERNAL = 4
} sim_status;

typedef struct sim_dataset sim_dataset;
typedef struct sim_hypothesis sim_hypothesis;

/* Message for the last failing call in this thread; empty string if none. */
SIM_API const char* sim_last_error(void);

/* ---- datasets ---- */

SIM_API sim_status sim_dataset_load_csv(const char* path, sim_dataset** out);
SIM_API sim_status sim_dataset_save_csv(const sim_dataset* data, const char* path);

/* Draws m samples from the scenario section of config_json; stream_id picks
 * an independent reproducible stream for a fixed scenario seed. A nonzero
 * has_seed replaces the scenario seed with `seed`. */
SIM_API sim_status sim_generate(const char* config_json, size_t m,
                                uint64_t stream_id, int has_seed, uint64_t seed,
                                sim_dataset** out);

SIM_API size_t sim_dataset_size(const sim_dataset* data);
SIM_API size_t sim_dataset_dim(const sim_dataset* data);
SIM_API void sim_dataset_free(sim_dataset* data);

/* ---- hypotheses ---- */

SIM_API sim_status sim_hypothesis_load_json(const char* path, sim_hypothesis** out);
SIM_API sim_status sim_hypothesis_save_json(const sim_hypothesis* hyp,
                                            const char* path);
SIM_API sim_status sim_hypothesis_to_json(const sim_hypothesis* hyp, char** out_text);
SIM_API sim_status sim_hypothesis_predict(const sim_hypothesis* hyp, const double* x,
                                          size_t d, double* out);
/* Mean squared error of the hypothesis on the dataset. */
SIM_API sim_status sim_hypothesis_loss(const sim_hypothesis* hyp,
                                       const sim_dataset* data, double* out);
SIM_API void sim_hypothesis_free(sim_hypothesis* hyp);
SIM_API void sim_string_free(char* text);

/* ---- fitting and training ---- */

/* Best monotone Lipschitz activation (slopes in [0,b], at least a on z >= 0,
 * value 0 at 0) for the projections w.x against the labels; the result pairs
 * the given w with the fitted activation. */
SIM_API sim_status sim_fit_activation(const double* w, size_t d,
                                      const sim_dataset* data, double a, double b,
                                      sim_hypothesis** out);

/* Reads learner.a and learner.b from a config (defaults when absent). */
SIM_API sim_status sim_config_learner_ab(const char* config_json, double* a,
                                         double* b);

typedef struct sim_run_options {
    const char* out_dir; /* required */
    /* "all": learn plus configured probes; "learn": learn only; "probes":
     * configured probes only; "sharpness" | "misalignment" | "contraction":
     * that probe only (a default spec is used when the config lists none). */
    const char* mode;
    int has_seed; /* nonzero: seed overrides both scenario and learner seeds */
    uint64_t seed;
    size_t workers;
} sim_run_options;

/* Parses config_json (sections scenario/learner/probes; unknown keys are
 * errors), runs the requested work and writes CSV tables plus summary.json
 * under out_dir. */
SIM_API sim_status sim_run_experiment(const char* config_json,
                                      const sim_run_options* options);

/* Fixed-activation negative-correlation study (d = 4, Gaussian, realizable
 * identity target, u pinned to slope 4, w = w* / 2): Monte-Carlo estimate of
 * grad . (w - w*), its standard error, and the analytic value -0.5. */
SIM_API sim_status sim_repro_example(size_t m, uint64_t seed, double* estimate,
                                     double* std_error, double* target);

#ifdef __cplusplus
}
#endif

#endif /* SIM_CAPI_H */
