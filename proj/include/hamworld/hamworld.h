#ifndef HAMWORLD_H
#define HAMWORLD_H

/* C interface to the hamworld library. Every call returns an hw_status;
 * on failure hw_last_error() describes the problem (thread-local, valid
 * until the next call on the same thread). */

#include <stddef.h>

#if defined(HAMWORLD_BUILDING_LIBRARY)
#define HW_API __attribute__((visibility("default")))
#else
#define HW_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hw_status {
  HW_OK = 0,
  HW_ERR_RUNTIME = 1,
  HW_ERR_CONFIG = 2,
  HW_ERR_CHECKPOINT = 3,
  HW_ERR_ARGUMENT = 4
} hw_status;

typedef struct hw_config hw_config;
typedef struct hw_checkpoint hw_checkpoint;
typedef struct hw_result hw_result;

typedef struct hw_run_options {
  int overwrite;   /* nonzero: allow writing into a non-empty run dir */
  size_t workers;  /* 0: keep the config's value */
} hw_run_options;

HW_API const char* hw_version(void);
HW_API const char* hw_last_error(void);

/* Run configs. */
HW_API hw_status hw_config_load(const char* path, hw_config** out);
HW_API hw_status hw_config_parse(const char* json_text, hw_config** out);
HW_API void hw_config_free(hw_config* cfg);
/* Writes the model-shape hash (NUL-terminated, 17 bytes incl. NUL). */
HW_API hw_status hw_config_hash(const hw_config* cfg, char* buf, size_t len);
/* Resolved JSON; the returned string lives as long as cfg. */
HW_API const char* hw_config_resolved_json(const hw_config* cfg);

/* Checkpoints. expected_hash may be NULL to skip the compatibility check. */
HW_API hw_status hw_checkpoint_load(const char* path, const char* expected_hash,
                                    hw_checkpoint** out);
HW_API void hw_checkpoint_free(hw_checkpoint* ckpt);
HW_API hw_status hw_checkpoint_hash(const hw_checkpoint* ckpt, char* buf, size_t len);
HW_API hw_status hw_checkpoint_step(const hw_checkpoint* ckpt, size_t* out);

/* Commands. The returned status mirrors the process exit code; *out (when
 * not NULL) receives the command's stdout/stderr text and must be freed. */
HW_API hw_status hw_cmd_pretrain(const char* config_path, const hw_run_options* opts,
                                 hw_result** out);
HW_API hw_status hw_cmd_adapt(const char* config_path, const char* checkpoint_path,
                              const char* mode, const hw_run_options* opts, hw_result** out);
/* checkpoint_path may be NULL or "" to use the ground-truth field. */
HW_API hw_status hw_cmd_ablate_integrator(const char* config_path, const char* checkpoint_path,
                                          const hw_run_options* opts, hw_result** out);
/* corrupt_family: NULL/"" for a normal run. */
HW_API hw_status hw_cmd_gradcheck(const char* corrupt_family, hw_result** out);

HW_API const char* hw_result_output(const hw_result* r);
HW_API const char* hw_result_error(const hw_result* r);
HW_API void hw_result_free(hw_result* r);

#ifdef __cplusplus
}
#endif

#endif /* HAMWORLD_H */
