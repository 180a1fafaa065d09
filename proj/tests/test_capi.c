/* Exercises the C interface from a C translation unit. */

#include <stdio.h>
#include <string.h>

#include "hamworld/hamworld.h"

static int failures = 0;

#define CHECK(cond)                                                  \
  do {                                                               \
    if (!(cond)) {                                                   \
      fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                    \
    }                                                                \
  } while (0)

int main(void) {
  hw_config* cfg = NULL;
  char hash[17];
  char tiny[4];

  CHECK(strlen(hw_version()) > 0);

  CHECK(hw_config_parse("{\"kind\": \"pendulum\", \"seed\": 3}", &cfg) == HW_OK);
  CHECK(cfg != NULL);
  CHECK(hw_config_hash(cfg, hash, sizeof hash) == HW_OK);
  CHECK(strlen(hash) == 16);
  CHECK(hw_config_hash(cfg, tiny, sizeof tiny) == HW_ERR_ARGUMENT);
  CHECK(strstr(hw_config_resolved_json(cfg), "\"seed\": 3") != NULL);
  hw_config_free(cfg);
  cfg = NULL;

  CHECK(hw_config_parse("{\"kind\": \"pendulum\"}", &cfg) == HW_ERR_CONFIG);
  CHECK(cfg == NULL);
  CHECK(strstr(hw_last_error(), "seed") != NULL);
  CHECK(hw_config_parse(NULL, &cfg) == HW_ERR_ARGUMENT);
  CHECK(hw_config_load("/nonexistent/config.json", &cfg) != HW_OK);

  {
    hw_checkpoint* ck = NULL;
    CHECK(hw_checkpoint_load("/nonexistent/ckpt.json", NULL, &ck) != HW_OK);
    CHECK(ck == NULL);
    CHECK(hw_checkpoint_step(NULL, NULL) == HW_ERR_ARGUMENT);
  }

  {
    hw_result* r = NULL;
    CHECK(hw_cmd_pretrain(NULL, NULL, &r) == HW_ERR_ARGUMENT);
    CHECK(hw_cmd_gradcheck("no_such_family", &r) == HW_ERR_CONFIG);
    hw_result_free(r);
  }

  hw_config_free(NULL);
  hw_result_free(NULL);
  hw_checkpoint_free(NULL);

  if (failures == 0) printf("capi: all checks passed\n");
  return failures == 0 ? 0 : 1;
}
