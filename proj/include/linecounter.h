/* LineCounter: per-pixel text-line counting for handwritten document pages.
 *
 * C API over the training/inference core. All functions return LC_OK (0) or
 * an LC_E* code; lc_last_error() describes the most recent failure on the
 * calling thread. Handles are opaque and single-threaded; distinct handles
 * may be used from distinct threads.
 */
#ifndef LINECOUNTER_H
#define LINECOUNTER_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define LC_OK 0
#define LC_EINVAL 1   /* bad argument or configuration */
#define LC_ESHAPE 2   /* tensor/page extent mismatch */
#define LC_EIO 3      /* file system failure */
#define LC_EFORMAT 4  /* malformed file (PGM, manifest, checkpoint, JSON) */
#define LC_ENUMERIC 5 /* non-finite values during training/inference */
#define LC_ESTATE 6   /* operation not valid for the handle's state */

typedef struct lc_model lc_model;

const char* lc_version(void);

/* thread-local message for the last failing call on this thread */
const char* lc_last_error(void);

/* caps worker/BLAS threads; also settable via LINECOUNTER_THREADS */
int lc_set_threads(int n);

/* Builds a fresh model. config_json may be "{}" for the default
 * configuration; unknown keys are rejected by value, see README for the
 * schema. Parameters are deterministic in (config, seed). */
int lc_model_build(const char* config_json, uint64_t seed, lc_model** out);

/* Loads a .lcnt checkpoint (parameters, batchnorm statistics and, when
 * present, optimizer state for resuming). */
int lc_model_open(const char* checkpoint_path, lc_model** out);

int lc_model_save(lc_model* m, const char* checkpoint_path);
void lc_model_close(lc_model* m);

/* resolved configuration as JSON; free with lc_string_free */
int lc_model_config(lc_model* m, char** json_out);
int lc_model_param_count(lc_model* m, uint64_t* count_out);

/* Writes `count` synthetic page pairs (image PGM + 16-bit line-map PGM) and
 * a manifest.json into out_dir. spec_json may be "{}" for defaults. The
 * output is byte-deterministic in (spec, count, seed). manifest_path_out is
 * optional; free with lc_string_free. */
int lc_synth_dataset(const char* spec_json, int count, uint64_t seed, const char* out_dir,
                     char** manifest_path_out);

typedef struct {
  int epoch;
  double loss;
  double dr, ra, fm;
  double lr; /* after this epoch's schedule update */
} lc_epoch_stats;

/* return 0 to continue, nonzero to stop after the current epoch */
typedef int (*lc_epoch_callback)(const lc_epoch_stats* stats, void* user);

typedef struct {
  double best_fm;
  int epochs_run;
} lc_train_summary;

/* Trains in place. options_json keys (all optional): epochs, batch_size,
 * lr, patience, seed, fg_threshold, match_threshold, target_fm, resume.
 * val_manifest may be NULL (validation then runs on the training set).
 * out_dir (may be NULL) receives log.csv, checkpoint_best.lcnt and
 * checkpoint_last.lcnt. With "resume": true the optimizer state loaded from
 * the checkpoint continues the original step trajectory. */
int lc_train(lc_model* m, const char* train_manifest, const char* val_manifest,
             const char* options_json, const char* out_dir, lc_epoch_callback cb, void* user,
             lc_train_summary* summary_out);

/* Full-page inference: reads an 8-bit PGM, writes the predicted line map as
 * 16-bit PGM and optionally a color-coded PPM (label k -> palette[k mod 12]). */
int lc_infer_file(lc_model* m, const char* image_pgm, const char* out_linemap_pgm,
                  const char* out_viz_ppm, float fg_threshold);

/* In-memory inference: image is row-major grayscale in [0,1] (1 = white),
 * labels_out has width*height int32 slots. */
int lc_infer_buffer(lc_model* m, const float* image, int width, int height, float fg_threshold,
                    int32_t* labels_out);

/* DR/RA/FM one-to-one evaluation of det line maps against gt line maps;
 * the two manifests pair by index. Outputs are optional; free with
 * lc_string_free. */
int lc_evaluate(const char* gt_manifest, const char* det_manifest, double match_threshold,
                char** report_json_out, char** table_out);

void lc_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* LINECOUNTER_H */
