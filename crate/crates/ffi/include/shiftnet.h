#ifndef SHIFTNET_H
#define SHIFTNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SnStatus {
  SN_STATUS_OK = 0,
  SN_STATUS_NULL_POINTER = 1,
  SN_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Output buffer shorter than the node count.
   */
  SN_STATUS_BUFFER_TOO_SMALL = 3,
  SN_STATUS_CONFIG = 4,
  SN_STATUS_DATA = 5,
  SN_STATUS_IO = 6,
  SN_STATUS_INTERNAL = 7,
  SN_STATUS_PANIC = 8,
} SnStatus;

/**
 * Opaque graph handle.
 */
typedef struct SnGraph SnGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next shiftnet call on the same thread.
 */
const char *sn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sn_version(void);

/**
 * Build an undirected graph from `n_edges` pairs `(src[i], dst[i])`.
 * Self-pairs are dropped and duplicates collapse; nodes without edges are
 * not represented.
 *
 * # Safety
 * `src` and `dst` must point to `n_edges` values; `out` must be writable.
 */
enum SnStatus sn_graph_from_edges(const uint64_t *src,
                                  const uint64_t *dst,
                                  size_t n_edges,
                                  struct SnGraph **out);

/**
 * Release a handle from [`sn_graph_from_edges`]. Null is ignored.
 *
 * # Safety
 * `g` must be null or a live handle; it must not be used afterwards.
 */
void sn_graph_free(struct SnGraph *g);

/**
 * # Safety
 * `g` must be a live handle and `out` writable.
 */
enum SnStatus sn_graph_node_count(const struct SnGraph *g, size_t *out);

/**
 * # Safety
 * `g` must be a live handle and `out` writable.
 */
enum SnStatus sn_graph_edge_count(const struct SnGraph *g, size_t *out);

/**
 * Node labels in output order.
 *
 * # Safety
 * `out` must hold `len` values.
 */
enum SnStatus sn_graph_nodes(const struct SnGraph *g, uint64_t *out, size_t len);

/**
 * PageRank by power iteration. Pass `max_iter = 0` to use the defaults
 * (damping 0.85, tol 1e-8, 100 iterations).
 *
 * # Safety
 * `out` must hold `len` values.
 */
enum SnStatus sn_pagerank(const struct SnGraph *g,
                          double damping,
                          double tol,
                          size_t max_iter,
                          double *out,
                          size_t len);

/**
 * Exact normalized betweenness.
 *
 * # Safety
 * `out` must hold `len` values.
 */
enum SnStatus sn_betweenness(const struct SnGraph *g, double *out, size_t len);

/**
 * Local clustering coefficient.
 *
 * # Safety
 * `out` must hold `len` values.
 */
enum SnStatus sn_clustering(const struct SnGraph *g, double *out, size_t len);

/**
 * Seeded Louvain. Writes community ids (contiguous from 0) and, if
 * `modularity` is non-null, the partition's modularity.
 *
 * # Safety
 * `out` must hold `len` values; `modularity` may be null.
 */
enum SnStatus sn_louvain(const struct SnGraph *g,
                         uint64_t seed,
                         uint32_t *out,
                         size_t len,
                         double *modularity);

/**
 * Modularity of an assignment given in output order.
 *
 * # Safety
 * `assignment` must hold `len` values and `out` must be writable.
 */
enum SnStatus sn_modularity(const struct SnGraph *g,
                            const uint32_t *assignment,
                            size_t len,
                            double *out);

/**
 * Area under the ROC curve. Labels must be 0 or 1 and both classes present.
 *
 * # Safety
 * `scores` and `labels` must hold `n` values; `out` must be writable.
 */
enum SnStatus sn_roc_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * Run every pipeline stage. `config_path` may be null for the built-in
 * defaults; a non-null `out_dir` overrides the configured output directory.
 *
 * # Safety
 * Non-null arguments must be NUL-terminated strings.
 */
enum SnStatus sn_pipeline_run(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHIFTNET_H */
