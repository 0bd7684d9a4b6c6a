/* Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <math.h>
#include <stdio.h>

#include "shiftnet.h"

#define CHECK(x)                                                       \
    do {                                                               \
        SnStatus s_ = (x);                                             \
        if (s_ != SN_STATUS_OK) {                                      \
            fprintf(stderr, "%s: %d %s\n", #x, s_, sn_last_error()); \
            return 1;                                                  \
        }                                                              \
    } while (0)

int main(void) {
    uint64_t src[] = {1, 2, 1, 7, 8, 7, 3};
    uint64_t dst[] = {2, 3, 3, 8, 9, 9, 7};
    SnGraph *g = NULL;
    CHECK(sn_graph_from_edges(src, dst, 7, &g));

    size_t n = 0;
    CHECK(sn_graph_node_count(g, &n));
    if (n != 6) {
        fprintf(stderr, "node count %zu\n", n);
        return 1;
    }
    double pr[6];
    CHECK(sn_pagerank(g, 0.85, 1e-10, 200, pr, 6));
    double total = 0;
    for (size_t i = 0; i < n; i++) total += pr[i];
    if (fabs(total - 1.0) > 1e-9) {
        fprintf(stderr, "pagerank sums to %f\n", total);
        return 1;
    }

    uint32_t labels[6];
    double q = 0;
    CHECK(sn_louvain(g, 1, labels, 6, &q));
    if (labels[0] != labels[2] || labels[0] == labels[3] || q < 0.35) {
        fprintf(stderr, "bad partition, q=%f\n", q);
        return 1;
    }

    double small[2];
    if (sn_betweenness(g, small, 2) != SN_STATUS_BUFFER_TOO_SMALL) return 1;
    sn_graph_free(g);

    double scores[] = {0.2, 0.9, 0.4};
    uint8_t y[] = {0, 1, 1};
    double auc = 0;
    CHECK(sn_roc_auc(scores, y, 3, &auc));
    if (auc != 1.0) return 1;
    printf("ok\n");
    return 0;
}
