#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "sqsem.h"

#define CHECK(cond)                                                   \
  do {                                                                \
    if (!(cond)) {                                                    \
      const char *msg = sqsem_last_error();                           \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond,  \
              msg ? msg : "no error");                                \
      return 1;                                                       \
    }                                                                 \
  } while (0)

int main(void) {
  SqsemMoments m;
  CHECK(sqsem_squeezed_moments(2.0, 0.0, 0.5, &m) == SQSEM_STATUS_OK);
  CHECK(fabs(m.mean - 1.743058) < 1e-6);

  CHECK(sqsem_squeezed_moments(-1.0, 0.0, 0.5, &m) == SQSEM_STATUS_OUT_OF_RANGE);
  CHECK(sqsem_last_error() != NULL);

  SqsemPulseTrain pt = {8.0e7, 1.0e6, 0.9, 1.0e-3, 42};
  SqsemSemConfig gain = {1.01, 2.0 * 3.14159265358979 * 4.0e6, 1.0e6, 1.25e-8, 0.9, 0.0};
  SqsemTechnicalNoise tn = {0.0, 1.0e5};
  SqsemDetector det = {0.85, 0.0, 1.0e8};
  SqsemTrace *trace = NULL;
  CHECK(sqsem_trace_simulate(&pt, &gain, &tn, &det, &trace) == SQSEM_STATUS_OK);
  CHECK(sqsem_trace_len(trace) == 80000);

  SqsemPsd *psd = NULL;
  CHECK(sqsem_psd_estimate(trace, 2.0e4, 10, "hann", &psd) == SQSEM_STATUS_OK);
  size_t n = sqsem_psd_len(psd);
  double *values = malloc(n * sizeof(double));
  CHECK(sqsem_psd_copy(psd, NULL, values, n) == SQSEM_STATUS_OK);
  CHECK(values[0] > 0.0);
  free(values);

  SqsemPeak peak;
  CHECK(sqsem_psd_extract_peak(psd, 4.0e6, 3, 8, 40, &peak) == SQSEM_STATUS_OK);
  CHECK(peak.peak_power > 0.0);

  sqsem_psd_free(psd);
  sqsem_trace_free(trace);
  sqsem_trace_free(NULL);
  printf("ok %s\n", sqsem_version());
  return 0;
}
