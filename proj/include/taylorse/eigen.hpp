// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

// Small products otherwise take a coefficient-wise path whose summation order
// depends on buffer alignment, so results would vary between calls.
#ifndef EIGEN_GEMM_TO_COEFFBASED_THRESHOLD
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 0
#endif

#include <Eigen/Core>

static_assert(EIGEN_GEMM_TO_COEFFBASED_THRESHOLD == 0,
              "include taylorse headers before Eigen, or define "
              "EIGEN_GEMM_TO_COEFFBASED_THRESHOLD=0");
