// lseend/hungarian.h

// Copyright 2026  The lseend Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef LSEEND_HUNGARIAN_H_
#define LSEEND_HUNGARIAN_H_

#include <vector>

#include "lseend/common.h"

namespace lseend {

/// Minimum-cost assignment on a rectangular cost matrix. Returns, for every
/// row, the assigned column or -1 when there are more rows than columns.
std::vector<int> SolveAssignment(const MatrixD& cost);

}  // namespace lseend

#endif  // LSEEND_HUNGARIAN_H_
