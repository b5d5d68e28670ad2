/*
 * Copyright 2026 The sjslab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SJSLAB_SRC_INTERNAL_H_
#define SJSLAB_SRC_INTERNAL_H_

#include <span>
#include <vector>

#include "sjs/discrete.h"

namespace sjs::internal {

// Validates a target feature marginal (size, sign, total within 1e-9 of 1)
// and returns it renormalized.
std::vector<double> NormalizedTargetMarginal(const FeatureSpace& space,
                                             std::span<const double> q);

}  // namespace sjs::internal

#endif  // SJSLAB_SRC_INTERNAL_H_
