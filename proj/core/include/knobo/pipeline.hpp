#pragma once

#include <span>

#include "knobo/concept_gen.hpp"
#include "knobo/grounding.hpp"

namespace knobo {

/// Support for a candidate concept: the positive/negative annotation counts
/// over the reports that would train its grounder. `pairs` and `oracle` must
/// outlive the returned function.
SupportFn report_support(std::span<const PretrainPair> pairs, AnnotationOracle& oracle,
                         const SamplingConfig& sampling);

}  // namespace knobo
