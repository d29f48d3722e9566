#include "knobo/pipeline.hpp"

namespace knobo {

SupportFn report_support(std::span<const PretrainPair> pairs, AnnotationOracle& oracle,
                         const SamplingConfig& sampling) {
  return [pairs, &oracle, sampling](const std::string& question) {
    const auto set = build_grounding_set(question, pairs, oracle, sampling);
    return SupportCounts{set.positives, set.negatives};
  };
}

}  // namespace knobo
