#pragma once

#include <vector>

#include "nesy/logic.hpp"

namespace nesy {

// Per-feature categorical distributions over a FeatureSpace. Produced by
// grouped_softmax; all downstream math is double precision.
struct GroupedDistribution {
    const FeatureSpace* space = nullptr;
    std::vector<std::vector<double>> p;  // p[f][v], each row sums to 1

    double prob(const Assignment& a) const;  // product over features
};

// Per-feature softmax with max subtraction. `logits` is the concatenation of
// one block per feature (block width = domain size); throws on width mismatch.
GroupedDistribution grouped_softmax(const std::vector<double>& logits, const FeatureSpace& space);

struct SemLossResult {
    double loss = 0.0;
    std::vector<double> dlogits;  // same width as the softmax input
    bool zero_mass = false;       // feedback mass was 0: loss inf, gradient zeroed
};

// Negative log of the total probability mass the distribution puts on the
// feedback assignments, with the analytic gradient pushed back through the
// grouped softmax. The mass gradient uses prefix/suffix products per
// assignment, so zero-probability entries need no special casing.
SemLossResult semantic_loss(const GroupedDistribution& dist, const std::vector<Assignment>& feedback);

// prediction carrying the extracted assignment alongside the class
constexpr int kInvalid = -2;
struct Deduction {
    int label = kInvalid;   // class index, kBottom, or kInvalid
    Assignment extracted;   // chosen conjunct (max-conjunct) or the input (exact-match)
};

// Highest-probability conjunct across the whole theory; ties keep the first
// conjunct in class-then-canonical order. Never invalid.
Deduction deduce_max_conjunct(const GroupedDistribution& dist, const Theory& t);

// Exact lookup of a in the feedback partition. Absent or bottom section both
// score as invalid predictions.
Deduction deduce_exact_match(const Assignment& a, const FeedbackSet& fs);

}  // namespace nesy
