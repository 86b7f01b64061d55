#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nesy/rng.hpp"

namespace nesy {

// One value per feature, stored as indices into the feature's domain.
// Ordering (and the canonical order of conjunct lists) is lexicographic
// on the index tuple.
struct Assignment {
    std::vector<uint8_t> v;
    auto operator<=>(const Assignment&) const = default;
};

struct FeatureSpace {
    std::vector<std::string> features;              // feature identifiers
    std::vector<std::vector<std::string>> domains;  // per-feature value identifiers

    size_t num_features() const { return features.size(); }
    size_t domain_size(size_t f) const { return domains[f].size(); }
    uint64_t total_assignments() const;
    // index of a value identifier within feature f's domain, -1 if absent
    int value_index(size_t f, const std::string& id) const;
    bool contains(const Assignment& a) const;
    // all assignments in canonical (lexicographic) order; meant for small spaces
    std::vector<Assignment> enumerate() const;
};

// builds a space with auto-named features f1..fk and validates invariants
FeatureSpace make_space(std::vector<std::vector<std::string>> domains);

// class index used for the bottom label
constexpr int kBottom = -1;

// Extensional DNF theory: each class is defined by a set of total conjuncts,
// pairwise disjoint across classes. Assignments covered by no class map to
// the distinguished bottom label.
struct Theory {
    FeatureSpace space;
    std::vector<std::string> classes;
    std::vector<std::vector<Assignment>> defs;  // per class, canonically sorted
    std::string bottom = "bot";

    int evaluate(const Assignment& a) const;  // class index, or kBottom
    const std::string& label_name(int cls) const;
    int label_index(const std::string& name) const;  // kBottom for the bottom name
    size_t num_conjuncts() const;
};

// sorts defs into canonical order and checks validity (throws on violation)
void canonicalize(Theory& t);

std::string serialize_theory(const Theory& t);
Theory parse_theory(const std::string& text);
Theory load_theory(const std::string& path);
void save_theory(const std::string& path, const Theory& t);

// Draws a conjunct count per class uniformly from [lower, upper), then draws
// that many conjuncts per class without replacement globally. Count tuples
// exceeding the space capacity are redrawn, so the result always satisfies
// the disjointness invariant; throws only if labels.size()*lower can never fit.
Theory sample_theory(const FeatureSpace& space, const std::vector<std::string>& labels,
                     int lower, int upper, Rng& rng);

// assignments from `admissible` consistent with label y (kBottom allowed)
std::vector<Assignment> abduce(const Theory& t, int y, const std::vector<Assignment>& admissible);
// same over the full assignment space (small spaces only)
std::vector<Assignment> abduce(const Theory& t, int y);

// Cached abductive feedback: for every label (classes first, bottom last) the
// admissible assignments evaluating to it. Sections partition the admissible set.
struct FeedbackSet {
    FeatureSpace space;
    std::vector<std::string> labels;
    std::vector<std::vector<Assignment>> sets;  // sorted per section

    // section index containing a, or -1 if absent everywhere
    int find(const Assignment& a) const;
    size_t total() const;
};

FeedbackSet build_feedback(const Theory& t, const std::vector<Assignment>& admissible);
FeedbackSet build_feedback(const Theory& t);

std::string serialize_feedback(const FeedbackSet& fs);
FeedbackSet parse_feedback(const std::string& text, const FeatureSpace& space);
FeedbackSet load_feedback(const std::string& path, const FeatureSpace& space);
void save_feedback(const std::string& path, const FeedbackSet& fs);

}  // namespace nesy
