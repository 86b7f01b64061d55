#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nesy/dataset.hpp"
#include "nesy/logic.hpp"
#include "nesy/rng.hpp"

namespace nesy {

// shape primitives, fixed numbering
enum : int {
    kBlank = 0,
    kSemiCircle = 1,
    kTriangle = 2,
    kGaussianShape = 3,
    kSquareWave = 4,
    kQuadrant = 5,
    kTrapezium = 6,
    kQuatrefoil = 7,
    kWWave = 8
};

enum class CycleOrder : int8_t { Train = 0, TestSame = 1, TestSwapped = 2 };

// one shape, 50 samples, amplitude in [0,1]
std::array<double, 50> shape_waveform(int shape);

// partitions the nine shapes into three groups of three; the resulting
// 3-feature space has the shape ids as value identifiers
FeatureSpace make_ts_space(Rng& rng);

// 3 features over all nine shapes each; the segmented variant trains its
// per-segment extractor against this widened space
FeatureSpace ts_shape_space();

// maps an assignment over `from` to the same shape ids in `to`
Assignment map_assignment(const Assignment& a, const FeatureSpace& from, const FeatureSpace& to);

// 150 samples: the conjunct's three waveforms concatenated; swapped order
// plays psi1, psi3, psi2
std::vector<double> build_cycle(const Assignment& c, const FeatureSpace& space, CycleOrder order);

// Per conjunct: a 10000-step train stream (train order) cut into
// non-overlapping windows, plus 768 same-order and 1536 swapped-order test
// steps (9 test windows at width 256). Gaussian noise N(0, sigma^2) is added
// to the streams, then every window is z-normalized. The streams do not
// depend on `window`, so the 256- and 150-wide variants of one seed share
// identical underlying data (asserted via Dataset::stream_hash).
struct TsDatasets {
    Dataset train;
    Dataset test;
};
TsDatasets generate_ts_dataset(const Theory& th, double sigma, int window, Rng& rng);

// exact three-way split of a cycle-aligned 150-sample window (the segments
// are contiguous, so batched code may also slice the window in place)
std::array<std::vector<float>, 3> segment_window(const std::vector<float>& w);

// mean 0, population std 1; constant windows map to zeros
void z_normalize(float* w, int len);
std::vector<double> z_normalize(std::vector<double> w);

// Normalizes each third of a cycle-aligned window in isolation, dividing by
// max(std, floor). The floor keeps low-energy segments (a blank is noise
// around a constant) from being blown up to unit variance, so every shape
// keeps one canonical appearance regardless of what else shares the window.
void renormalize_segments(float* w, int window, double floor = 0.25);

// Replaces all three feature labels of a uniformly drawn floor(alpha*n)
// subset (each with one of the other two values in its group), then
// shuffles the instance order.
Dataset corrupt_ts_labels(const Dataset& d, double alpha, Rng& rng);

}  // namespace nesy
