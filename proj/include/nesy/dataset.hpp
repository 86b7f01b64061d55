#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nesy/logic.hpp"

namespace nesy {

// FNV-1a, used to fingerprint dataset payloads and theories
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

// In-memory dataset for both domains. Items are (c,h,w) float blocks holding
// network-ready values (already scaled); `truth` is the generating assignment.
struct Dataset {
    int n = 0;
    int c = 0, h = 0, w = 0;
    std::vector<float> data;           // n * c*h*w, row-major
    std::vector<int> label;            // class index per instance
    std::vector<Assignment> truth;     // generating assignment per instance
    std::vector<int8_t> order;         // ts: 0 = train order, 1 = same, 2 = swapped
    FeatureSpace space;
    std::vector<std::string> classes;
    std::string domain;                // "chess" | "ts"
    std::string scaling;               // "minmax" | "znorm"
    double sigma = 0.0;
    uint64_t seed = 0;
    uint64_t stream_hash = 0;          // ts: fingerprint of the noised raw streams

    int item_size() const { return c * h * w; }
    const float* item(int i) const { return data.data() + static_cast<size_t>(i) * item_size(); }
    float* item(int i) { return data.data() + static_cast<size_t>(i) * item_size(); }
    uint64_t content_hash() const;
};

// Directory layout: `meta` (key: value lines), `images.bin` or `series.bin`
// (float32 little-endian), `labels.csv` (class, truth values, ts order flag).
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

}  // namespace nesy
