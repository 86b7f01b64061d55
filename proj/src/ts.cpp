#include "nesy/ts.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nesy {

std::array<double, 50> shape_waveform(int shape) {
    std::array<double, 50> w{};
    constexpr double pi = 3.14159265358979323846;
    for (int t = 0; t < 50; ++t) {
        const double u = t / 49.0;
        double v = 0.0;
        // Each shape claims its own signature (peak position, frequency,
        // edge profile) so they stay separable after per-segment
        // standardization; worst-case pairwise cosine of the standardized
        // set is ~0.58.
        switch (shape) {
            case kBlank: v = 0.0; break;
            case kSemiCircle: {
                // arc over [0.05, 0.45], peak at u = 0.25
                const double x = (u - 0.05) / 0.2 - 1.0;
                v = (u >= 0.05 && u <= 0.45) ? std::sqrt(std::max(0.0, 1.0 - x * x)) : 0.0;
                break;
            }
            case kTriangle: v = 1.0 - std::fabs(2.0 * u - 1.0); break;
            case kGaussianShape: v = std::exp(-(u - 0.35) * (u - 0.35) / (2.0 * 0.05 * 0.05)); break;
            case kSquareWave: v = ((u >= 0.25 && u < 0.5) || u >= 0.75) ? 1.0 : 0.0; break;
            case kQuadrant: v = std::sqrt(std::max(0.0, 1.0 - u * u)); break;
            case kTrapezium: v = std::min(1.0, u / 0.55); break;
            case kQuatrefoil: v = std::fabs(std::sin(4.0 * pi * u)); break;
            case kWWave: v = std::fabs(std::cos(2.0 * pi * u)); break;
            default: throw std::runtime_error("shape_waveform: unknown shape");
        }
        w[t] = v;
    }
    return w;
}

FeatureSpace make_ts_space(Rng& rng) {
    std::vector<int> shapes(9);
    std::iota(shapes.begin(), shapes.end(), 0);
    rng.shuffle(shapes);
    std::vector<std::vector<std::string>> domains(3);
    for (int f = 0; f < 3; ++f)
        for (int j = 0; j < 3; ++j) domains[f].push_back(std::to_string(shapes[f * 3 + j]));
    return make_space(std::move(domains));
}

FeatureSpace ts_shape_space() {
    std::vector<std::string> all;
    for (int s = 0; s < 9; ++s) all.push_back(std::to_string(s));
    return make_space({all, all, all});
}

Assignment map_assignment(const Assignment& a, const FeatureSpace& from, const FeatureSpace& to) {
    Assignment out;
    for (size_t f = 0; f < a.v.size(); ++f) {
        const int vi = to.value_index(f, from.domains[f][a.v[f]]);
        if (vi < 0) throw std::runtime_error("map_assignment: value missing in target space");
        out.v.push_back(static_cast<uint8_t>(vi));
    }
    return out;
}

std::vector<double> build_cycle(const Assignment& c, const FeatureSpace& space, CycleOrder order) {
    if (c.v.size() != 3 || !space.contains(c))
        throw std::runtime_error("build_cycle: conjunct not total over the 3-feature space");
    std::array<int, 3> shapes;
    for (int f = 0; f < 3; ++f) shapes[f] = std::stoi(space.domains[f][c.v[f]]);
    if (order == CycleOrder::TestSwapped) std::swap(shapes[1], shapes[2]);
    std::vector<double> out;
    out.reserve(150);
    for (int f = 0; f < 3; ++f) {
        const auto w = shape_waveform(shapes[f]);
        out.insert(out.end(), w.begin(), w.end());
    }
    return out;
}

void z_normalize(float* w, int len) {
    double mean = 0.0;
    for (int i = 0; i < len; ++i) mean += w[i];
    mean /= len;
    double var = 0.0;
    for (int i = 0; i < len; ++i) var += (w[i] - mean) * (w[i] - mean);
    var /= len;
    const double sd = std::sqrt(var);
    if (sd < 1e-12) {
        std::fill(w, w + len, 0.0f);
        return;
    }
    for (int i = 0; i < len; ++i) w[i] = static_cast<float>((w[i] - mean) / sd);
}

std::vector<double> z_normalize(std::vector<double> w) {
    std::vector<float> f(w.begin(), w.end());
    z_normalize(f.data(), static_cast<int>(f.size()));
    return {f.begin(), f.end()};
}

void renormalize_segments(float* w, int window, double floor) {
    if (window % 3 != 0) throw std::runtime_error("renormalize: window not divisible by 3");
    if (floor <= 0.0) throw std::runtime_error("renormalize: floor must be positive");
    const int len = window / 3;
    for (int s = 0; s < 3; ++s) {
        float* seg = w + s * len;
        double mean = 0.0;
        for (int i = 0; i < len; ++i) mean += seg[i];
        mean /= len;
        double var = 0.0;
        for (int i = 0; i < len; ++i) var += (seg[i] - mean) * (seg[i] - mean);
        const double sd = std::max(std::sqrt(var / len), floor);
        for (int i = 0; i < len; ++i) seg[i] = static_cast<float>((seg[i] - mean) / sd);
    }
}

std::array<std::vector<float>, 3> segment_window(const std::vector<float>& w) {
    if (w.size() != 150) throw std::runtime_error("segment_window: expected 150 samples");
    std::array<std::vector<float>, 3> out;
    for (int s = 0; s < 3; ++s) out[s].assign(w.begin() + s * 50, w.begin() + (s + 1) * 50);
    return out;
}

namespace {

// cycle repeated to `steps` samples plus sampling noise
std::vector<float> noised_stream(const std::vector<double>& cycle, int steps, double sigma,
                                 Rng& rng) {
    std::vector<float> s(steps);
    for (int t = 0; t < steps; ++t)
        s[t] = static_cast<float>(cycle[t % cycle.size()] + (sigma > 0 ? rng.gaussian(0, sigma) : 0.0));
    return s;
}

void push_windows(Dataset& ds, const std::vector<float>& stream, int window, int label,
                  const Assignment& truth, CycleOrder order) {
    const int k = static_cast<int>(stream.size()) / window;
    for (int i = 0; i < k; ++i) {
        const size_t base = ds.data.size();
        ds.data.insert(ds.data.end(), stream.begin() + i * window,
                       stream.begin() + (i + 1) * window);
        z_normalize(ds.data.data() + base, window);
        ds.label.push_back(label);
        ds.truth.push_back(truth);
        ds.order.push_back(static_cast<int8_t>(order));
        ++ds.n;
    }
}

}  // namespace

TsDatasets generate_ts_dataset(const Theory& th, double sigma, int window, Rng& rng) {
    if (th.space.num_features() != 3)
        throw std::runtime_error("ts dataset: theory must span 3 features");
    if (window != 256 && window != 150)
        throw std::runtime_error("ts dataset: window must be 256 or 150");

    TsDatasets out;
    for (Dataset* ds : {&out.train, &out.test}) {
        ds->c = 1;
        ds->h = 1;
        ds->w = window;
        ds->space = th.space;
        ds->classes = th.classes;
        ds->domain = "ts";
        ds->scaling = "znorm";
        ds->sigma = sigma;
    }

    uint64_t stream_hash = 0xcbf29ce484222325ull;
    for (size_t cls = 0; cls < th.classes.size(); ++cls) {
        for (const auto& conj : th.defs[cls]) {
            const auto train_cycle = build_cycle(conj, th.space, CycleOrder::Train);
            const auto swap_cycle = build_cycle(conj, th.space, CycleOrder::TestSwapped);
            // stream construction consumes rng identically for both window
            // widths, so the 256 and 150 cuts see the very same data
            const auto train_s = noised_stream(train_cycle, 10000, sigma, rng);
            const auto same_s = noised_stream(train_cycle, 768, sigma, rng);
            const auto swap_s = noised_stream(swap_cycle, 1536, sigma, rng);
            for (const auto* s : {&train_s, &same_s, &swap_s})
                stream_hash = fnv1a(s->data(), s->size() * sizeof(float), stream_hash);

            const int label = static_cast<int>(cls);
            push_windows(out.train, train_s, window, label, conj, CycleOrder::Train);
            push_windows(out.test, same_s, window, label, conj, CycleOrder::TestSame);
            push_windows(out.test, swap_s, window, label, conj, CycleOrder::TestSwapped);
        }
    }
    out.train.stream_hash = out.test.stream_hash = stream_hash;
    return out;
}

Dataset corrupt_ts_labels(const Dataset& d, double alpha, Rng& rng) {
    if (alpha < 0.0 || alpha > 1.0) throw std::runtime_error("corrupt: alpha out of range");
    Dataset out = d;
    std::vector<size_t> idx(d.n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    const size_t m = static_cast<size_t>(std::floor(alpha * d.n + 1e-9));
    rng.partial_shuffle(idx, m);
    for (size_t i = 0; i < m; ++i) {
        Assignment& a = out.truth[idx[i]];
        for (size_t f = 0; f < a.v.size(); ++f) {
            // one of the other two values in this feature's group
            uint8_t k = static_cast<uint8_t>(rng.uniform_index(d.space.domain_size(f) - 1));
            if (k >= a.v[f]) ++k;
            a.v[f] = k;
        }
    }

    // shuffle instance order
    std::vector<size_t> perm(d.n);
    std::iota(perm.begin(), perm.end(), size_t{0});
    rng.shuffle(perm);
    Dataset shuffled = out;
    const size_t isz = static_cast<size_t>(d.item_size());
    for (size_t i = 0; i < perm.size(); ++i) {
        std::copy(out.data.begin() + perm[i] * isz, out.data.begin() + (perm[i] + 1) * isz,
                  shuffled.data.begin() + i * isz);
        shuffled.label[i] = out.label[perm[i]];
        shuffled.truth[i] = out.truth[perm[i]];
        shuffled.order[i] = out.order[perm[i]];
    }
    return shuffled;
}

}  // namespace nesy
