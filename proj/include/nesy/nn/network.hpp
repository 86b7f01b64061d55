#pragma once

#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nesy/dataset.hpp"
#include "nesy/nn/kernels.hpp"
#include "nesy/rng.hpp"

namespace nesy {

struct Shape3 {
    int h = 1, w = 1, c = 1;
    size_t numel() const { return static_cast<size_t>(h) * w * c; }
};

struct LayerSpec {
    enum Kind { Conv, Pool, Relu, Dropout, Dense } kind;
    int out_c = 0, kh = 1, kw = 1, sh = 1, sw = 1;  // conv
    int ph = 1, pw = 1;                             // pool window = stride
    double rate = 0.0;                              // dropout
    int out_f = 0;                                  // dense
};

inline LayerSpec conv_layer(int out_c, int kh, int kw, int sh = 1, int sw = 1) {
    return {LayerSpec::Conv, out_c, kh, kw, sh, sw, 1, 1, 0.0, 0};
}
inline LayerSpec pool_layer(int ph, int pw) { return {LayerSpec::Pool, 0, 1, 1, 1, 1, ph, pw, 0.0, 0}; }
inline LayerSpec relu_layer() { return {LayerSpec::Relu, 0, 1, 1, 1, 1, 1, 1, 0.0, 0}; }
inline LayerSpec dropout_layer(double rate) { return {LayerSpec::Dropout, 0, 1, 1, 1, 1, 1, 1, rate, 0}; }
inline LayerSpec dense_layer(int out_f) { return {LayerSpec::Dense, 0, 1, 1, 1, 1, 1, 1, 0.0, out_f}; }

struct ArchSpec {
    Shape3 input;
    std::vector<LayerSpec> layers;
    std::vector<int> groups;  // grouped output layout; sum must equal final width

    // shape at every layer boundary (layers.size() + 1 entries); validates
    std::vector<Shape3> boundaries() const {
        std::vector<Shape3> bs{input};
        for (const auto& l : layers) {
            Shape3 s = bs.back();
            switch (l.kind) {
                case LayerSpec::Conv: {
                    const int oh = s.h - l.kh, ow = s.w - l.kw;
                    if (oh < 0 || ow < 0) throw std::runtime_error("arch: kernel exceeds input");
                    s = {oh / l.sh + 1, ow / l.sw + 1, l.out_c};
                    break;
                }
                case LayerSpec::Pool:
                    if (s.h < l.ph || s.w < l.pw) throw std::runtime_error("arch: pool exceeds input");
                    s = {s.h / l.ph, s.w / l.pw, s.c};
                    break;
                case LayerSpec::Relu:
                case LayerSpec::Dropout:
                    break;
                case LayerSpec::Dense:
                    s = {1, 1, l.out_f};  // operates on the flattened boundary
                    break;
            }
            bs.push_back(s);
        }
        return bs;
    }

    int output_width() const {
        const auto bs = boundaries();
        const int w = static_cast<int>(bs.back().numel());
        const int gsum = std::accumulate(groups.begin(), groups.end(), 0);
        if (w != gsum) throw std::runtime_error("arch: output width does not match group sizes");
        return w;
    }

    std::string describe() const {
        std::ostringstream s;
        s << "in:" << input.h << "x" << input.w << "x" << input.c;
        for (const auto& l : layers) {
            switch (l.kind) {
                case LayerSpec::Conv:
                    s << ";conv:" << l.out_c << ",k" << l.kh << "x" << l.kw << ",s" << l.sh << "x" << l.sw;
                    break;
                case LayerSpec::Pool: s << ";pool:" << l.ph << "x" << l.pw; break;
                case LayerSpec::Relu: s << ";relu"; break;
                case LayerSpec::Dropout: s << ";dropout:" << l.rate; break;
                case LayerSpec::Dense: s << ";dense:" << l.out_f; break;
            }
        }
        s << ";groups:";
        for (size_t i = 0; i < groups.size(); ++i) s << (i ? "," : "") << groups[i];
        return s.str();
    }

    uint64_t fingerprint() const { return fnv1a(describe()); }
};

// the four standard extractors

inline ArchSpec ts_segment_arch() {
    ArchSpec a;
    a.input = {1, 50, 1};
    a.layers = {conv_layer(32, 1, 8), relu_layer(), conv_layer(32, 1, 4), relu_layer(),
                pool_layer(1, 2),     dense_layer(256), relu_layer(), dropout_layer(0.5),
                dense_layer(9)};
    a.groups = {9};
    return a;
}

inline ArchSpec ts_window_arch() {
    ArchSpec a;
    a.input = {1, 256, 1};
    a.layers = {conv_layer(32, 1, 8), relu_layer(), conv_layer(32, 1, 4), relu_layer(),
                pool_layer(1, 2),     dense_layer(256), relu_layer(), dropout_layer(0.5),
                dense_layer(9)};
    a.groups = {3, 3, 3};
    return a;
}

inline ArchSpec chess_cell_arch() {
    ArchSpec a;
    a.input = {28, 28, 1};
    a.layers = {conv_layer(6, 5, 5),  pool_layer(2, 2), relu_layer(),
                conv_layer(16, 5, 5), pool_layer(2, 2), relu_layer(),
                dense_layer(120),     relu_layer(),     dense_layer(84),
                relu_layer(),         dense_layer(8)};
    a.groups = {8};
    return a;
}

inline ArchSpec chess_board_arch() {
    ArchSpec a;
    a.input = {84, 84, 1};
    a.layers = {conv_layer(6, 5, 5, 2, 2), pool_layer(2, 2), relu_layer(),
                conv_layer(16, 5, 5),      pool_layer(2, 2), relu_layer(),
                dense_layer(512),          relu_layer(),     dense_layer(256),
                relu_layer(),              dense_layer(72)};
    a.groups = std::vector<int>(9, 8);
    return a;
}

template <class T>
struct Param {
    std::vector<T> w, g, m, v;
    void resize(size_t n) {
        w.assign(n, T(0));
        g.assign(n, T(0));
        m.assign(n, T(0));
        v.assign(n, T(0));
    }
};

template <class T>
struct Layer {
    LayerSpec spec;
    Param<T> weight, bias;
};

template <class T>
struct Network {
    ArchSpec arch;
    std::vector<Shape3> bounds;
    std::vector<Layer<T>> layers;
    int64_t step = 0;
};

// weights ~ uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)), biases zero
template <class T>
Network<T> make_network(const ArchSpec& arch, Rng& rng) {
    arch.output_width();  // validates
    Network<T> net;
    net.arch = arch;
    net.bounds = arch.boundaries();
    for (size_t li = 0; li < arch.layers.size(); ++li) {
        Layer<T> layer;
        layer.spec = arch.layers[li];
        const Shape3& in = net.bounds[li];
        size_t fan_in = 0, nw = 0, nb = 0;
        if (layer.spec.kind == LayerSpec::Conv) {
            fan_in = static_cast<size_t>(layer.spec.kh) * layer.spec.kw * in.c;
            nw = fan_in * layer.spec.out_c;
            nb = layer.spec.out_c;
        } else if (layer.spec.kind == LayerSpec::Dense) {
            fan_in = in.numel();
            nw = fan_in * layer.spec.out_f;
            nb = layer.spec.out_f;
        }
        layer.weight.resize(nw);
        layer.bias.resize(nb);
        if (nw) {
            const double s = std::sqrt(1.0 / static_cast<double>(fan_in));
            for (auto& x : layer.weight.w) x = static_cast<T>(rng.uniform(-s, s));
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

// per-layer buffers captured by a train-mode forward for backprop
template <class T>
struct FwdCache {
    int batch = 0;
    std::vector<std::vector<T>> acts;    // boundary activations, layers+1 entries
    std::vector<std::vector<T>> cols;    // per layer: conv im2col matrix
    std::vector<std::vector<int>> argmax;  // per layer: pool winners
    std::vector<std::vector<T>> mask;    // per layer: dropout mask
};

// Runs the batch through the net. Train mode iff `cache` is non-null; rng is
// then required for dropout mask seeds. Eval mode applies dropout as
// identity. `logits` receives [batch x output_width].
template <class T>
void forward(const Network<T>& net, const T* x, int batch, T* logits, FwdCache<T>* cache = nullptr,
             Rng* rng = nullptr) {
    const auto& bounds = net.bounds;
    const size_t nl = net.layers.size();
    std::vector<T> cur(x, x + static_cast<size_t>(batch) * bounds[0].numel());
    if (cache) {
        cache->batch = batch;
        cache->acts.assign(nl + 1, {});
        cache->cols.assign(nl, {});
        cache->argmax.assign(nl, {});
        cache->mask.assign(nl, {});
        cache->acts[0] = cur;
    }
    std::vector<T> next;
    for (size_t li = 0; li < nl; ++li) {
        const auto& l = net.layers[li];
        const Shape3& in = bounds[li];
        const Shape3& out = bounds[li + 1];
        next.assign(static_cast<size_t>(batch) * out.numel(), T(0));
        switch (l.spec.kind) {
            case LayerSpec::Conv: {
                const int K = l.spec.kh * l.spec.kw * in.c;
                const int M = batch * out.h * out.w;
                std::vector<T> local_cols;
                std::vector<T>& cols = cache ? cache->cols[li] : local_cols;
                cols.assign(static_cast<size_t>(M) * K, T(0));
                kernels::conv_forward(cur.data(), batch, in.h, in.w, in.c, l.spec.kh, l.spec.kw,
                                      l.spec.sh, l.spec.sw, l.spec.out_c, l.weight.w.data(),
                                      l.bias.w.data(), next.data(), cols.data());
                break;
            }
            case LayerSpec::Pool: {
                std::vector<int> local_am;
                std::vector<int>& am = cache ? cache->argmax[li] : local_am;
                am.assign(static_cast<size_t>(batch) * out.numel(), 0);
                kernels::maxpool_forward(cur.data(), batch, in.h, in.w, in.c, l.spec.ph, l.spec.pw,
                                         next.data(), am.data());
                break;
            }
            case LayerSpec::Relu:
                kernels::relu_forward(cur.data(), cur.size(), next.data());
                break;
            case LayerSpec::Dropout:
                if (cache) {
                    if (!rng) throw std::runtime_error("forward: train mode needs an rng");
                    cache->mask[li].assign(cur.size(), T(0));
                    kernels::dropout_forward(cur.data(), cur.size(), l.spec.rate, rng->next_u64(),
                                             next.data(), cache->mask[li].data());
                } else {
                    next = cur;
                }
                break;
            case LayerSpec::Dense:
                kernels::dense_forward(cur.data(), batch, static_cast<int>(in.numel()), l.spec.out_f,
                                       l.weight.w.data(), l.bias.w.data(), next.data());
                break;
        }
        cur.swap(next);
        if (cache) cache->acts[li + 1] = cur;
    }
    std::copy(cur.begin(), cur.end(), logits);
}

template <class T>
void zero_grad(Network<T>& net) {
    for (auto& l : net.layers) {
        std::fill(l.weight.g.begin(), l.weight.g.end(), T(0));
        std::fill(l.bias.g.begin(), l.bias.g.end(), T(0));
    }
}

// accumulates parameter gradients from dlogits [batch x output_width];
// gradients must be zeroed by the caller beforehand
template <class T>
void backward(Network<T>& net, const FwdCache<T>& cache, const T* dlogits) {
    const auto& bounds = net.bounds;
    const int batch = cache.batch;
    const size_t nl = net.layers.size();
    std::vector<T> dcur(dlogits, dlogits + static_cast<size_t>(batch) * bounds[nl].numel());
    std::vector<T> dprev;
    for (size_t li = nl; li-- > 0;) {
        auto& l = net.layers[li];
        const Shape3& in = bounds[li];
        const Shape3& out = bounds[li + 1];
        const bool need_dx = li > 0;
        dprev.assign(need_dx ? static_cast<size_t>(batch) * in.numel() : 0, T(0));
        switch (l.spec.kind) {
            case LayerSpec::Conv: {
                const int K = l.spec.kh * l.spec.kw * in.c;
                const int M = batch * out.h * out.w;
                std::vector<T> dcols(static_cast<size_t>(M) * K, T(0));
                kernels::conv_backward(cache.cols[li].data(), dcur.data(), batch, in.h, in.w, in.c,
                                       l.spec.kh, l.spec.kw, l.spec.sh, l.spec.sw, l.spec.out_c,
                                       l.weight.w.data(), l.weight.g.data(), l.bias.g.data(),
                                       need_dx ? dprev.data() : nullptr, dcols.data());
                break;
            }
            case LayerSpec::Pool:
                if (need_dx)
                    kernels::maxpool_backward(dcur.data(), cache.argmax[li].data(), batch, in.h,
                                              in.w, in.c, l.spec.ph, l.spec.pw, dprev.data());
                break;
            case LayerSpec::Relu:
                if (need_dx)
                    kernels::relu_backward(cache.acts[li].data(), dcur.data(), dcur.size(),
                                           dprev.data());
                break;
            case LayerSpec::Dropout:
                if (need_dx)
                    kernels::dropout_backward(dcur.data(), cache.mask[li].data(), dcur.size(),
                                              dprev.data());
                break;
            case LayerSpec::Dense:
                kernels::dense_backward(cache.acts[li].data(), dcur.data(), batch,
                                        static_cast<int>(in.numel()), l.spec.out_f,
                                        l.weight.w.data(), l.weight.g.data(), l.bias.g.data(),
                                        need_dx ? dprev.data() : nullptr);
                break;
        }
        if (need_dx) dcur.swap(dprev);
    }
}

// one Adam step over all parameters; returns false (nothing applied, step
// count unchanged) when any gradient is non-finite
template <class T>
bool adam_step(Network<T>& net, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
    for (auto& l : net.layers) {
        for (const auto* p : {&l.weight, &l.bias}) {
            double probe = 0.0;
            for (const T g : p->g) probe += static_cast<double>(g);
            if (!std::isfinite(probe)) return false;
        }
    }
    const int64_t t = net.step + 1;
    for (auto& l : net.layers) {
        for (auto* p : {&l.weight, &l.bias}) {
            if (p->w.empty()) continue;
            kernels::adam_update(p->w.data(), p->g.data(), p->m.data(), p->v.data(), p->w.size(),
                                 lr, b1, b2, eps, t);
        }
    }
    net.step = t;
    return true;
}

// Grouped cross-entropy. `targets` is [batch x groups]; loss is the mean of
// -log softmax(target) over batch x groups, and dlogits gets the matching
// gradient. Accumulation in double.
template <class T>
double cross_entropy(const T* logits, int batch, const std::vector<int>& groups,
                     const int* targets, T* dlogits) {
    const int G = static_cast<int>(groups.size());
    const int W = std::accumulate(groups.begin(), groups.end(), 0);
    for (int b = 0; b < batch; ++b)
        for (int g = 0; g < G; ++g) {
            const int tgt = targets[static_cast<size_t>(b) * G + g];
            if (tgt < 0 || tgt >= groups[g])
                throw std::runtime_error("cross_entropy: target out of range");
        }
    double loss = 0.0;
    const double inv = 1.0 / (static_cast<double>(batch) * G);
#pragma omp parallel for schedule(static) reduction(+ : loss)
    for (int b = 0; b < batch; ++b) {
        const T* lrow = logits + static_cast<size_t>(b) * W;
        T* drow = dlogits + static_cast<size_t>(b) * W;
        int off = 0;
        for (int g = 0; g < G; ++g) {
            const int n = groups[g];
            const int tgt = targets[static_cast<size_t>(b) * G + g];
            double mx = static_cast<double>(lrow[off]);
            for (int j = 1; j < n; ++j) mx = std::max(mx, static_cast<double>(lrow[off + j]));
            double Z = 0.0;
            for (int j = 0; j < n; ++j) Z += std::exp(static_cast<double>(lrow[off + j]) - mx);
            loss += -(static_cast<double>(lrow[off + tgt]) - mx - std::log(Z)) * inv;
            for (int j = 0; j < n; ++j) {
                const double p = std::exp(static_cast<double>(lrow[off + j]) - mx) / Z;
                drow[off + j] = static_cast<T>((p - (j == tgt ? 1.0 : 0.0)) * inv);
            }
            off += n;
        }
    }
    return loss;
}

// versioned little-endian weight file: params plus Adam state, guarded by an
// arch fingerprint
template <class T>
void save_weights(const std::string& path, const Network<T>& net) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("weights: cannot write " + path);
    const uint32_t version = 1;
    const uint8_t dtype = sizeof(T) == 4 ? 1 : 2;
    const uint64_t fp = net.arch.fingerprint();
    out.write("NSYW", 4);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&dtype), 1);
    out.write(reinterpret_cast<const char*>(&fp), 8);
    out.write(reinterpret_cast<const char*>(&net.step), 8);
    for (const auto& l : net.layers) {
        for (const auto* p : {&l.weight, &l.bias}) {
            const uint64_t n = p->w.size();
            out.write(reinterpret_cast<const char*>(&n), 8);
            for (const auto* vec : {&p->w, &p->m, &p->v})
                out.write(reinterpret_cast<const char*>(vec->data()),
                          static_cast<std::streamsize>(n * sizeof(T)));
        }
    }
    if (!out) throw std::runtime_error("weights: write failed for " + path);
}

template <class T>
Network<T> load_weights(const std::string& path, const ArchSpec& arch) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("weights: cannot open " + path);
    char magic[4];
    uint32_t version = 0;
    uint8_t dtype = 0;
    uint64_t fp = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&dtype), 1);
    in.read(reinterpret_cast<char*>(&fp), 8);
    if (!in || std::string(magic, 4) != "NSYW") throw std::runtime_error("weights: bad magic");
    if (version != 1) throw std::runtime_error("weights: unsupported version");
    if (dtype != (sizeof(T) == 4 ? 1 : 2)) throw std::runtime_error("weights: dtype mismatch");
    if (fp != arch.fingerprint()) throw std::runtime_error("weights: arch fingerprint mismatch");

    Rng dummy(0);
    Network<T> net = make_network<T>(arch, dummy);
    in.read(reinterpret_cast<char*>(&net.step), 8);
    for (auto& l : net.layers) {
        for (auto* p : {&l.weight, &l.bias}) {
            uint64_t n = 0;
            in.read(reinterpret_cast<char*>(&n), 8);
            if (!in || n != p->w.size()) throw std::runtime_error("weights: size mismatch");
            for (auto* vec : {&p->w, &p->m, &p->v})
                in.read(reinterpret_cast<char*>(vec->data()),
                        static_cast<std::streamsize>(n * sizeof(T)));
        }
    }
    if (!in) throw std::runtime_error("weights: truncated file");
    return net;
}

}  // namespace nesy
