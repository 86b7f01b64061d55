#include "nesy/semloss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nesy {

double GroupedDistribution::prob(const Assignment& a) const {
    double q = 1.0;
    for (size_t f = 0; f < p.size(); ++f) q *= p[f][a.v[f]];
    return q;
}

GroupedDistribution grouped_softmax(const std::vector<double>& logits, const FeatureSpace& space) {
    size_t width = 0;
    for (size_t f = 0; f < space.num_features(); ++f) width += space.domain_size(f);
    if (logits.size() != width) throw std::runtime_error("grouped_softmax: logit width mismatch");

    GroupedDistribution d;
    d.space = &space;
    d.p.resize(space.num_features());
    size_t off = 0;
    for (size_t f = 0; f < space.num_features(); ++f) {
        const size_t n = space.domain_size(f);
        double mx = logits[off];
        for (size_t j = 1; j < n; ++j) mx = std::max(mx, logits[off + j]);
        double z = 0.0;
        d.p[f].resize(n);
        for (size_t j = 0; j < n; ++j) {
            d.p[f][j] = std::exp(logits[off + j] - mx);
            z += d.p[f][j];
        }
        for (size_t j = 0; j < n; ++j) d.p[f][j] /= z;
        off += n;
    }
    return d;
}

SemLossResult semantic_loss(const GroupedDistribution& dist, const std::vector<Assignment>& feedback) {
    if (!dist.space) throw std::runtime_error("semantic_loss: distribution lacks a space");
    if (feedback.empty()) throw std::runtime_error("semantic_loss: empty feedback set");
    const FeatureSpace& space = *dist.space;
    const size_t k = space.num_features();

    size_t width = 0;
    std::vector<size_t> offset(k);
    for (size_t f = 0; f < k; ++f) {
        offset[f] = width;
        width += space.domain_size(f);
    }

    SemLossResult res;
    res.dlogits.assign(width, 0.0);

    // mass = sum over assignments of the per-feature probability product;
    // dmass accumulates d mass / d p[f][v] via prefix/suffix partial products
    double mass = 0.0;
    std::vector<double> dmass(width, 0.0);
    std::vector<double> prefix(k + 1), suffix(k + 1);
    for (const auto& a : feedback) {
        prefix[0] = 1.0;
        for (size_t f = 0; f < k; ++f) prefix[f + 1] = prefix[f] * dist.p[f][a.v[f]];
        suffix[k] = 1.0;
        for (size_t f = k; f-- > 0;) suffix[f] = suffix[f + 1] * dist.p[f][a.v[f]];
        mass += prefix[k];
        for (size_t f = 0; f < k; ++f) dmass[offset[f] + a.v[f]] += prefix[f] * suffix[f + 1];
    }

    if (mass <= 0.0) {
        res.loss = std::numeric_limits<double>::infinity();
        res.zero_mass = true;
        return res;
    }

    res.loss = -std::log(mass);

    // dL/dp = -dmass/mass, then through each group's softmax:
    // dL/dz_v = p_v * (g_v - sum_u p_u g_u)
    for (size_t f = 0; f < k; ++f) {
        const size_t n = space.domain_size(f);
        double dot = 0.0;
        for (size_t j = 0; j < n; ++j) dot += dist.p[f][j] * (-dmass[offset[f] + j] / mass);
        for (size_t j = 0; j < n; ++j) {
            const double g = -dmass[offset[f] + j] / mass;
            res.dlogits[offset[f] + j] = dist.p[f][j] * (g - dot);
        }
    }
    return res;
}

Deduction deduce_max_conjunct(const GroupedDistribution& dist, const Theory& t) {
    if (t.num_conjuncts() == 0) throw std::runtime_error("deduce_max_conjunct: theory has no conjuncts");
    Deduction best;
    double best_p = -1.0;
    for (size_t c = 0; c < t.defs.size(); ++c)
        for (const auto& conj : t.defs[c]) {
            const double q = dist.prob(conj);
            if (q > best_p) {
                best_p = q;
                best.label = static_cast<int>(c);
                best.extracted = conj;
            }
        }
    return best;
}

Deduction deduce_exact_match(const Assignment& a, const FeedbackSet& fs) {
    Deduction d;
    d.extracted = a;
    const int s = fs.find(a);
    if (s < 0 || s == static_cast<int>(fs.sets.size()) - 1) return d;  // absent or bottom
    d.label = s;
    return d;
}

}  // namespace nesy
