#pragma once

// Central finite-difference checks shared by the unit tests and the
// acceptance binary.

#include "wwf/nn.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace wwf::test {

inline constexpr double kFdStep = 1e-4;
// Below this magnitude both gradients are treated as zero and compared absolutely.
inline constexpr double kGradFloor = 1e-7;

inline double grad_rel_error(double analytic, double numeric, double floor = kGradFloor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Rounding in the loss limits what a central difference can resolve to about
// kLossUlps ulps of the loss over 2h. Gradients below resolution / tol have no
// meaningful relative error, so the denominator is floored there.
inline constexpr double kLossUlps = 16.0;
inline double fd_floor(double loss, double h, double tol) {
    const double resolution = kLossUlps * std::numeric_limits<double>::epsilon() * std::abs(loss) / (2 * h);
    return std::max(kGradFloor, resolution / tol);
}

struct GradCheck {
    double max_rel = 0.0;
    std::size_t checked = 0;
    std::size_t failed = 0;  // entries above the tolerance
};

// Compares analytic[i] with the central difference of f over x[i] for every i
// in `indices` (all entries when empty).
inline GradCheck check_gradient(std::vector<double>& x, const std::vector<double>& analytic,
                                const std::function<double()>& f, double tol = 1e-3,
                                const std::vector<std::size_t>& indices = {}) {
    GradCheck r;
    auto visit = [&](std::size_t i) {
        const double saved = x[i];
        x[i] = saved + kFdStep;
        const double up = f();
        x[i] = saved - kFdStep;
        const double down = f();
        x[i] = saved;
        const double e = grad_rel_error(analytic[i], (up - down) / (2 * kFdStep));
        r.max_rel = std::max(r.max_rel, e);
        r.failed += e >= tol;
        ++r.checked;
    };
    if (indices.empty()) {
        for (std::size_t i = 0; i < x.size(); ++i) visit(i);
    } else {
        for (std::size_t i : indices) visit(i);
    }
    return r;
}

// A random training batch for a double network.
struct NetBatch {
    nn::Mat<double> input, blob, angular, target;
    double alpha = 0.5, beta = 0.5;
};

inline NetBatch random_batch(const nn::Topology& topo, int size, Rng& rng) {
    NetBatch b;
    const int pixels = topo.input_res * topo.input_res;
    b.input = nn::Mat<double>(topo.input_channels, pixels);
    for (Eigen::Index k = 0; k < b.input.size(); ++k) b.input.data()[k] = rng.uniform(-1, 1);
    b.alpha = rng.uniform(0.01, 1.0);
    b.beta = rng.uniform(0.01, 1.0);
    b.blob = nn::Mat<double>(topo.spatial_inputs(), size);
    b.angular = nn::Mat<double>(topo.angular_inputs(), size);
    b.target = nn::Mat<double>(nn::kOutputs, size);
    for (int s = 0; s < size; ++s) {
        Footprint fp{rng.uniform(), rng.uniform(), rng.uniform(0, 5)};
        nn::encode_footprint(fp, topo.blob_bins, b.blob.col(s).data());
        for (int k = 0; k < topo.angular_inputs(); ++k) b.angular(k, s) = rng.uniform(-1, 1);
        for (int k = 0; k < nn::kOutputs; ++k) b.target(k, s) = rng.uniform(0, 2);
    }
    return b;
}

inline double network_loss(const nn::Network<double>& net, const NetBatch& b, const nn::LossConfig& cfg = {}) {
    const auto z = net.encode(b.input, b.alpha, b.beta);
    return nn::loss<double>(net.decode(z, b.blob, b.angular), b.target, cfg);
}

inline std::vector<double> network_gradient(const nn::Network<double>& net, const NetBatch& b,
                                            const nn::LossConfig& cfg = {}) {
    nn::Network<double>::EncoderCache ec;
    nn::Network<double>::DecoderCache dc;
    const auto z = net.encode(b.input, b.alpha, b.beta, &ec);
    const nn::Mat<double> out = net.decode(z, b.blob, b.angular, &dc);
    nn::Mat<double> dout;
    nn::loss<double>(out, b.target, cfg, &dout);
    std::vector<double> grads(net.param_count(), 0.0);
    const nn::Vec<double> dz = net.decode_backward(dc, dout, grads.data());
    net.encode_backward(ec, dz, grads.data());
    return grads;
}

// Sign pattern of every leaky-ReLU pre-activation for one forward pass.
inline std::vector<bool> activation_pattern(const nn::Network<double>& net, const NetBatch& b) {
    nn::Network<double>::EncoderCache ec;
    nn::Network<double>::DecoderCache dc;
    net.decode(net.encode(b.input, b.alpha, b.beta, &ec), b.blob, b.angular, &dc);
    std::vector<bool> signs;
    auto add = [&](const nn::Mat<double>& m) {
        for (Eigen::Index k = 0; k < m.size(); ++k) signs.push_back(m.data()[k] > 0);
    };
    add(ec.pre_stem);
    for (const auto& blk : ec.blocks) {
        add(blk.pre1);
        add(blk.sum);
    }
    add(ec.p1);
    add(nn::Mat<double>(ec.p2 + ec.h1));
    for (const auto* m : {&dc.q1, &dc.q2, &dc.p1, &dc.p2, &dc.s3, &dc.p4}) add(*m);
    return signs;
}

struct NetworkGradCheck {
    GradCheck smooth;  // entries whose +-h evaluations stay in one linear region
    GradCheck kinked;  // entries whose +-h step crosses a ReLU kink, re-checked at kKinkStep
};

inline constexpr double kKinkStep = 1e-7;

// Full-network check at step kFdStep. A central difference across a kink
// measures the average of two one-sided slopes rather than the derivative,
// so such entries are detected from the activation pattern and re-checked
// with a step small enough to stay on one side.
inline NetworkGradCheck check_network_gradient(nn::Network<double>& net, const NetBatch& b,
                                               const std::vector<std::size_t>& indices = {},
                                               double tol = 1e-3, const nn::LossConfig& cfg = {}) {
    const std::vector<double> analytic = network_gradient(net, b, cfg);
    const double l0 = network_loss(net, b, cfg);
    auto& p = net.params();
    NetworkGradCheck r;
    auto record = [tol](GradCheck& c, double e) {
        c.max_rel = std::max(c.max_rel, e);
        c.failed += e >= tol;
        ++c.checked;
    };
    auto central = [&](std::size_t i, double h, bool* crossed) {
        const double saved = p[i];
        p[i] = saved + h;
        const double up = network_loss(net, b, cfg);
        const auto up_pattern = crossed ? activation_pattern(net, b) : std::vector<bool>{};
        p[i] = saved - h;
        const double down = network_loss(net, b, cfg);
        if (crossed) *crossed = activation_pattern(net, b) != up_pattern;
        p[i] = saved;
        return (up - down) / (2 * h);
    };
    auto visit = [&](std::size_t i) {
        bool crossed = false;
        const double fd = central(i, kFdStep, &crossed);
        if (!crossed) {
            record(r.smooth, grad_rel_error(analytic[i], fd, fd_floor(l0, kFdStep, tol)));
        } else {
            record(r.kinked, grad_rel_error(analytic[i], central(i, kKinkStep, nullptr), fd_floor(l0, kKinkStep, tol)));
        }
    };
    if (indices.empty()) {
        for (std::size_t i = 0; i < p.size(); ++i) visit(i);
    } else {
        for (std::size_t i : indices) visit(i);
    }
    return r;
}

}  // namespace wwf::test
