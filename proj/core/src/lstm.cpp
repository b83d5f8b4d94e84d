#include "flowcast/lstm.hpp"

#include <fmt/format.h>

#include <cmath>

namespace flowcast {

LstmParams LstmParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
    LstmParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    for (std::size_t g = 0; g < 4; ++g) {
        p.w_x[g] = Matrix(hidden_dim, input_dim);
        p.w_h[g] = Matrix(hidden_dim, hidden_dim);
        p.b[g] = Vector(hidden_dim, 0.0);
    }
    p.peep_i = Vector(hidden_dim, 0.0);
    p.peep_f = Vector(hidden_dim, 0.0);
    p.peep_o = Vector(hidden_dim, 0.0);
    return p;
}

void LstmParams::check() const {
    const auto h = hidden_dim;
    for (std::size_t g = 0; g < 4; ++g) {
        require_shape(w_x[g].rows() == h && w_x[g].cols() == input_dim,
                      fmt::format("lstm w_x.{} is {}x{}, expected {}x{}", kGateNames[g], w_x[g].rows(),
                                  w_x[g].cols(), h, input_dim));
        require_shape(w_h[g].rows() == h && w_h[g].cols() == h,
                      fmt::format("lstm w_h.{} is {}x{}, expected {}x{}", kGateNames[g], w_h[g].rows(),
                                  w_h[g].cols(), h, h));
        require_shape(b[g].size() == h, fmt::format("lstm b.{} has {} entries, expected {}", kGateNames[g],
                                                    b[g].size(), h));
    }
    require_shape(peep_i.size() == h && peep_f.size() == h && peep_o.size() == h,
                  fmt::format("lstm peephole vectors must have {} entries", h));
}

namespace {

// Wx x + Wh h + b for one gate, accumulated in a fixed order.
Vector gate_preactivation(const LstmParams& p, Gate g, std::span<const double> x, std::span<const double> h) {
    Vector a = affine(p.wx(g), x, p.bias(g));
    matvec_accumulate(p.wh(g), h, a);
    return a;
}

} // namespace

CellForward lstm_cell_forward(std::span<const double> x, const LstmState& prev, const LstmParams& p) {
    const auto hd = p.hidden_dim;
    require_shape(x.size() == p.input_dim,
                  fmt::format("lstm input has {} entries, params expect {}", x.size(), p.input_dim));
    require_shape(prev.c.size() == hd && prev.h.size() == hd,
                  fmt::format("lstm previous state has sizes c={} h={}, params expect {}", prev.c.size(),
                              prev.h.size(), hd));

    StepCache k;
    k.x.assign(x.begin(), x.end());
    k.h_prev = prev.h;
    k.c_prev = prev.c;

    Vector a_c = gate_preactivation(p, Gate::candidate, x, prev.h);
    Vector a_i = gate_preactivation(p, Gate::input, x, prev.h);
    Vector a_f = gate_preactivation(p, Gate::forget, x, prev.h);
    for (std::size_t j = 0; j < hd; ++j) {
        a_i[j] += p.peep_i[j] * prev.c[j];
        a_f[j] += p.peep_f[j] * prev.c[j];
    }
    k.g = activation(Activation::tanh, a_c);
    k.i = activation(Activation::sigmoid, a_i);
    k.f = activation(Activation::sigmoid, a_f);

    k.c.resize(hd);
    for (std::size_t j = 0; j < hd; ++j) k.c[j] = k.f[j] * prev.c[j] + k.i[j] * k.g[j];

    Vector a_o = gate_preactivation(p, Gate::output, x, prev.h);
    for (std::size_t j = 0; j < hd; ++j) a_o[j] += p.peep_o[j] * k.c[j];
    k.o = activation(Activation::sigmoid, a_o);

    k.tanh_c = activation(Activation::tanh, k.c);
    Vector h = elementwise_mul(k.o, k.tanh_c);

    CellForward out;
    out.state = {k.c, std::move(h)};
    out.cache = std::move(k);
    return out;
}

CellBackward lstm_cell_backward(std::span<const double> dh, std::span<const double> dc, const StepCache& k,
                                const LstmParams& p, LstmParams& grads) {
    const auto hd = p.hidden_dim;
    require_shape(dh.size() == hd && dc.size() == hd,
                  fmt::format("lstm backward: upstream sizes dh={} dc={}, params expect {}", dh.size(), dc.size(),
                              hd));
    require_shape(k.c.size() == hd && k.x.size() == p.input_dim,
                  fmt::format("lstm backward: cache (hidden {}, input {}) does not match params (hidden {}, input {})",
                              k.c.size(), k.x.size(), hd, p.input_dim));
    require_shape(grads.hidden_dim == hd && grads.input_dim == p.input_dim,
                  "lstm backward: gradient accumulator shaped unlike params");

    Vector da_i(hd), da_f(hd), da_o(hd), da_c(hd);
    CellBackward out;
    out.dc_prev.resize(hd);
    for (std::size_t j = 0; j < hd; ++j) {
        const double o = k.o[j];
        const double tc = k.tanh_c[j];
        da_o[j] = dh[j] * tc * o * (1.0 - o);
        // c_t feeds h_t directly, the output gate's peephole, and the next step.
        const double dct = dc[j] + dh[j] * o * (1.0 - tc * tc) + da_o[j] * p.peep_o[j];
        const double i = k.i[j];
        const double f = k.f[j];
        const double g = k.g[j];
        da_f[j] = dct * k.c_prev[j] * f * (1.0 - f);
        da_i[j] = dct * g * i * (1.0 - i);
        da_c[j] = dct * i * (1.0 - g * g);
        out.dc_prev[j] = dct * f + da_i[j] * p.peep_i[j] + da_f[j] * p.peep_f[j];

        grads.peep_o[j] += da_o[j] * k.c[j];
        grads.peep_i[j] += da_i[j] * k.c_prev[j];
        grads.peep_f[j] += da_f[j] * k.c_prev[j];
    }

    out.dx.assign(p.input_dim, 0.0);
    out.dh_prev.assign(hd, 0.0);
    const std::array<const Vector*, 4> da{&da_i, &da_f, &da_o, &da_c};
    for (std::size_t g = 0; g < 4; ++g) {
        outer_accumulate(grads.w_x[g], *da[g], k.x);
        outer_accumulate(grads.w_h[g], *da[g], k.h_prev);
        axpy(1.0, *da[g], grads.b[g]);
        matvec_transposed_accumulate(p.w_x[g], *da[g], out.dx);
        matvec_transposed_accumulate(p.w_h[g], *da[g], out.dh_prev);
    }
    return out;
}

} // namespace flowcast
