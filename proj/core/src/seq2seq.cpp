#include "flowcast/seq2seq.hpp"

#include <fmt/format.h>

#include <cmath>

namespace flowcast {

Seq2SeqModel Seq2SeqModel::zeros(const WindowSpec& spec, std::size_t hidden) {
    validate(spec);
    Seq2SeqModel m;
    m.spec = spec;
    m.hidden = hidden;
    m.encoder = LstmParams::zeros(spec.features, hidden);
    m.decoder = LstmParams::zeros(hidden, hidden);
    m.proj_w = Matrix(spec.features, hidden);
    m.proj_b = Vector(spec.features, 0.0);
    return m;
}

void Seq2SeqModel::check() const {
    require_shape(hidden > 0, "model hidden size must be positive");
    require_shape(encoder.input_dim == spec.features && encoder.hidden_dim == hidden,
                  fmt::format("encoder is {}->{}, model expects {}->{}", encoder.input_dim, encoder.hidden_dim,
                              spec.features, hidden));
    require_shape(decoder.input_dim == hidden && decoder.hidden_dim == hidden,
                  fmt::format("decoder is {}->{}, model expects {}->{}", decoder.input_dim, decoder.hidden_dim,
                              hidden, hidden));
    encoder.check();
    decoder.check();
    require_shape(proj_w.rows() == spec.features && proj_w.cols() == hidden && proj_b.size() == spec.features,
                  fmt::format("projection is {}x{} (+{}), model expects {}x{}", proj_w.rows(), proj_w.cols(),
                              proj_b.size(), spec.features, hidden));
}

std::size_t parameter_count(const Seq2SeqModel& m) {
    std::size_t n = 0;
    for_each_block(m, [&](const std::string&, std::span<const double> v) { n += v.size(); });
    return n;
}

Seq2SeqModel zeros_like(const Seq2SeqModel& m) { return Seq2SeqModel::zeros(m.spec, m.hidden); }

Encoded encode(MatrixView x, const Seq2SeqModel& m) {
    require_shape(x.rows >= 1, "encode: input sequence is empty");
    require_shape(x.cols == m.spec.features,
                  fmt::format("encode: input has {} features, model expects {}", x.cols, m.spec.features));
    Encoded out;
    out.state = LstmState::zeros(m.hidden);
    out.caches.reserve(x.rows);
    for (std::size_t t = 0; t < x.rows; ++t) {
        auto step = lstm_cell_forward(x.row(t), out.state, m.encoder);
        out.state = std::move(step.state);
        out.caches.push_back(std::move(step.cache));
    }
    return out;
}

Matrix repeat_vector(std::span<const double> h, std::size_t steps) {
    require_shape(steps >= 1, "repeat_vector needs at least one step");
    Matrix out(steps, h.size());
    for (std::size_t t = 0; t < steps; ++t) std::copy(h.begin(), h.end(), out.row(t).begin());
    return out;
}

Decoded decode(MatrixView repeated, const LstmState& init, const Seq2SeqModel& m) {
    require_shape(repeated.cols == m.hidden,
                  fmt::format("decode: input has width {}, model hidden size is {}", repeated.cols, m.hidden));
    Decoded out;
    out.hidden = Matrix(repeated.rows, m.hidden);
    out.caches.reserve(repeated.rows);
    LstmState state = init;
    for (std::size_t t = 0; t < repeated.rows; ++t) {
        auto step = lstm_cell_forward(repeated.row(t), state, m.decoder);
        state = std::move(step.state);
        std::copy(state.h.begin(), state.h.end(), out.hidden.row(t).begin());
        out.caches.push_back(std::move(step.cache));
    }
    return out;
}

Matrix project(MatrixView hidden, const Seq2SeqModel& m) {
    require_shape(hidden.cols == m.hidden,
                  fmt::format("project: hidden width {}, projection expects {}", hidden.cols, m.hidden));
    Matrix out(hidden.rows, m.spec.features);
    for (std::size_t t = 0; t < hidden.rows; ++t) {
        const auto y = affine(m.proj_w, hidden.row(t), m.proj_b);
        std::copy(y.begin(), y.end(), out.row(t).begin());
    }
    return out;
}

Matrix forward(MatrixView x, const Seq2SeqModel& m) {
    const auto enc = encode(x, m);
    const auto repeated = repeat_vector(enc.state.h, m.spec.horizon);
    const auto dec = decode(repeated, enc.state, m);
    return project(dec.hidden, m);
}

double huber_element(double e, double tau) {
    const double a = std::abs(e);
    return a <= tau ? 0.5 * e * e : tau * (a - 0.5 * tau);
}

double huber_element_grad(double e, double tau) {
    if (std::abs(e) <= tau) return e;
    return e > 0.0 ? tau : -tau;
}

HuberResult huber(MatrixView prediction, MatrixView target, const HuberConfig& cfg) {
    require_shape(prediction.rows == target.rows && prediction.cols == target.cols,
                  fmt::format("huber: prediction {}x{} vs target {}x{}", prediction.rows, prediction.cols,
                              target.rows, target.cols));
    HuberResult out;
    out.grad = Matrix(prediction.rows, prediction.cols);
    auto g = out.grad.data();
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double e = prediction.data[k] - target.data[k];
        out.loss += huber_element(e, cfg.tau);
        g[k] = huber_element_grad(e, cfg.tau);
    }
    return out;
}

double backward_accumulate(MatrixView x, MatrixView y, const Seq2SeqModel& m, const HuberConfig& cfg,
                           Seq2SeqModel& grads, double weight) {
    require_shape(y.rows == m.spec.horizon && y.cols == m.spec.features,
                  fmt::format("backward: target is {}x{}, model predicts {}x{}", y.rows, y.cols, m.spec.horizon,
                              m.spec.features));
    const auto enc = encode(x, m);
    const auto repeated = repeat_vector(enc.state.h, m.spec.horizon);
    const auto dec = decode(repeated, enc.state, m);
    const auto pred = project(dec.hidden, m);
    auto loss = huber(pred, y, cfg);

    const auto hd = m.hidden;
    const auto steps = m.spec.horizon;
    Vector dy(m.spec.features);
    Vector dh(hd, 0.0);
    Vector dc(hd, 0.0);
    Vector d_repeat(hd, 0.0); // gradients of all decoder inputs meet at the encoder's h
    for (std::size_t t = steps; t-- > 0;) {
        const auto g_row = loss.grad.row(t);
        for (std::size_t j = 0; j < dy.size(); ++j) dy[j] = weight * g_row[j];
        outer_accumulate(grads.proj_w, dy, dec.hidden.row(t));
        axpy(1.0, dy, grads.proj_b);
        matvec_transposed_accumulate(m.proj_w, dy, dh);

        auto step = lstm_cell_backward(dh, dc, dec.caches[t], m.decoder, grads.decoder);
        axpy(1.0, step.dx, d_repeat);
        dh = std::move(step.dh_prev);
        dc = std::move(step.dc_prev);
    }

    // dh/dc now hold the gradient w.r.t. the decoder's initial state, which is
    // the encoder's final state; the repeat vector adds to the same h.
    axpy(1.0, d_repeat, dh);
    for (std::size_t t = enc.caches.size(); t-- > 0;) {
        auto step = lstm_cell_backward(dh, dc, enc.caches[t], m.encoder, grads.encoder);
        dh = std::move(step.dh_prev);
        dc = std::move(step.dc_prev);
    }
    return loss.loss;
}

Gradients backward(MatrixView x, MatrixView y, const Seq2SeqModel& m, const HuberConfig& cfg) {
    Gradients out;
    out.grads = zeros_like(m);
    out.loss = backward_accumulate(x, y, m, cfg, out.grads, 1.0);
    return out;
}

} // namespace flowcast
