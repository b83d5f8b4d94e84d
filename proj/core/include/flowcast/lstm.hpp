#pragma once

#include "flowcast/tensor.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>

namespace flowcast {

enum class Gate : std::size_t { input = 0, forget = 1, output = 2, candidate = 3 };

inline constexpr std::array<const char*, 4> kGateNames{"input", "forget", "output", "candidate"};

/// LSTM weights with peephole connections.
///
///   g_t = tanh(Wx_c x_t + Wh_c h_{t-1} + b_c)
///   i_t = sigma(Wx_i x_t + Wh_i h_{t-1} + p_i * c_{t-1} + b_i)
///   f_t = sigma(Wx_f x_t + Wh_f h_{t-1} + p_f * c_{t-1} + b_f)
///   c_t = f_t * c_{t-1} + i_t * g_t
///   o_t = sigma(Wx_o x_t + Wh_o h_{t-1} + p_o * c_t + b_o)
///   h_t = o_t * tanh(c_t)
///
/// `*` is element-wise; the output gate peeks at the *new* cell state.
struct LstmParams {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::array<Matrix, 4> w_x; // hidden x input, indexed by Gate
    std::array<Matrix, 4> w_h; // hidden x hidden
    std::array<Vector, 4> b;
    Vector peep_i;
    Vector peep_f;
    Vector peep_o;

    static LstmParams zeros(std::size_t input_dim, std::size_t hidden_dim);

    Matrix& wx(Gate g) { return w_x[static_cast<std::size_t>(g)]; }
    const Matrix& wx(Gate g) const { return w_x[static_cast<std::size_t>(g)]; }
    Matrix& wh(Gate g) { return w_h[static_cast<std::size_t>(g)]; }
    const Matrix& wh(Gate g) const { return w_h[static_cast<std::size_t>(g)]; }
    Vector& bias(Gate g) { return b[static_cast<std::size_t>(g)]; }
    const Vector& bias(Gate g) const { return b[static_cast<std::size_t>(g)]; }

    /// Throws ShapeError if any block disagrees with input_dim/hidden_dim.
    void check() const;

    friend bool operator==(const LstmParams&, const LstmParams&) = default;
};

/// Visits every parameter block as (name, span). Order is fixed and is the
/// on-disk order of checkpoints: w_x per gate, w_h per gate, b per gate,
/// then peep_i, peep_f, peep_o.
template <class Params, class F>
    requires std::is_same_v<std::remove_const_t<Params>, LstmParams>
void for_each_block(Params& p, const std::string& prefix, F&& visit) {
    for (std::size_t g = 0; g < 4; ++g) visit(prefix + "w_x." + kGateNames[g], p.w_x[g].data());
    for (std::size_t g = 0; g < 4; ++g) visit(prefix + "w_h." + kGateNames[g], p.w_h[g].data());
    for (std::size_t g = 0; g < 4; ++g) visit(prefix + "b." + kGateNames[g], std::span(p.b[g]));
    visit(prefix + "peep_i", std::span(p.peep_i));
    visit(prefix + "peep_f", std::span(p.peep_f));
    visit(prefix + "peep_o", std::span(p.peep_o));
}

struct LstmState {
    Vector c;
    Vector h;

    static LstmState zeros(std::size_t hidden_dim) { return {Vector(hidden_dim, 0.0), Vector(hidden_dim, 0.0)}; }

    friend bool operator==(const LstmState&, const LstmState&) = default;
};

/// Everything the backward pass needs from one forward step.
struct StepCache {
    Vector x;
    Vector h_prev;
    Vector c_prev;
    Vector i;      // input gate
    Vector f;      // forget gate
    Vector o;      // output gate
    Vector g;      // candidate tanh(...)
    Vector c;      // new cell state
    Vector tanh_c; // tanh(c)
};

struct CellForward {
    LstmState state;
    StepCache cache;
};

CellForward lstm_cell_forward(std::span<const double> x, const LstmState& prev, const LstmParams& p);

struct CellBackward {
    Vector dx;
    Vector dh_prev;
    Vector dc_prev;
};

/// Reverse step. `dh` and `dc` are the loss gradients w.r.t. this step's h_t
/// and c_t arriving from later computation; parameter gradients are added
/// into `grads` (which must be shaped like `p`).
CellBackward lstm_cell_backward(std::span<const double> dh, std::span<const double> dc, const StepCache& cache,
                                const LstmParams& p, LstmParams& grads);

} // namespace flowcast
