#pragma once

#include "flowcast/lstm.hpp"
#include "flowcast/tensor.hpp"
#include "flowcast/window_spec.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace flowcast {

/// Single-layer LSTM encoder, repeat vector, single-layer LSTM decoder and a
/// time-distributed linear projection back to the feature space.
struct Seq2SeqModel {
    WindowSpec spec;
    std::size_t hidden = 0;
    LstmParams encoder; // features -> hidden
    LstmParams decoder; // hidden -> hidden
    Matrix proj_w;      // features x hidden
    Vector proj_b;      // features

    static Seq2SeqModel zeros(const WindowSpec& spec, std::size_t hidden);

    /// Throws ShapeError on any inconsistent dimension.
    void check() const;

    friend bool operator==(const Seq2SeqModel&, const Seq2SeqModel&) = default;
};

/// Visits every parameter block of the model in checkpoint order:
/// encoder.*, decoder.*, projection.weight, projection.bias.
template <class Model, class F>
    requires std::is_same_v<std::remove_const_t<Model>, Seq2SeqModel>
void for_each_block(Model& m, F&& visit) {
    for_each_block(m.encoder, "encoder.", visit);
    for_each_block(m.decoder, "decoder.", visit);
    visit(std::string("projection.weight"), m.proj_w.data());
    visit(std::string("projection.bias"), std::span(m.proj_b));
}

std::size_t parameter_count(const Seq2SeqModel& m);

/// Gradient buffer shaped like `m`, all zero.
Seq2SeqModel zeros_like(const Seq2SeqModel& m);

struct Encoded {
    LstmState state;
    std::vector<StepCache> caches;
};

/// Runs the encoder over every row of `x` (steps x features) from the zero state.
Encoded encode(MatrixView x, const Seq2SeqModel& m);

/// `steps` copies of `h`, one per row.
Matrix repeat_vector(std::span<const double> h, std::size_t steps);

struct Decoded {
    Matrix hidden; // steps x hidden
    std::vector<StepCache> caches;
};

/// Runs the decoder over the rows of `repeated`, starting from `init`.
Decoded decode(MatrixView repeated, const LstmState& init, const Seq2SeqModel& m);

/// Applies the same affine map to every row of `hidden`.
Matrix project(MatrixView hidden, const Seq2SeqModel& m);

/// Full prediction: horizon x features.
Matrix forward(MatrixView x, const Seq2SeqModel& m);

struct HuberConfig {
    double tau = 1.0;
};

double huber_element(double error, double tau);
double huber_element_grad(double error, double tau);

struct HuberResult {
    double loss = 0.0; // summed over every element
    Matrix grad;       // d loss / d prediction
};

HuberResult huber(MatrixView prediction, MatrixView target, const HuberConfig& cfg);

/// Backpropagation through time for one (x, y) sample. Adds
/// `weight * dLoss/dTheta` into `grads` and returns the unweighted loss.
double backward_accumulate(MatrixView x, MatrixView y, const Seq2SeqModel& m, const HuberConfig& cfg,
                           Seq2SeqModel& grads, double weight = 1.0);

struct Gradients {
    double loss = 0.0;
    Seq2SeqModel grads;
};

Gradients backward(MatrixView x, MatrixView y, const Seq2SeqModel& m, const HuberConfig& cfg);

} // namespace flowcast
