#pragma once

// Independent reference implementations used only by tests. Nothing here
// calls into the library's numeric kernels: everything is plain loops over
// nested std::vector, with long double accumulation where it matters.

#include "flowcast/lstm.hpp"
#include "flowcast/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;

template <class Real>
Real sig(Real x) {
    return Real(1) / (Real(1) + std::exp(-x));
}

inline Mat to_mat(const flowcast::Matrix& m) {
    Mat out(m.rows(), Vec(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
    return out;
}

inline Mat to_mat(flowcast::MatrixView v) {
    Mat out(v.rows, Vec(v.cols));
    for (std::size_t r = 0; r < v.rows; ++r)
        for (std::size_t c = 0; c < v.cols; ++c) out[r][c] = v(r, c);
    return out;
}

template <class Real>
struct Gates {
    std::vector<Real> i, f, o, g, c, h;
};

/// One LSTM step written out per hidden unit, straight from the gate equations.
template <class Real = double>
Gates<Real> lstm_step(const std::vector<Real>& x, const std::vector<Real>& h_prev, const std::vector<Real>& c_prev,
                      const flowcast::LstmParams& p) {
    const std::size_t H = p.hidden_dim;
    const std::size_t M = p.input_dim;
    auto pre = [&](std::size_t gate, std::size_t j) {
        Real a = p.b[gate][j];
        for (std::size_t k = 0; k < M; ++k) a += Real(p.w_x[gate](j, k)) * x[k];
        for (std::size_t k = 0; k < H; ++k) a += Real(p.w_h[gate](j, k)) * h_prev[k];
        return a;
    };
    Gates<Real> s;
    s.i.resize(H), s.f.resize(H), s.o.resize(H), s.g.resize(H), s.c.resize(H), s.h.resize(H);
    for (std::size_t j = 0; j < H; ++j) {
        s.g[j] = std::tanh(pre(3, j));
        s.i[j] = sig(pre(0, j) + Real(p.peep_i[j]) * c_prev[j]);
        s.f[j] = sig(pre(1, j) + Real(p.peep_f[j]) * c_prev[j]);
        s.c[j] = s.f[j] * c_prev[j] + s.i[j] * s.g[j];
        s.o[j] = sig(pre(2, j) + Real(p.peep_o[j]) * s.c[j]);
        s.h[j] = s.o[j] * std::tanh(s.c[j]);
    }
    return s;
}

/// Encoder -> repeat -> decoder -> projection, step by step.
template <class Real = double>
std::vector<std::vector<Real>> seq2seq_forward(const Mat& x, const flowcast::Seq2SeqModel& m) {
    using V = std::vector<Real>;
    const std::size_t H = m.hidden;
    V h(H, Real(0)), c(H, Real(0));
    for (const auto& row : x) {
        auto s = lstm_step<Real>(V(row.begin(), row.end()), h, c, m.encoder);
        h = s.h;
        c = s.c;
    }
    const V context = h;
    std::vector<V> y;
    for (std::size_t t = 0; t < m.spec.horizon; ++t) {
        auto s = lstm_step<Real>(context, h, c, m.decoder);
        h = s.h;
        c = s.c;
        V out(m.spec.features);
        for (std::size_t r = 0; r < out.size(); ++r) {
            Real a = m.proj_b[r];
            for (std::size_t k = 0; k < H; ++k) a += Real(m.proj_w(r, k)) * h[k];
            out[r] = a;
        }
        y.push_back(out);
    }
    return y;
}

template <class Real>
Real huber_sum(const std::vector<std::vector<Real>>& pred, const Mat& target, Real tau) {
    Real total = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        for (std::size_t j = 0; j < pred[t].size(); ++j) {
            const Real e = std::fabs(pred[t][j] - Real(target[t][j]));
            total += e <= tau ? Real(0.5) * e * e : tau * (e - Real(0.5) * tau);
        }
    }
    return total;
}

/// Summed Huber loss of one sample, evaluated in extended precision so that
/// central differences are not swamped by rounding.
inline long double loss(const Mat& x, const Mat& y, const flowcast::Seq2SeqModel& m, long double tau = 1.0L) {
    return huber_sum<long double>(seq2seq_forward<long double>(x, m), y, tau);
}

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::string worst_block;
};

/// Central finite differences of the oracle loss against `analytic`, which
/// must be laid out like `model`. Relative error uses
/// |a - n| / max(|a| + |n|, floor) so near-zero gradients are compared
/// absolutely.
inline GradCheck finite_difference_check(const Mat& x, const Mat& y, flowcast::Seq2SeqModel model,
                                         const flowcast::Seq2SeqModel& analytic, double step = 1e-5,
                                         double floor = 1e-6) {
    std::vector<std::pair<std::string, std::span<double>>> params;
    std::vector<std::span<const double>> grads;
    flowcast::for_each_block(model, [&](const std::string& n, std::span<double> s) { params.emplace_back(n, s); });
    flowcast::for_each_block(analytic, [&](const std::string&, std::span<const double> s) { grads.push_back(s); });
    GradCheck out;
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b].second;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double saved = p[k];
            p[k] = saved + step;
            const long double up = loss(x, y, model);
            p[k] = saved - step;
            const long double down = loss(x, y, model);
            p[k] = saved;
            const double numeric = static_cast<double>((up - down) / (2.0L * step));
            const double a = grads[b][k];
            const double rel = std::fabs(a - numeric) / std::max(std::fabs(a) + std::fabs(numeric), floor);
            if (rel > out.max_rel_error) {
                out.max_rel_error = rel;
                out.worst_block = params[b].first;
            }
            ++out.checked;
        }
    }
    return out;
}

/// Random model with every parameter (biases and peepholes included) drawn
/// from U(-scale, scale).
inline flowcast::Seq2SeqModel random_model(const flowcast::WindowSpec& spec, std::size_t hidden, std::uint64_t seed,
                                           double scale = 0.5) {
    auto m = flowcast::Seq2SeqModel::zeros(spec, hidden);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    flowcast::for_each_block(m, [&](const std::string&, std::span<double> s) {
        for (auto& v : s) v = u(rng);
    });
    return m;
}

inline flowcast::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    flowcast::Matrix m(rows, cols);
    for (auto& v : m.data()) v = u(rng);
    return m;
}

/// Two-pass population statistics over byte sizes, reported in KB / MB.
struct Stats {
    double avg_kb, min_kb, max_kb, std_kb, total_mb;
};

inline Stats brute_stats(const std::vector<std::uint64_t>& sizes) {
    if (sizes.empty()) return {0, 0, 0, 0, 0};
    long double sum = 0.0L;
    for (auto s : sizes) sum += static_cast<long double>(s);
    const long double mean = sum / static_cast<long double>(sizes.size());
    long double ss = 0.0L;
    for (auto s : sizes) ss += (s - mean) * (s - mean);
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    return {static_cast<double>(mean / 1000.0L), static_cast<double>(*lo) / 1000.0, static_cast<double>(*hi) / 1000.0,
            static_cast<double>(std::sqrt(ss / static_cast<long double>(sizes.size())) / 1000.0L),
            static_cast<double>(sum / 1.0e6L)};
}

inline double brute_rmse(const Vec& pred, const Vec& truth) {
    long double ss = 0.0L;
    for (std::size_t k = 0; k < pred.size(); ++k) ss += std::pow(static_cast<long double>(pred[k]) - truth[k], 2);
    return static_cast<double>(std::sqrt(ss / pred.size()));
}

/// R^2 from the single-pass sums: SS_tot = sum(y^2) - (sum y)^2 / n.
inline double brute_r2(const Vec& pred, const Vec& truth) {
    long double sy = 0.0L, syy = 0.0L, sres = 0.0L;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        sy += truth[k];
        syy += static_cast<long double>(truth[k]) * truth[k];
        sres += std::pow(static_cast<long double>(truth[k]) - pred[k], 2);
    }
    const long double sst = syy - sy * sy / truth.size();
    return static_cast<double>(1.0L - sres / sst);
}

inline double rel_diff(double a, double b) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-300});
    return std::fabs(a - b) / scale;
}

} // namespace oracle
