#pragma once

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "countvqa/graph.hpp"
#include "countvqa/rng.hpp"

namespace cvqa {

/// Owns every Parameter of one model. Addresses are stable; layers keep raw
/// pointers into the store. Creation order is the checkpoint order.
class ParameterStore {
public:
    explicit ParameterStore(std::uint64_t seed) : rng_(Rng::derive(seed, {0x9a7a})) {}

    /// Matrix with uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)).
    Parameter& matrix(const std::string& name, std::size_t rows, std::size_t cols);

    /// Zero-initialized vector (biases).
    Parameter& zeros(const std::string& name, std::size_t n);

    Parameter& scalar(const std::string& name, double v, bool trainable = true);

    Parameter* find(const std::string& name);
    const Parameter* find(const std::string& name) const;

    std::vector<Parameter*> all();
    std::size_t size() const { return order_.size(); }

    void zero_grads();

    /// Largest |g| over all trainable parameters; used by NaN/loss guards.
    bool grads_finite() const;

private:
    Parameter& emplace(Parameter p);

    std::deque<Parameter> params_;
    std::vector<Parameter*> order_;
    std::unordered_map<std::string, Parameter*> by_name_;
    Rng rng_;
};

// ---- layer parameter bundles ----

struct AffineParams {
    Parameter* w = nullptr;  // [out x in]
    Parameter* b = nullptr;  // [out]
};

AffineParams make_affine(ParameterStore& ps, const std::string& name, std::size_t in,
                         std::size_t out);

Var affine(Graph& g, Var x, const AffineParams& p);
Var linear_rows(Graph& g, Var x, const AffineParams& p);

/// Gated Tanh Unit: tanh(W1 x + b1) * sigmoid(W2 x + b2).
struct GtuParams {
    AffineParams lin;
    AffineParams gate;
};

GtuParams make_gtu(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t out);

Var gtu(Graph& g, Var x, const GtuParams& p);
Var gtu_rows(Graph& g, Var x, const GtuParams& p);

/// Standard LSTM cell: input/forget/output gates plus candidate cell, each
/// an affine map of [x, h].
struct LstmParams {
    AffineParams input_gate, forget_gate, output_gate, cell;
    std::size_t hidden = 0;
};

LstmParams make_lstm(ParameterStore& ps, const std::string& name, std::size_t in,
                     std::size_t hidden);

std::pair<Var, Var> lstm_step(Graph& g, Var x, Var h_prev, Var c_prev, const LstmParams& p);

// ---- scalar losses (value path) ----

/// Huber of a nonnegative error: 0.5 e^2 for e <= 1, else e - 0.5.
double huber(double e);

// ---- optimizer ----

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. step() consumes and zeroes the gradients.
/// Changing cfg.lr between steps only rescales the update; moments are
/// untouched.
class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    AdamConfig& config() { return cfg_; }
    long step_count() const { return step_; }

    void step(ParameterStore& ps);

    const Tensor* first_moment(Parameter* p) const;
    const Tensor* second_moment(Parameter* p) const;

private:
    struct Slot {
        Tensor m, v;
    };

    AdamConfig cfg_;
    long step_ = 0;
    std::unordered_map<Parameter*, Slot> slots_;
};

// ---- checkpoint ----

/// Versioned binary container of name -> shape + little-endian f64 payload.
/// Round-trips byte-exactly.
void save_checkpoint(const ParameterStore& ps, const std::vector<Parameter*>& params,
                     const std::string& path);
void save_checkpoint(ParameterStore& ps, const std::string& path);

/// Loads values into the store's parameters; every store parameter must be
/// present with a matching shape. Extra checkpoint entries are ignored.
void load_checkpoint(ParameterStore& ps, const std::string& path);

}  // namespace cvqa
