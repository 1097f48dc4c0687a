#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fadml/errors.hpp"
#include "fadml/filters.hpp"
#include "fadml/net.hpp"
#include "fadml/tensor.hpp"

namespace fadml {

enum class attack_kind { fgsm, bim, lbfgs, fademl };

inline const char* attack_kind_name(attack_kind k) {
    switch (k) {
        case attack_kind::fgsm: return "fgsm";
        case attack_kind::bim: return "bim";
        case attack_kind::lbfgs: return "lbfgs";
        case attack_kind::fademl: return "fademl";
    }
    return "?";
}

struct attack_spec {
    attack_kind kind = attack_kind::fgsm;
    attack_kind base = attack_kind::bim;  // fademl only
    float epsilon = 0.05f;                // perturbation magnitude
    float eta = 1.0f;                     // noise scaling factor (fademl)
    float step_size = 0.005f;             // bim alpha / fademl lambda
    int max_iters = 50;
    int target_class = -1;
    float penalty_weight = 1.0f;  // lbfgs starting c
    bool targeted = true;
    // clip range is fixed to [0,1]

    void validate() const {
        if (epsilon < 0.0f) throw config_error("attack: epsilon must be >= 0");
        if (!(eta >= 0.0f)) throw config_error("attack: eta must be >= 0");
        if (!(step_size > 0.0f)) throw config_error("attack: step_size must be > 0");
        if (max_iters < 1) throw config_error("attack: max_iters must be >= 1");
        if (!(penalty_weight > 0.0f)) throw config_error("attack: penalty_weight must be > 0");
        if (kind == attack_kind::fademl && base == attack_kind::fademl)
            throw config_error("attack: fademl base must be fgsm, bim or lbfgs");
    }

    std::string label() const {
        if (kind == attack_kind::fademl)
            return std::string("fademl:") + attack_kind_name(base);
        return attack_kind_name(kind);
    }

    // "fgsm", "bim", "lbfgs", "fademl:bim"
    static attack_kind parse_kind(const std::string& name) {
        if (name == "fgsm") return attack_kind::fgsm;
        if (name == "bim") return attack_kind::bim;
        if (name == "lbfgs") return attack_kind::lbfgs;
        if (name == "fademl") return attack_kind::fademl;
        throw config_error("attack: unknown kind '" + name + "'");
    }

    static attack_spec parse(const std::string& text) { return parse(text, attack_spec{}); }

    static attack_spec parse(const std::string& text, const attack_spec& defaults) {
        attack_spec spec = defaults;
        const auto colon = text.find(':');
        spec.kind = parse_kind(text.substr(0, colon));
        if (colon != std::string::npos) {
            if (spec.kind != attack_kind::fademl)
                throw config_error("attack: only fademl takes a base attack ('" + text + "')");
            spec.base = parse_kind(text.substr(colon + 1));
        }
        spec.validate();
        return spec;
    }
};

struct adversarial_example {
    tensor x_original;
    tensor noise;          // n
    tensor x_adversarial;  // clip(x + eta*n), eta = 1 for fgsm/bim/lbfgs
    attack_spec spec;
    int iterations_used = 0;
    bool success_unfiltered = false;
    std::optional<bool> success_filtered;  // set by fademl
    float l2_noise_norm = 0.0f;
    float linf_noise_norm = 0.0f;
    float initial_target_gap = 0.0f;  // fademl: top-5 gap between x and y predictions
    float final_cost_gap = 0.0f;      // fademl: top-5 gap between TM1 and TM2/3 views of x*
    std::vector<float> objective_trace;  // fademl: composed loss after each accepted step
};

namespace detail {

inline bool hits_goal(const prediction& p, const attack_spec& spec) {
    return spec.targeted ? p.top1() == spec.target_class : p.top1() != spec.target_class;
}

inline void finish_example(adversarial_example& ex, const network& net) {
    ex.l2_noise_norm = ex.noise.l2_norm();
    ex.linf_noise_norm = ex.noise.linf_norm();
    ex.success_unfiltered = hits_goal(forward(net, ex.x_adversarial), ex.spec);
}

inline tensor checked_gradient(const network& net, const tensor& x, int target) {
    tensor g = input_gradient(net, x, target);
    if (g.has_nan()) throw numeric_error("attack: NaN in input gradient");
    return g;
}

inline float sign(float v) { return v > 0.0f ? 1.0f : v < 0.0f ? -1.0f : 0.0f; }

}  // namespace detail

// One-step sign attack. Targeted mode descends the loss toward the target
// class (noise = -eps * sign(grad)); untargeted mode ascends away from the
// true class passed as `target`.
inline adversarial_example fgsm(const network& net, const tensor& x, int target,
                                attack_spec spec) {
    spec.validate();
    spec.kind = attack_kind::fgsm;
    spec.target_class = target;
    const tensor g = detail::checked_gradient(net, x, target);
    adversarial_example ex;
    ex.spec = spec;
    ex.x_original = x;
    ex.noise = tensor(x.shape());
    const float dir = spec.targeted ? -spec.epsilon : spec.epsilon;
    for (std::size_t i = 0; i < g.size(); ++i) ex.noise[i] = dir * detail::sign(g[i]);
    ex.x_adversarial = clipped_sum(x, ex.noise, 1.0f);
    ex.iterations_used = 1;
    detail::finish_example(ex, net);
    return ex;
}

// Iterated FGSM with a per-step [0,1] clip and a projection onto the
// l-inf ball of radius eps around x; stops as soon as the goal holds.
inline adversarial_example bim(const network& net, const tensor& x, int target,
                               attack_spec spec) {
    spec.validate();
    spec.kind = attack_kind::bim;
    spec.target_class = target;
    if (spec.step_size > spec.epsilon && spec.epsilon > 0.0f)
        throw config_error("bim: step_size must not exceed epsilon");

    adversarial_example ex;
    ex.spec = spec;
    ex.x_original = x;

    grad_result eval = input_gradient_ex(net, x, target);
    if (eval.x_grad.has_nan()) throw numeric_error("attack: NaN in input gradient");
    tensor cur = x;
    ex.iterations_used = 0;
    bool done = detail::hits_goal(eval.pred, spec);
    const float dir = spec.targeted ? -spec.step_size : spec.step_size;
    for (int k = 1; k <= spec.max_iters && !done; ++k) {
        for (std::size_t i = 0; i < cur.size(); ++i) {
            float v = cur[i] + dir * detail::sign(eval.x_grad[i]);
            v = std::min(1.0f, std::max(0.0f, v));
            // project onto the eps-ball around the original pixel
            v = std::min(x[i] + spec.epsilon, std::max(x[i] - spec.epsilon, v));
            cur[i] = v;
        }
        ex.iterations_used = k;
        eval = input_gradient_ex(net, cur, target);
        if (eval.x_grad.has_nan()) throw numeric_error("attack: NaN in input gradient");
        done = detail::hits_goal(eval.pred, spec);
    }
    ex.noise = cur;
    ex.noise -= x;
    ex.x_adversarial = std::move(cur);
    ex.l2_noise_norm = ex.noise.l2_norm();
    ex.linf_noise_norm = ex.noise.linf_norm();
    ex.success_unfiltered = done;
    return ex;
}

// Minimal-noise attack in the L-BFGS mold: minimize c*|n|^2 + J(x+n, target)
// by gradient descent with a backtracking line search, bisecting the penalty
// weight c across outer rounds to find the smallest successful noise.
inline adversarial_example lbfgs_attack(const network& net, const tensor& x, int target,
                                        attack_spec spec) {
    spec.validate();
    spec.kind = attack_kind::lbfgs;
    spec.target_class = target;

    constexpr float c_min = 1e-3f, c_max = 1e3f;
    constexpr int outer_rounds = 8;

    adversarial_example ex;
    ex.spec = spec;
    ex.x_original = x;

    // constraint already satisfied: zero noise is optimal
    if (detail::hits_goal(forward(net, x), spec)) {
        ex.noise = tensor(x.shape());
        ex.x_adversarial = x;
        ex.iterations_used = 0;
        detail::finish_example(ex, net);
        return ex;
    }

    tensor best_noise;
    float best_norm = 0.0f;
    bool have_success = false;
    tensor fallback_noise(x.shape());
    float fallback_loss = std::numeric_limits<float>::max();
    int total_iters = 0;

    float lo = c_min, hi = c_max;
    float c = std::clamp(spec.penalty_weight, c_min, c_max);
    for (int round = 0; round < outer_rounds; ++round) {
        tensor n(x.shape());
        bool round_success = false;
        float lambda = 0.25f;
        grad_result eval = input_gradient_ex(net, clipped_sum(x, n, 1.0f), target);
        double obj = static_cast<double>(c) * n.l2_norm() * n.l2_norm() + eval.loss_value;
        for (int it = 0; it < spec.max_iters; ++it) {
            ++total_iters;
            // gradient of the penalized objective w.r.t. n (clip zeroes the
            // network term where the pixel saturates)
            tensor g(n.shape());
            for (std::size_t i = 0; i < n.size(); ++i) {
                const float xi = x[i] + n[i];
                const float net_term = (xi > 0.0f && xi < 1.0f) ? eval.x_grad[i] : 0.0f;
                g[i] = 2.0f * c * n[i] + net_term;
            }
            if (g.has_nan()) throw numeric_error("attack: NaN in objective gradient");

            // line-search trials cost a forward pass only
            bool accepted = false;
            tensor n_best;
            eval_result trial;
            while (lambda > 1e-7f) {
                tensor n_try = n;
                for (std::size_t i = 0; i < n.size(); ++i) n_try[i] -= lambda * g[i];
                trial = predict_and_loss(net, clipped_sum(x, n_try, 1.0f), target);
                const double try_obj = static_cast<double>(c) * n_try.l2_norm() * n_try.l2_norm() +
                                       trial.loss_value;
                if (try_obj <= obj) {
                    n_best = std::move(n_try);
                    obj = try_obj;
                    lambda = std::min(lambda * 1.5f, 4.0f);
                    accepted = true;
                    break;
                }
                lambda *= 0.5f;
            }
            if (!accepted) break;  // line search exhausted: local minimum for this c
            n = std::move(n_best);

            if (detail::hits_goal(trial.pred, spec)) {
                round_success = true;
                const float norm = n.l2_norm();
                if (!have_success || norm < best_norm) {
                    have_success = true;
                    best_norm = norm;
                    best_noise = n;
                }
            }
            if (trial.loss_value < fallback_loss) {
                fallback_loss = trial.loss_value;
                fallback_noise = n;
            }
            if (it + 1 < spec.max_iters)
                eval = input_gradient_ex(net, clipped_sum(x, n, 1.0f), target);
        }
        // success means we can afford a heavier norm penalty next round
        if (round_success)
            lo = c;
        else
            hi = c;
        c = std::sqrt(lo * hi);
    }

    // polish: shrink the best noise along its own direction down to the
    // decision boundary (smallest scale that still succeeds)
    if (have_success) {
        float t_lo = 0.0f, t_hi = 1.0f;
        for (int step = 0; step < 16; ++step) {
            const float t = 0.5f * (t_lo + t_hi);
            tensor n_try = best_noise;
            n_try *= t;
            if (detail::hits_goal(forward(net, clipped_sum(x, n_try, 1.0f)), spec))
                t_hi = t;
            else
                t_lo = t;
        }
        if (t_hi < 1.0f) {
            best_noise *= t_hi;
            best_norm = best_noise.l2_norm();
        }
    }

    ex.noise = have_success ? best_noise : fallback_noise;
    ex.x_adversarial = clipped_sum(x, ex.noise, 1.0f);
    ex.iterations_used = total_iters;
    detail::finish_example(ex, net);
    return ex;
}

// Top-5 prediction gap: sum over the five most probable classes of p_x of
// [p_x(c) - p_y(c)]. Classes are aligned by identity of p_x's top-5, so the
// gap is exactly 0 for identical distributions and always within [-1, 1].
inline float cost_target_gap(const prediction& p_x, const prediction& p_y,
                             bool* truncated = nullptr) {
    if (p_x.probabilities.size() != p_y.probabilities.size())
        throw input_error("cost_target_gap: predictions cover different class sets");
    const int k = std::min<int>(5, static_cast<int>(p_x.probabilities.size()));
    if (truncated) *truncated = k < 5;
    float gap = 0.0f;
    for (const auto& [cls, prob] : p_x.top_k(k)) gap += prob - p_y.probabilities[cls];
    return gap;
}

// Filter-aware attack: seeds noise with a base attack, then re-optimizes it
// against the filtered pipeline J(net, F(clip(eta*n + x)), target), pulling
// gradients back through the filter adjoint. The base attack and the
// refinement share the max_iters budget; success is measured through the
// filter. With the identity filter the refinement never engages on a
// successful base attack, so the base result is returned unchanged.
inline adversarial_example fademl_attack(const network& net, const linear_filter& filter,
                                         const tensor& x, const tensor& y_sample,
                                         attack_spec spec) {
    spec.validate();
    if (spec.kind != attack_kind::fademl)
        throw config_error("fademl: spec.kind must be fademl");
    if (spec.target_class < 0 || spec.target_class >= net.num_classes())
        throw input_error("fademl: spec.target_class is unset or out of range");
    if (filter.image_shape() != x.shape())
        throw input_error("fademl: filter built for shape " +
                          tensor::shape_str(filter.image_shape()) + ", input is " +
                          tensor::shape_str(x.shape()));

    const prediction p_x = forward(net, x);
    const prediction p_y = forward(net, y_sample);

    // seed with the base attack under the unfiltered pipeline
    attack_spec base_spec = spec;
    base_spec.kind = spec.base;
    adversarial_example ex;
    switch (spec.base) {
        case attack_kind::fgsm: ex = fgsm(net, x, spec.target_class, base_spec); break;
        case attack_kind::bim: ex = bim(net, x, spec.target_class, base_spec); break;
        case attack_kind::lbfgs: ex = lbfgs_attack(net, x, spec.target_class, base_spec); break;
        case attack_kind::fademl: throw config_error("fademl: base must not be fademl");
    }
    ex.spec = spec;
    ex.initial_target_gap = cost_target_gap(p_x, p_y);

    tensor n = ex.noise;
    // for eta = 1 the base attack's x* already is clip(n + x); reusing its
    // buffer keeps the no-refinement path bit-identical to the base attack
    tensor x_star = spec.eta == 1.0f ? ex.x_adversarial : clipped_sum(x, n, spec.eta);
    prediction p_filtered = forward(net, filter.apply(x_star));
    bool success = detail::hits_goal(p_filtered, spec);

    int iters = ex.iterations_used;
    bool refined = false;
    float lambda = spec.step_size;
    std::vector<float> objective_trace;
    // eta = 0 makes the pipeline constant in n: nothing to optimize
    if (!success && spec.eta > 0.0f && iters < spec.max_iters) {
        grad_result eval = input_gradient_ex(net, filter.apply(x_star), spec.target_class);
        double obj = eval.loss_value;
        objective_trace.push_back(static_cast<float>(obj));
        while (iters < spec.max_iters) {
            // d/dn J(net, F(clip(eta*n + x))) = eta * mask * F^T grad
            tensor g_pix = filter.adjoint_apply(eval.x_grad);
            if (g_pix.has_nan()) throw numeric_error("fademl: NaN in pipeline gradient");
            tensor g(n.shape());
            for (std::size_t i = 0; i < n.size(); ++i) {
                const float v = x[i] + spec.eta * n[i];
                g[i] = (v > 0.0f && v < 1.0f) ? spec.eta * g_pix[i] : 0.0f;
            }

            bool accepted = false;
            eval_result trial;
            while (lambda > spec.step_size * 1e-4f) {
                tensor n_try = n;
                for (std::size_t i = 0; i < n.size(); ++i) n_try[i] -= lambda * g[i];
                tensor x_try = clipped_sum(x, n_try, spec.eta);
                trial = predict_and_loss(net, filter.apply(x_try), spec.target_class);
                if (trial.loss_value <= obj) {
                    n = std::move(n_try);
                    x_star = std::move(x_try);
                    obj = trial.loss_value;
                    lambda = std::min(lambda * 1.5f, spec.step_size * 64.0f);
                    accepted = true;
                    refined = true;
                    break;
                }
                lambda *= 0.5f;
            }
            if (!accepted) break;
            ++iters;
            objective_trace.push_back(static_cast<float>(obj));
            p_filtered = trial.pred;
            if (detail::hits_goal(p_filtered, spec)) {
                success = true;
                break;
            }
            if (iters < spec.max_iters)
                eval = input_gradient_ex(net, filter.apply(x_star), spec.target_class);
        }
    }

    if (refined) {
        ex.noise = std::move(n);
        ex.x_adversarial = std::move(x_star);
        ex.l2_noise_norm = ex.noise.l2_norm();
        ex.linf_noise_norm = ex.noise.linf_norm();
    } else if (spec.eta != 1.0f) {
        ex.x_adversarial = std::move(x_star);  // x* = clip(eta*n + x) under this spec's eta
    }
    ex.iterations_used = iters;
    ex.objective_trace = std::move(objective_trace);
    const prediction p_tm1 = forward(net, ex.x_adversarial);
    ex.success_unfiltered = detail::hits_goal(p_tm1, ex.spec);
    ex.success_filtered = success;
    ex.final_cost_gap = cost_target_gap(p_tm1, p_filtered);
    return ex;
}

// Unified entry point used by the sweep harness. Baseline attacks ignore the
// filter and y_sample; fademl needs both.
inline adversarial_example run_attack(const network& net, const attack_spec& spec,
                                      const tensor& x, int target,
                                      const linear_filter* filter = nullptr,
                                      const tensor* y_sample = nullptr) {
    attack_spec s = spec;
    s.target_class = target;
    switch (spec.kind) {
        case attack_kind::fgsm: return fgsm(net, x, target, s);
        case attack_kind::bim: return bim(net, x, target, s);
        case attack_kind::lbfgs: return lbfgs_attack(net, x, target, s);
        case attack_kind::fademl:
            if (!filter || !y_sample)
                throw input_error("fademl needs a filter and a target-class sample");
            return fademl_attack(net, *filter, x, *y_sample, s);
    }
    throw config_error("attack: unknown kind");
}

}  // namespace fadml
