#pragma once

// Central finite-difference check of tape gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "drpc/params.hpp"

namespace drpc {

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    // Coordinates whose +/- step evaluations land on different sides of a
    // relu or max kink.
    std::size_t skipped = 0;
    bool passed = true;
    std::string diagnostic;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    bool passed = true;

    const GradCheckEntry* find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }
};

// Relative error used throughout: |analytic - numeric| / max(1, |numeric|).
inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

// `f` builds a scalar loss on the given tape from the bound parameters. It must
// be deterministic. Only parameters selected by `include` are checked.
template <class T>
GradCheckReport grad_check(const std::function<Var<T>(ParamBinding<T>&)>& f, ParamStore<T>& params, double step,
                           double tol, const std::function<bool(const std::string&)>& include = {}) {
    GradCheckReport report;
    std::vector<Tensor<T>> analytic;
    {
        Tape<T> tape;
        ParamBinding<T> bind(tape, params);
        Var<T> loss = f(bind);
        tape.backward(loss);
        analytic = collect_gradients(tape, params);
    }

    auto evaluate = [&](std::uint64_t& signature) {
        Tape<T> tape;
        ParamBinding<T> bind(tape, params);
        T v = f(bind).value().item();
        signature = tape.kink_signature();
        return static_cast<double>(v);
    };

    for (std::size_t slot = 0; slot < params.size(); ++slot) {
        auto& p = params[slot];
        if (include && !include(p.name)) continue;
        GradCheckEntry entry;
        entry.name = p.name;
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const T saved = p.value[i];
            std::uint64_t sig_plus = 0, sig_minus = 0;
            p.value[i] = saved + static_cast<T>(step);
            const double f_plus = evaluate(sig_plus);
            p.value[i] = saved - static_cast<T>(step);
            const double f_minus = evaluate(sig_minus);
            p.value[i] = saved;
            const double a = static_cast<double>(analytic[slot][i]);
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus) || !std::isfinite(a)) {
                entry.passed = false;
                entry.diagnostic = "non-finite value in parameter " + p.name + " at coordinate " + std::to_string(i);
                break;
            }
            if (sig_plus != sig_minus) {
                ++entry.skipped;
                continue;
            }
            const double numeric = (f_plus - f_minus) / (2.0 * step);
            entry.max_rel_error = std::max(entry.max_rel_error, relative_error(a, numeric));
            ++entry.checked;
        }
        if (entry.max_rel_error > tol) {
            entry.passed = false;
            if (entry.diagnostic.empty()) {
                std::ostringstream msg;
                msg << "max relative error " << entry.max_rel_error << " exceeds tolerance " << tol;
                entry.diagnostic = msg.str();
            }
        }
        report.passed = report.passed && entry.passed;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace drpc
