#pragma once

// Micro-averaged precision/recall/F1 with the None label excluded from credit.

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "drpc/corpus.hpp"

namespace drpc {

struct LabelScore {
    std::size_t tp = 0, fp = 0, fn = 0;
    double precision = 0, recall = 0, f1 = 0;
};

struct ScoreReport {
    std::map<std::string, LabelScore> per_label;  // every label but None
    std::map<std::string, std::map<std::string, std::size_t>> confusion;  // gold -> predicted -> count
    std::size_t total = 0;
    std::size_t correct = 0;          // non-None predictions equal to gold
    std::size_t predicted = 0;        // non-None predictions
    std::size_t gold = 0;             // non-None golds
    double precision = 0, recall = 0, f1 = 0;
    // Unweighted mean of per-label F1. Not an official scorer.
    double macro_f1 = 0;
};

inline double f1_of(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

inline double safe_ratio(std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; }

// `labels` is the admissible label set; preds and golds must stay inside it.
inline ScoreReport score(const std::vector<std::string>& preds, const std::vector<std::string>& golds,
                         const std::vector<std::string>& labels, const std::string& none_label = kNoneLabel) {
    if (preds.size() != golds.size())
        throw PreconditionError("score: " + std::to_string(preds.size()) + " predictions for " +
                                std::to_string(golds.size()) + " gold labels");
    const std::set<std::string> allowed(labels.begin(), labels.end());
    ScoreReport r;
    for (const auto& l : allowed)
        if (l != none_label) r.per_label[l];
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& p = preds[i];
        const auto& g = golds[i];
        for (const auto* x : {&p, &g})
            if (!allowed.count(*x) && *x != none_label) throw PreconditionError("score: label '" + *x + "' is not in the label set");
        ++r.confusion[g][p];
        ++r.total;
        if (p != none_label) ++r.predicted;
        if (g != none_label) ++r.gold;
        if (p == g && p != none_label) {
            ++r.correct;
            ++r.per_label[p].tp;
        } else {
            if (p != none_label) ++r.per_label[p].fp;
            if (g != none_label) ++r.per_label[g].fn;
        }
    }
    r.precision = safe_ratio(r.correct, r.predicted);
    r.recall = safe_ratio(r.correct, r.gold);
    r.f1 = f1_of(r.precision, r.recall);
    for (auto& [l, s] : r.per_label) {
        s.precision = safe_ratio(s.tp, s.tp + s.fp);
        s.recall = safe_ratio(s.tp, s.tp + s.fn);
        s.f1 = f1_of(s.precision, s.recall);
        r.macro_f1 += s.f1;
    }
    if (!r.per_label.empty()) r.macro_f1 /= static_cast<double>(r.per_label.size());
    return r;
}

inline nlohmann::json to_json(const ScoreReport& r) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [l, s] : r.per_label)
        per[l] = {{"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn}, {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
    return {{"total", r.total},
            {"correct", r.correct},
            {"predicted", r.predicted},
            {"gold", r.gold},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"macro_f1", r.macro_f1},
            {"per_label", per},
            {"confusion", r.confusion}};
}

}  // namespace drpc
