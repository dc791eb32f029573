#pragma once

/**
 * Leakage lab: a finite-universe simulator for the training-leakage
 * decomposition of evaluation loss.
 *
 * Model. A universe is a finite set of documents, each with an abstract
 * integer date, a realized outcome, a tabulated model prediction, and two
 * training-membership indicators (pretraining, instruction finetuning).
 * Documents dated after the knowledge cutoff form the evaluation-eligible
 * population; the ambient distribution (uniform by default) lives on that
 * population, and the eval sampler is the distribution the evaluation set
 * is actually drawn from. Leakage is the dependence between evaluation
 * selection and training membership.
 *
 * The decomposition splits the expected evaluation loss into the true
 * out-of-sample loss minus a leakage term built from the per-membership-
 * class ratio of eval-sampler mass to ambient mass:
 *
 *     ratio(v) = Pr_eval(t = v) / Pr_ambient(t = v),   v in {0,1}
 *     leakage  = sum_r P(r) * (1 - ratio(t_r)) * loss(r)
 *     E[eval loss] = true_oos_loss - leakage
 *
 * ratio == 1 for both classes (the independence condition) makes every
 * term vanish. A chronologically consistent universe, where no eval-
 * eligible document is in training, lands in the 0/0 regime for the
 * trained class; that regime is defined as ratio = 1 and satisfies the
 * condition by construction. The identity above is exact whenever the
 * eval sampler distorts only the class rates, i.e. is proportional to the
 * ambient distribution within each membership class.
 */

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "chronoeval/errors.hpp"
#include "chronoeval/io.hpp"
#include "chronoeval/rng.hpp"

namespace chronoeval::leakage {

using json = nlohmann::json;

enum class LossKind { Squared, ZeroOne };

inline LossKind loss_kind_from_string(const std::string& s) {
    if (s == "squared") return LossKind::Squared;
    if (s == "zero_one") return LossKind::ZeroOne;
    throw Error("unknown loss function: " + s);
}

inline std::string to_string(LossKind k) {
    return k == LossKind::Squared ? "squared" : "zero_one";
}

inline double apply_loss(LossKind k, double outcome, double prediction) {
    if (k == LossKind::Squared) {
        const double d = outcome - prediction;
        return d * d;
    }
    return outcome == prediction ? 0.0 : 1.0;
}

struct UniverseDoc {
    std::string doc_id;
    std::int64_t date = 0;
    double outcome = 0.0;
    bool in_pretrain = false;
    bool in_ift = false;
    double eval_weight = 0.0;    // unnormalized; only meaningful past the cutoff
    double ambient_weight = 1.0; // unnormalized ambient mass
};

// t_r = 1 iff either training stage contains the document.
inline bool membership_indicator(const UniverseDoc& d) {
    return d.in_pretrain || d.in_ift;
}

struct LeakageUniverse {
    std::vector<UniverseDoc> docs;
    std::int64_t tau = 0;
    LossKind loss = LossKind::Squared;
    std::map<std::string, double> predictor; // doc_id -> prediction

    static LeakageUniverse from_json(const json& j) {
        LeakageUniverse u;
        u.tau = j.at("tau").get<std::int64_t>();
        u.loss = loss_kind_from_string(j.value("loss", "squared"));
        for (const auto& dj : j.at("docs")) {
            UniverseDoc d;
            d.doc_id = dj.at("doc_id").get<std::string>();
            d.date = dj.at("date").get<std::int64_t>();
            d.outcome = dj.at("outcome").get<double>();
            d.in_pretrain = dj.value("in_pretrain", false);
            d.in_ift = dj.value("in_ift", false);
            d.eval_weight = dj.value("eval_weight", 0.0);
            d.ambient_weight = dj.value("ambient_weight", 1.0);
            u.docs.push_back(std::move(d));
        }
        if (j.contains("predictor")) {
            for (const auto& [k, v] : j.at("predictor").items()) {
                u.predictor[k] = v.get<double>();
            }
        }
        return u;
    }

    json to_json() const {
        json docs_j = json::array();
        for (const auto& d : docs) {
            docs_j.push_back({{"doc_id", d.doc_id},
                              {"date", d.date},
                              {"outcome", d.outcome},
                              {"in_pretrain", d.in_pretrain},
                              {"in_ift", d.in_ift},
                              {"eval_weight", d.eval_weight},
                              {"ambient_weight", d.ambient_weight}});
        }
        json pred_j = json::object();
        for (const auto& [k, v] : predictor) pred_j[k] = v;
        return {{"tau", tau},
                {"loss", to_string(loss)},
                {"docs", docs_j},
                {"predictor", pred_j}};
    }

    static LeakageUniverse load(const std::filesystem::path& path) {
        return from_json(json::parse(io::read_file(path)));
    }
};

// A universe honors the chronological-consistency contract when no trained
// document is dated past the cutoff. Contaminated universes deliberately
// break this; that is what the lab is for.
inline bool is_chronological(const LeakageUniverse& u) {
    return std::all_of(u.docs.begin(), u.docs.end(), [&](const UniverseDoc& d) {
        return !(membership_indicator(d) && d.date > u.tau);
    });
}

namespace detail {

// Normalized view of the evaluation-eligible (post-cutoff) population.
struct EvalPopulation {
    std::vector<std::size_t> idx;   // indices into universe.docs
    std::vector<double> ambient_p;  // sums to 1
    std::vector<double> eval_w;     // sums to 1
    std::vector<double> loss;
    std::vector<bool> trained;      // combined indicator
    std::vector<bool> pre;
    std::vector<bool> ift;
};

inline EvalPopulation eval_population(const LeakageUniverse& u) {
    EvalPopulation pop;
    double ambient_total = 0.0;
    double eval_total = 0.0;
    for (std::size_t i = 0; i < u.docs.size(); ++i) {
        const auto& d = u.docs[i];
        if (d.eval_weight < 0.0 || d.ambient_weight < 0.0) {
            throw Error("negative weight on doc " + d.doc_id);
        }
        if (d.date <= u.tau) {
            if (d.eval_weight > 0.0) {
                throw Error("eval mass on doc " + d.doc_id +
                            " dated at or before the cutoff");
            }
            continue;
        }
        pop.idx.push_back(i);
        pop.ambient_p.push_back(d.ambient_weight);
        pop.eval_w.push_back(d.eval_weight);
        const auto it = u.predictor.find(d.doc_id);
        if (it == u.predictor.end()) {
            throw Error("no prediction for eval-eligible doc " + d.doc_id);
        }
        pop.loss.push_back(apply_loss(u.loss, d.outcome, it->second));
        pop.trained.push_back(membership_indicator(d));
        pop.pre.push_back(d.in_pretrain);
        pop.ift.push_back(d.in_ift);
        ambient_total += d.ambient_weight;
        eval_total += d.eval_weight;
    }
    if (pop.idx.empty() || ambient_total <= 0.0) {
        throw DegenerateUniverse(
            "no ambient mass on documents past the cutoff");
    }
    if (eval_total <= 0.0) {
        throw DegenerateUniverse("eval sampler has no mass");
    }
    for (auto& p : pop.ambient_p) p /= ambient_total;
    for (auto& w : pop.eval_w) w /= eval_total;
    return pop;
}

// Class masses of an indicator under both measures. Index 1 = trained.
struct ClassMass {
    double p[2] = {0.0, 0.0};
    double w[2] = {0.0, 0.0};
};

template <typename Ind>
ClassMass class_mass(const EvalPopulation& pop, const Ind& ind) {
    ClassMass m;
    for (std::size_t k = 0; k < pop.idx.size(); ++k) {
        const int v = ind[k] ? 1 : 0;
        m.p[v] += pop.ambient_p[k];
        m.w[v] += pop.eval_w[k];
    }
    return m;
}

// ratio(v) with the 0/0 regime defined as 1.
inline double class_ratio(const ClassMass& m, int v) {
    if (m.p[v] == 0.0) {
        if (m.w[v] == 0.0) return 1.0;
        throw DivisionByZero(
            "membership class with eval mass but zero ambient probability; "
            "such documents cannot be evaluated");
    }
    return m.w[v] / m.p[v];
}

inline bool stage_independent(const ClassMass& m) {
    for (int v : {0, 1}) {
        if (m.p[v] == 0.0) {
            if (m.w[v] != 0.0) return false;
            continue; // 0/0 regime counts as satisfied
        }
        if (std::fabs(m.w[v] / m.p[v] - 1.0) > 1e-12) return false;
    }
    return true;
}

} // namespace detail

struct QPair {
    double q_t = 0.0;         // Pr(trained) under the ambient distribution
    double q_t_given_d = 0.0; // Pr(trained) under the eval sampler
};

inline QPair compute_q(const LeakageUniverse& u) {
    const auto pop = detail::eval_population(u);
    const auto m = detail::class_mass(pop, pop.trained);
    return {m.p[1], m.w[1]};
}

// Per-document decomposition terms, in universe doc order.
struct DocTerm {
    std::string doc_id;
    double ambient_p = 0.0;
    double eval_w = 0.0;
    bool trained = false;
    double loss = 0.0;
    double leakage_contribution = 0.0;
};

inline std::vector<DocTerm> decomposition_terms(const LeakageUniverse& u) {
    const auto pop = detail::eval_population(u);
    const auto m = detail::class_mass(pop, pop.trained);
    const double ratio[2] = {detail::class_ratio(m, 0),
                             detail::class_ratio(m, 1)};
    std::vector<DocTerm> terms;
    terms.reserve(pop.idx.size());
    for (std::size_t k = 0; k < pop.idx.size(); ++k) {
        DocTerm t;
        t.doc_id = u.docs[pop.idx[k]].doc_id;
        t.ambient_p = pop.ambient_p[k];
        t.eval_w = pop.eval_w[k];
        t.trained = pop.trained[k];
        t.loss = pop.loss[k];
        t.leakage_contribution =
            t.ambient_p * (1.0 - ratio[t.trained ? 1 : 0]) * t.loss;
        terms.push_back(std::move(t));
    }
    return terms;
}

struct LeakageReport {
    double q_t = 0.0;
    double q_t_given_d = 0.0;
    double true_oos_loss = 0.0;
    double leakage_term = 0.0;
    double empirical_loss_mean = 0.0;
    std::int64_t mc_samples = 0;
    double mc_stderr = 0.0;

    json to_json() const {
        return {{"q_t", q_t},
                {"q_t_given_d", q_t_given_d},
                {"true_oos_loss", true_oos_loss},
                {"leakage_term", leakage_term},
                {"empirical_loss_mean", empirical_loss_mean},
                {"mc_samples", mc_samples},
                {"mc_stderr", mc_stderr}};
    }
};

// Exact enumeration of both expectations. empirical_loss_mean is filled
// with the implied expectation true_oos_loss - leakage_term; simulate()
// replaces it with a Monte-Carlo estimate.
inline LeakageReport brute_force_decomposition(const LeakageUniverse& u) {
    const auto q = compute_q(u);
    const auto terms = decomposition_terms(u);
    LeakageReport r;
    r.q_t = q.q_t;
    r.q_t_given_d = q.q_t_given_d;
    for (const auto& t : terms) {
        r.true_oos_loss += t.ambient_p * t.loss;
        r.leakage_term += t.leakage_contribution;
    }
    r.empirical_loss_mean = r.true_oos_loss - r.leakage_term;
    return r;
}

struct McResult {
    double mean = 0.0;
    double std_error = 0.0;
};

// i.i.d. draws from the eval sampler; deterministic given the seed.
inline McResult monte_carlo_loss(const LeakageUniverse& u, std::size_t n,
                                 std::uint64_t seed) {
    if (n < 1) throw Error("monte_carlo_loss: n must be at least 1");
    const auto pop = detail::eval_population(u);
    std::vector<double> cum(pop.eval_w.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < pop.eval_w.size(); ++k) {
        acc += pop.eval_w[k];
        cum[k] = acc;
    }
    cum.back() = 1.0;

    auto gen = rng::substream(seed, "leakage/monte-carlo");
    double sum = 0.0;
    double sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng::uniform01(gen);
        const auto it = std::upper_bound(cum.begin(), cum.end(), x);
        const std::size_t k = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(it - cum.begin(),
                                     static_cast<std::ptrdiff_t>(cum.size()) - 1));
        const double l = pop.loss[k];
        sum += l;
        sumsq += l * l;
    }
    McResult res;
    res.mean = sum / static_cast<double>(n);
    if (n >= 2) {
        const double nn = static_cast<double>(n);
        double var = (sumsq - nn * res.mean * res.mean) / (nn - 1.0);
        if (var < 0.0) var = 0.0; // rounding
        res.std_error = std::sqrt(var / nn);
    }
    return res;
}

// True iff the class-ratio condition holds separately for the pretraining
// and finetuning indicators. With disjoint stage corpora this implies the
// combined condition, hence a vanishing leakage term.
inline bool stagewise_sufficiency_check(const LeakageUniverse& u) {
    const auto pop = detail::eval_population(u);
    return detail::stage_independent(detail::class_mass(pop, pop.pre)) &&
           detail::stage_independent(detail::class_mass(pop, pop.ift));
}

inline LeakageReport simulate(const LeakageUniverse& u, std::size_t n,
                              std::uint64_t seed) {
    LeakageReport r = brute_force_decomposition(u);
    const auto mc = monte_carlo_loss(u, n, seed);
    r.empirical_loss_mean = mc.mean;
    r.mc_samples = static_cast<std::int64_t>(n);
    r.mc_stderr = mc.std_error;
    return r;
}

}  // namespace chronoeval::leakage
