#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "chronoeval/leakage_lab.hpp"
#include "chronoeval/rng.hpp"

namespace testutil {

inline std::filesystem::path fixture_dir() {
    return std::filesystem::path(CHRONOEVAL_FIXTURE_DIR);
}

inline std::filesystem::path fixture(const std::string& rel) {
    return fixture_dir() / rel;
}

// Dyadic value in {1/16, ..., 8/16}; sums of these are exact in doubles.
inline double dyadic(std::mt19937_64& gen) {
    return static_cast<double>(1 + chronoeval::rng::below(gen, 8)) / 16.0;
}

// Universe whose eval sampler distorts only the membership-class rates:
// within each class it is proportional to the ambient distribution, so the
// decomposition identity is exact.
inline chronoeval::leakage::LeakageUniverse
make_proportional_universe(std::mt19937_64& gen) {
    using namespace chronoeval;
    leakage::LeakageUniverse u;
    u.tau = 10;
    const std::size_t n = 3 + rng::below(gen, 9);
    double mass_p[2] = {0.0, 0.0};
    std::vector<int> cls(n);
    for (std::size_t i = 0; i < n; ++i) {
        leakage::UniverseDoc d;
        d.doc_id = "d" + std::to_string(i);
        d.date = 11 + static_cast<std::int64_t>(i);
        d.outcome = rng::uniform01(gen) * 4.0 - 2.0;
        const int c = static_cast<int>(rng::below(gen, 2));
        cls[i] = c;
        d.in_pretrain = c == 1 && rng::below(gen, 2) == 0;
        d.in_ift = c == 1 && !d.in_pretrain;
        d.ambient_weight = dyadic(gen);
        mass_p[c] += d.ambient_weight;
        u.docs.push_back(d);
        u.predictor[u.docs.back().doc_id] = rng::uniform01(gen) * 4.0 - 2.0;
    }
    // Target class rates for the eval sampler; a class without ambient mass
    // must also get no eval mass.
    double target[2] = {dyadic(gen), dyadic(gen)};
    for (int c : {0, 1}) {
        if (mass_p[c] == 0.0) target[c] = 0.0;
    }
    if (target[0] + target[1] == 0.0) target[cls[0]] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int c = cls[i];
        u.docs[i].eval_weight =
            mass_p[c] == 0.0
                ? 0.0
                : u.docs[i].ambient_weight * target[c] / mass_p[c];
    }
    return u;
}

// Universe with disjoint stage corpora whose eval sampler matches the
// ambient stage-class masses exactly (weights are permuted within each
// stage class), i.e. stagewise independence holds by construction.
inline chronoeval::leakage::LeakageUniverse
make_stagewise_independent_universe(std::mt19937_64& gen) {
    using namespace chronoeval;
    leakage::LeakageUniverse u;
    u.tau = 10;
    const std::size_t n = 3 + rng::below(gen, 9);
    std::vector<std::vector<std::size_t> > groups(3); // none, pre, ift
    for (std::size_t i = 0; i < n; ++i) {
        leakage::UniverseDoc d;
        d.doc_id = "d" + std::to_string(i);
        d.date = 11 + static_cast<std::int64_t>(i);
        d.outcome = rng::uniform01(gen) * 4.0 - 2.0;
        const auto g = rng::below(gen, 3);
        d.in_pretrain = g == 1;
        d.in_ift = g == 2;
        d.ambient_weight = dyadic(gen);
        groups[g].push_back(i);
        u.docs.push_back(d);
        u.predictor[u.docs.back().doc_id] = rng::uniform01(gen) * 4.0 - 2.0;
    }
    for (auto& members : groups) {
        std::vector<double> weights;
        for (auto i : members) weights.push_back(u.docs[i].ambient_weight);
        for (std::size_t k = weights.size(); k > 1; --k) {
            std::swap(weights[k - 1], weights[rng::below(gen, k)]);
        }
        for (std::size_t k = 0; k < members.size(); ++k) {
            u.docs[members[k]].eval_weight = weights[k];
        }
    }
    return u;
}

}  // namespace testutil
