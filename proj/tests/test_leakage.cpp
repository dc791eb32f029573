#include <doctest.h>

#include <cmath>

#include "chronoeval/leakage_lab.hpp"
#include "test_util.hpp"

using namespace chronoeval;
using leakage::LeakageUniverse;
using leakage::UniverseDoc;

namespace {

LeakageUniverse load_fixture(const char* name) {
    return LeakageUniverse::load(testutil::fixture(name));
}

double exact_eval_loss(const LeakageUniverse& u) {
    double total = 0.0;
    double num = 0.0;
    for (const auto& d : u.docs) {
        if (d.date <= u.tau || d.eval_weight <= 0.0) continue;
        total += d.eval_weight;
        const double l =
            leakage::apply_loss(u.loss, d.outcome, u.predictor.at(d.doc_id));
        num += d.eval_weight * l;
    }
    return num / total;
}

} // namespace

TEST_CASE("membership indicator is the OR of the stage indicators") {
    UniverseDoc d;
    d.in_pretrain = true;
    d.in_ift = false;
    CHECK(leakage::membership_indicator(d));
    d.in_pretrain = false;
    CHECK_FALSE(leakage::membership_indicator(d));
    d.in_ift = true;
    CHECK(leakage::membership_indicator(d));
    d.in_pretrain = true;
    CHECK(leakage::membership_indicator(d));
}

TEST_CASE("compute_q counts membership under both measures") {
    const auto u = load_fixture("universes/independence.json");
    const auto q = leakage::compute_q(u);
    // 4 equally weighted eval-eligible docs, 2 of them trained.
    CHECK(q.q_t == 0.5);
    CHECK(q.q_t_given_d == 0.5);
}

TEST_CASE("eval sampler supported only on untrained docs gives zero conditional q") {
    auto u = load_fixture("universes/independence.json");
    for (auto& d : u.docs) {
        if (leakage::membership_indicator(d)) d.eval_weight = 0.0;
    }
    const auto q = leakage::compute_q(u);
    CHECK(q.q_t == 0.5);
    CHECK(q.q_t_given_d == 0.0);
}

TEST_CASE("search finds a non-ambient sampler whose membership counts agree") {
    // Brute-force scan over small eval-weight assignments until the two
    // weighted counts coincide while the sampler differs from ambient.
    bool found = false;
    for (int w1 = 1; w1 <= 4 && !found; ++w1) {
        for (int w2 = 1; w2 <= 4 && !found; ++w2) {
            for (int w3 = 1; w3 <= 4 && !found; ++w3) {
                for (int w4 = 1; w4 <= 4 && !found; ++w4) {
                    if (w1 == w2 && w2 == w3 && w3 == w4) continue;
                    const double tot = w1 + w2 + w3 + w4;
                    const double q_d = (w1 + w2) / tot; // docs 1,2 trained
                    if (q_d != 0.5) continue;
                    found = true;
                    auto u = load_fixture("universes/independence.json");
                    double ws[4] = {double(w1), double(w2), double(w3),
                                    double(w4)};
                    int k = 0;
                    for (auto& d : u.docs) {
                        if (d.date > u.tau) d.eval_weight = ws[k++];
                    }
                    const auto q = leakage::compute_q(u);
                    CHECK(q.q_t == 0.5);
                    CHECK(q.q_t_given_d == q.q_t);
                }
            }
        }
    }
    CHECK(found);
}

TEST_CASE("independence fixture has exactly zero leakage") {
    const auto u = load_fixture("universes/independence.json");
    const auto r = leakage::brute_force_decomposition(u);
    CHECK(r.leakage_term == 0.0);
    CHECK(r.empirical_loss_mean == r.true_oos_loss);
}

TEST_CASE("chronological universe contributes zero leakage on every doc") {
    const auto u = load_fixture("universes/chronological.json");
    CHECK(leakage::is_chronological(u));
    for (const auto& t : leakage::decomposition_terms(u)) {
        CHECK(t.leakage_contribution == 0.0);
        CHECK_FALSE(t.trained);
    }
    const auto r = leakage::brute_force_decomposition(u);
    CHECK(r.leakage_term == 0.0);
    CHECK(r.q_t == 0.0);
    CHECK(r.q_t_given_d == 0.0);
}

TEST_CASE("overlap universe matches the hand-enumerated decomposition") {
    const auto u = load_fixture("universes/overlap6.json");
    CHECK_FALSE(leakage::is_chronological(u));
    const auto r = leakage::brute_force_decomposition(u);

    // Hand enumeration. Ambient is uniform (1/6); the sampler puts mass
    // 3/12 on each trained doc and 1/12 on each untrained one, so
    // ratio(trained) = (3/4)/(1/2) = 1.5 and ratio(untrained) = 0.5.
    CHECK(r.q_t == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(r.q_t_given_d == doctest::Approx(0.75).epsilon(1e-14));

    const double expected_terms[6] = {
        (1.0 / 6.0) * (1.0 - 1.5) * 0.25,   // a: (1-1.5)^2 loss 0.25
        (1.0 / 6.0) * (1.0 - 1.5) * 0.0625, // b: (2-1.75)^2
        (1.0 / 6.0) * (1.0 - 1.5) * 0.5625, // c: (0-0.75)^2
        (1.0 / 6.0) * (1.0 - 0.5) * 2.25,   // d: (1+0.5)^2
        (1.0 / 6.0) * (1.0 - 0.5) * 1.5625, // e: (-1-0.25)^2
        (1.0 / 6.0) * (1.0 - 0.5) * 4.0,    // f: (0.5+1.5)^2
    };
    const auto terms = leakage::decomposition_terms(u);
    REQUIRE(terms.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(std::fabs(terms[i].leakage_contribution - expected_terms[i]) <
              1e-12);
    }
    // Exact rationals: leakage 37/64, true loss 139/96, eval loss 167/192.
    CHECK(std::fabs(r.leakage_term - 0.578125) < 1e-12);
    CHECK(std::fabs(r.true_oos_loss - 139.0 / 96.0) < 1e-12);
    CHECK(std::fabs(r.empirical_loss_mean - 167.0 / 192.0) < 1e-12);
    // Sign sanity: trained docs are over-sampled and better predicted, so
    // the empirical loss understates the true loss.
    CHECK(r.leakage_term > 0.0);
    CHECK(r.empirical_loss_mean < r.true_oos_loss);
}

TEST_CASE("monte carlo estimate is deterministic and matches the point mass") {
    auto u = load_fixture("universes/chronological.json");
    for (auto& d : u.docs) d.eval_weight = d.doc_id == "y3" ? 1.0 : 0.0;
    const auto one = leakage::monte_carlo_loss(u, 1, 7);
    CHECK(one.mean == 1.0); // (2 - 1)^2
    CHECK(one.std_error == 0.0);

    const auto a = leakage::monte_carlo_loss(u, 500, 123);
    const auto b = leakage::monte_carlo_loss(u, 500, 123);
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
    CHECK(a.std_error == 0.0); // degenerate sampler
}

TEST_CASE("monte carlo mean approaches the implied eval loss") {
    const auto u = load_fixture("universes/overlap6.json");
    const auto r = leakage::brute_force_decomposition(u);
    const auto mc = leakage::monte_carlo_loss(u, 100000, 42);
    CHECK(mc.std_error > 0.0);
    CHECK(std::fabs(mc.mean - (r.true_oos_loss - r.leakage_term)) <
          4.0 * mc.std_error);
}

TEST_CASE("stagewise sufficiency") {
    SUBCASE("chronological universe satisfies it in the 0/0 regime") {
        const auto u = load_fixture("universes/chronological.json");
        CHECK(leakage::stagewise_sufficiency_check(u));
    }
    SUBCASE("over-sampled finetuning docs fail the check") {
        auto u = load_fixture("universes/independence.json");
        for (auto& d : u.docs) {
            if (d.in_ift && d.date > u.tau) d.eval_weight = 3.0;
        }
        CHECK_FALSE(leakage::stagewise_sufficiency_check(u));
    }
    SUBCASE("a universe without finetuning docs treats that stage as satisfied") {
        auto u = load_fixture("universes/independence.json");
        for (auto& d : u.docs) d.in_ift = false;
        // Keep pretraining balanced: ambient and sampler stay uniform.
        CHECK(leakage::stagewise_sufficiency_check(u));
    }
}

TEST_CASE("stagewise independence forces a vanishing leakage term") {
    auto gen = rng::substream(2024, "test/stagewise");
    int checked = 0;
    for (int i = 0; i < 200; ++i) {
        const auto u = testutil::make_stagewise_independent_universe(gen);
        REQUIRE(leakage::stagewise_sufficiency_check(u));
        const auto r = leakage::brute_force_decomposition(u);
        CHECK(std::fabs(r.leakage_term) < 1e-12);
        ++checked;
    }
    CHECK(checked == 200);
}

TEST_CASE("class-proportional samplers satisfy the decomposition identity") {
    auto gen = rng::substream(99, "test/proportional");
    for (int i = 0; i < 200; ++i) {
        const auto u = testutil::make_proportional_universe(gen);
        const auto r = leakage::brute_force_decomposition(u);
        const double direct = exact_eval_loss(u);
        CHECK(std::fabs(direct - (r.true_oos_loss - r.leakage_term)) < 1e-12);
    }
}

TEST_CASE("degenerate and invalid universes are rejected") {
    SUBCASE("no docs past the cutoff") {
        LeakageUniverse u;
        u.tau = 10;
        UniverseDoc d;
        d.doc_id = "old";
        d.date = 1;
        u.docs.push_back(d);
        CHECK_THROWS_AS(leakage::compute_q(u), DegenerateUniverse);
    }
    SUBCASE("eval mass on a class without ambient probability") {
        auto u = load_fixture("universes/independence.json");
        for (auto& d : u.docs) {
            if (leakage::membership_indicator(d) && d.date > u.tau) {
                d.ambient_weight = 0.0;
            }
        }
        CHECK_THROWS_AS(leakage::brute_force_decomposition(u), DivisionByZero);
    }
    SUBCASE("eval mass before the cutoff") {
        auto u = load_fixture("universes/independence.json");
        u.docs[0].eval_weight = 1.0;
        CHECK_THROWS_AS(leakage::compute_q(u), Error);
    }
}

TEST_CASE("universe JSON round-trips") {
    const auto u = load_fixture("universes/overlap6.json");
    const auto again = LeakageUniverse::from_json(u.to_json());
    const auto a = leakage::brute_force_decomposition(u);
    const auto b = leakage::brute_force_decomposition(again);
    CHECK(a.leakage_term == b.leakage_term);
    CHECK(a.true_oos_loss == b.true_oos_loss);
}

TEST_CASE("simulate fills the monte carlo fields") {
    const auto u = load_fixture("universes/overlap6.json");
    const auto r = leakage::simulate(u, 20000, 5);
    CHECK(r.mc_samples == 20000);
    CHECK(r.mc_stderr > 0.0);
    CHECK(std::fabs(r.empirical_loss_mean -
                    (r.true_oos_loss - r.leakage_term)) < 4.0 * r.mc_stderr);
}
