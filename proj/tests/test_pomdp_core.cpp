#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <capomdp/controller.hpp>
#include <capomdp/model_io.hpp>
#include <capomdp/pomdp.hpp>
#include <cstdio>
#include <random>

using namespace capomdp;

namespace {

// Random row-stochastic model, independent of any library helper.
PomdpModel random_model(int S, int A, int O, std::uint64_t seed, double discount = 0.9) {
    PomdpModel m(S, A, O, discount);
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> e(1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int a = 0; a < A; ++a) {
        for (int s = 0; s < S; ++s) {
            double total = 0.0;
            std::vector<double> row(S);
            for (int sp = 0; sp < S; ++sp) total += row[sp] = e(rng);
            for (int sp = 0; sp < S; ++sp) m.transition(s, a, sp) = row[sp] / total;
        }
        for (int sp = 0; sp < S; ++sp) {
            double total = 0.0;
            std::vector<double> row(O);
            for (int o = 0; o < O; ++o) total += row[o] = e(rng);
            for (int o = 0; o < O; ++o) m.observation(o, sp, a) = row[o] / total;
        }
    }
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) m.reward(s, a) = u(rng);
    m.validate();
    return m;
}

}  // namespace

TEST_CASE("belief_update: perfect observation forces the posterior") {
    PomdpModel m(2, 1, 2, 0.9);
    for (int s = 0; s < 2; ++s) m.transition(s, 0, s) = 1.0;           // identity
    for (int s = 0; s < 2; ++s) m.observation(s, s, 0) = 1.0;          // o == s'
    m.validate();
    Belief b = Belief::uniform(2);
    Belief post = belief_update(m, b, 0, 1);
    CHECK(post[0] == doctest::Approx(0.0));
    CHECK(post[1] == doctest::Approx(1.0));
}

TEST_CASE("belief_update: uninformative observations leave the belief alone") {
    PomdpModel m(3, 1, 2, 0.9);
    for (int s = 0; s < 3; ++s) m.transition(s, 0, s) = 1.0;
    for (int s = 0; s < 3; ++s)
        for (int o = 0; o < 2; ++o) m.observation(o, s, 0) = 0.5;
    m.validate();
    Eigen::VectorXd p(3);
    p << 0.2, 0.3, 0.5;
    Belief post = belief_update(m, Belief(p), 0, 0);
    for (int s = 0; s < 3; ++s) CHECK(post[s] == doctest::Approx(p[s]).epsilon(1e-12));
}

TEST_CASE("belief_update matches the direct summation oracle") {
    PomdpModel m = random_model(3, 2, 2, 42);
    Eigen::VectorXd p(3);
    p << 0.2, 0.3, 0.5;
    Belief post = belief_update(m, Belief(p), 0, 1);

    // brute-force double loop
    std::vector<double> expect(3, 0.0);
    double norm = 0.0;
    for (int sp = 0; sp < 3; ++sp) {
        double pred = 0.0;
        for (int s = 0; s < 3; ++s) pred += m.transition(s, 0, sp) * p[s];
        expect[sp] = m.observation(1, sp, 0) * pred;
        norm += expect[sp];
    }
    for (int sp = 0; sp < 3; ++sp) CHECK(post[sp] == doctest::Approx(expect[sp] / norm).epsilon(1e-12));
}

TEST_CASE("belief_update: impossible observation raises") {
    PomdpModel m(2, 1, 2, 0.9);
    for (int s = 0; s < 2; ++s) m.transition(s, 0, s) = 1.0;
    // observation 1 never happens
    for (int s = 0; s < 2; ++s) m.observation(0, s, 0) = 1.0;
    m.validate();
    CHECK_THROWS_AS(belief_update(m, Belief::uniform(2), 0, 1), ZeroProbabilityObservation);
}

TEST_CASE("belief_update never returns NaN over random models") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        PomdpModel m = random_model(4, 2, 3, 1000 + trial);
        Rng brng(trial);
        Belief b = random_belief(4, brng);
        for (int a = 0; a < 2; ++a)
            for (int o = 0; o < 3; ++o) {
                try {
                    Belief post = belief_update(m, b, a, o);
                    for (int s = 0; s < 4; ++s) CHECK(std::isfinite(post[s]));
                } catch (const ZeroProbabilityObservation&) {
                    // acceptable contract
                }
            }
    }
}

TEST_CASE("best_node basics and tie-breaking") {
    FiniteStateController fsc;
    fsc.add_node(0, {0});
    fsc.values[0] = Eigen::Vector2d(1.0, 1.0);
    CHECK(best_node(fsc, Belief::uniform(2)) == 0);

    FiniteStateController two;
    two.add_node(0, {0});
    two.add_node(1, {1});
    two.values[0] = Eigen::Vector2d(1.0, 0.0);
    two.values[1] = Eigen::Vector2d(0.0, 1.0);
    Eigen::VectorXd b(2);
    b << 0.9, 0.1;
    CHECK(best_node(two, Belief(b)) == 0);

    // exact tie goes to the lower id
    two.values[1] = Eigen::Vector2d(1.0, 0.0);
    CHECK(best_node(two, Belief(b)) == 0);
}

TEST_CASE("best_node agrees with an exhaustive scan over 100 random beliefs") {
    FiniteStateController fsc;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 5; ++i) {
        fsc.add_node(0, {0, 0});
        Eigen::VectorXd v(3);
        for (int s = 0; s < 3; ++s) v[s] = u(rng);
        fsc.values[i] = v;
    }
    Rng brng(3);
    for (int t = 0; t < 100; ++t) {
        Belief b = random_belief(3, brng);
        int best = -1;
        double best_v = -1e18;
        for (int i = 0; i < 5; ++i) {
            double v = fsc.values[i].dot(b.probs());
            if (v > best_v) {
                best_v = v;
                best = i;
            }
        }
        CHECK(best_node(fsc, b) == best);
    }
}

TEST_CASE("evaluate_policy: geometric series on a self-loop") {
    const double r = 2.5, gamma = 0.9;
    PomdpModel m(3, 1, 2, gamma);
    for (int s = 0; s < 3; ++s) {
        m.transition(s, 0, s) = 1.0;
        m.reward(s, 0) = r;
        for (int o = 0; o < 2; ++o) m.observation(o, s, 0) = 0.5;
    }
    m.validate();
    FiniteStateController fsc;
    fsc.add_node(0, {0, 0});
    evaluate_policy(m, fsc);
    for (int s = 0; s < 3; ++s) CHECK(fsc.values[0][s] == doctest::Approx(r / (1 - gamma)).epsilon(1e-10));
}

TEST_CASE("evaluate_policy: two-node deterministic cycle closed form") {
    const double r0 = 1.0, r1 = -0.5, gamma = 0.95;
    PomdpModel m(2, 2, 2, gamma);
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 2; ++s) {
            m.transition(s, a, s) = 1.0;
            for (int o = 0; o < 2; ++o) m.observation(o, s, a) = 0.5;
        }
    for (int s = 0; s < 2; ++s) {
        m.reward(s, 0) = r0;
        m.reward(s, 1) = r1;
    }
    m.validate();
    FiniteStateController fsc;
    fsc.add_node(0, {1, 1});
    fsc.add_node(1, {0, 0});
    evaluate_policy(m, fsc);
    double expect0 = (r0 + gamma * r1) / (1 - gamma * gamma);
    double expect1 = (r1 + gamma * r0) / (1 - gamma * gamma);
    for (int s = 0; s < 2; ++s) {
        CHECK(fsc.values[0][s] == doctest::Approx(expect0).epsilon(1e-10));
        CHECK(fsc.values[1][s] == doctest::Approx(expect1).epsilon(1e-10));
    }
}

TEST_CASE("evaluate_policy matches truncated power iteration on a random controller") {
    PomdpModel m = random_model(4, 3, 2, 99, 0.9);
    FiniteStateController fsc;
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> pick_a(0, 2), pick_n(0, 5);
    for (int i = 0; i < 6; ++i) fsc.add_node(pick_a(rng), {0, 0});
    for (int i = 0; i < 6; ++i)
        for (int o = 0; o < 2; ++o) fsc.nodes[i].successor[o] = pick_n(rng);
    evaluate_policy(m, fsc);

    // oracle: 10,000-step truncated power iteration, independent loops
    std::vector<std::vector<double>> v(6, std::vector<double>(4, 0.0));
    for (int iter = 0; iter < 10000; ++iter) {
        std::vector<std::vector<double>> next(6, std::vector<double>(4, 0.0));
        for (int i = 0; i < 6; ++i) {
            int a = fsc.nodes[i].action;
            for (int s = 0; s < 4; ++s) {
                double acc = m.reward(s, a);
                for (int sp = 0; sp < 4; ++sp)
                    for (int o = 0; o < 2; ++o)
                        acc += m.discount() * m.transition(s, a, sp) * m.observation(o, sp, a) *
                               v[fsc.nodes[i].successor[o]][sp];
                next[i][s] = acc;
            }
        }
        v = std::move(next);
    }
    for (int i = 0; i < 6; ++i)
        for (int s = 0; s < 4; ++s) CHECK(fsc.values[i][s] == doctest::Approx(v[i][s]).epsilon(1e-6));
}

TEST_CASE("evaluate_policy result is a fixed point") {
    PomdpModel m = random_model(5, 2, 3, 123, 0.92);
    FiniteStateController fsc;
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> pick_a(0, 1), pick_n(0, 3);
    for (int i = 0; i < 4; ++i) fsc.add_node(pick_a(rng), {0, 0, 0});
    for (int i = 0; i < 4; ++i)
        for (int o = 0; o < 3; ++o) fsc.nodes[i].successor[o] = pick_n(rng);
    evaluate_policy(m, fsc);

    for (int i = 0; i < 4; ++i) {
        int a = fsc.nodes[i].action;
        for (int s = 0; s < 5; ++s) {
            double acc = m.reward(s, a);
            for (int sp = 0; sp < 5; ++sp)
                for (int o = 0; o < 3; ++o)
                    acc += m.discount() * m.transition(s, a, sp) * m.observation(o, sp, a) *
                           fsc.values[fsc.nodes[i].successor[o]][sp];
            CHECK(std::abs(acc - fsc.values[i][s]) < 1e-8);
        }
    }
}

TEST_CASE("controller value is convex piecewise-linear over beliefs") {
    FiniteStateController fsc;
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 4; ++i) {
        fsc.add_node(0, {0});
        Eigen::VectorXd v(3);
        for (int s = 0; s < 3; ++s) v[s] = u(rng);
        fsc.values[i] = v;
    }
    Rng brng(17);
    std::uniform_real_distribution<double> ul(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        Belief b1 = random_belief(3, brng);
        Belief b2 = random_belief(3, brng);
        double lam = ul(brng);
        Belief mix(Eigen::VectorXd(lam * b1.probs() + (1 - lam) * b2.probs()));
        double lhs = controller_value(fsc, mix);
        double rhs = lam * controller_value(fsc, b1) + (1 - lam) * controller_value(fsc, b2);
        CHECK(lhs <= rhs + 1e-9);
    }
}

TEST_CASE("model validation reports the offending index") {
    PomdpModel m(2, 1, 2, 0.9);
    m.transition(0, 0, 0) = 1.0;
    m.transition(1, 0, 0) = 0.7;  // row sums to 0.7
    for (int s = 0; s < 2; ++s) m.observation(0, s, 0) = 1.0;
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("(a=0, s=1)"), ModelFormatError);
}

TEST_CASE("model file round-trips and validates on load") {
    ModelFile mf;
    mf.model = random_model(3, 2, 2, 77, 0.9);
    mf.model.state_names = {"s0", "s1", "s2"};
    mf.model.action_names = {"a0", "a1"};
    mf.model.observation_names = {"o0", "o1"};
    mf.constraints.rows = {{"bandwidth", 5.0, 0.9}};
    mf.constraints.horizon_s = 1.0;
    mf.constraints.epoch_s = 0.1;
    mf.utilization = UtilizationModel(1, 2);
    mf.utilization.set(0, 0, 0.5, 0.05);
    mf.utilization.set(0, 1, 0.1, 0.01);

    std::string path = "pomdp_core_roundtrip.json";
    save_model_file(mf, path);
    ModelFile loaded = load_model_file(path);
    CHECK(loaded.model.num_states() == 3);
    CHECK(loaded.model.discount() == doctest::Approx(0.9));
    CHECK(loaded.model.transition(1, 0, 2) == doctest::Approx(mf.model.transition(1, 0, 2)));
    CHECK(loaded.utilization.mean(0, 0) == doctest::Approx(0.5));
    CHECK(loaded.constraints.rows[0].eta == doctest::Approx(0.9));
    std::remove(path.c_str());
}

TEST_CASE("discount defaults to 0.95 when the file omits it") {
    std::string path = "pomdp_core_nodiscount.json";
    {
        FILE* f = std::fopen(path.c_str(), "w");
        std::fputs(R"({
          "states": ["s0"], "actions": ["a0"], "observations": ["o0"],
          "transition": [[[1.0]]], "reward": [[0.0]], "obs_model": [[[1.0]]]
        })", f);
        std::fclose(f);
    }
    ModelFile mf = load_model_file(path);
    CHECK(mf.model.discount() == doctest::Approx(0.95));
    std::remove(path.c_str());
}

TEST_CASE("controller validation rejects open graphs") {
    FiniteStateController fsc;
    fsc.add_node(0, {0, 1});  // node 1 missing
    CHECK_THROWS_AS(fsc.validate(), ModelFormatError);
}
