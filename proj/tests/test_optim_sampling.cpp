#include <doctest.h>

#include <cmath>

#include "recap/optim.hpp"
#include "recap/sampling.hpp"

using namespace recap;
using namespace recap::nn;

TEST_CASE("adamw: zero grad and zero decay leave params and moments untouched") {
    auto p = ad::param("p", Tensor({1, 2}, {1.5, -0.5}));
    p->ensure_grad();
    ParamList params = {{"p", p}};
    AdamWState state;
    AdamWConfig cfg;
    cfg.weight_decay = 0;
    adamw_step(params, state, Real(0.1), cfg);
    adamw_step(params, state, Real(0.1), cfg);
    CHECK(p->value.data[0] == Real(1.5));
    CHECK(p->value.data[1] == Real(-0.5));
    for (Real m : state.m[0].data) CHECK(m == Real(0));
    for (Real v : state.v[0].data) CHECK(v == Real(0));
}

TEST_CASE("adamw first step matches the hand-computed update") {
    // theta=1, g=1, lr=0.1, wd=0.01: m_hat=1, v_hat=1,
    // theta' = 1 - 0.1*(1/(1+1e-8)) - 0.1*0.01*1 = 0.899 (approximately)
    auto p = ad::param("p", Tensor::scalar(1.0));
    p->ensure_grad();
    p->grad.data[0] = Real(1);
    ParamList params = {{"p", p}};
    AdamWState state;
    AdamWConfig cfg;
    cfg.weight_decay = Real(0.01);
    adamw_step(params, state, Real(0.1), cfg);
    CHECK(static_cast<double>(p->value.data[0]) == doctest::Approx(0.899).epsilon(1e-6));
}

TEST_CASE("adamw rejects non-finite gradients naming the parameter") {
    auto p = ad::param("theta_bad", Tensor::scalar(1.0));
    p->ensure_grad();
    p->grad.data[0] = std::numeric_limits<Real>::quiet_NaN();
    ParamList params = {{"theta_bad", p}};
    AdamWState state;
    CHECK_THROWS_WITH_AS(adamw_step(params, state, Real(0.1)),
                         doctest::Contains("theta_bad"), std::runtime_error);
}

TEST_CASE("linear schedule endpoints and midpoint") {
    CHECK(linear_lr(0, 100, Real(5e-5)) == Real(5e-5));
    CHECK(linear_lr(100, 100, Real(5e-5)) == Real(0));
    CHECK(static_cast<double>(linear_lr(50, 100, Real(5e-5))) == doctest::Approx(2.5e-5));
    CHECK_THROWS_AS(linear_lr(0, 0, Real(1)), std::invalid_argument);
    CHECK_THROWS_AS(linear_lr(11, 10, Real(1)), std::invalid_argument);
}

TEST_CASE("nucleus support: cumulative mass rule") {
    // probabilities 0.5, 0.3, 0.15, 0.05 via log-probs as logits
    std::vector<Real> logits = {static_cast<Real>(std::log(0.5)),
                                static_cast<Real>(std::log(0.3)),
                                static_cast<Real>(std::log(0.15)),
                                static_cast<Real>(std::log(0.05))};
    auto support = nucleus_support(logits, 0.8);
    REQUIRE(support.size() == 2);
    CHECK(support[0] == 0);
    CHECK(support[1] == 1);
}

TEST_CASE("nucleus p=1 keeps the full vocabulary") {
    std::vector<Real> logits = {0.0, 1.0, -1.0, 0.5};
    CHECK(nucleus_support(logits, 1.0).size() == 4);
}

TEST_CASE("nucleus is deterministic argmax when top prob covers p") {
    std::vector<Real> logits = {10.0, 0.0, 0.0};
    for (uint64_t seed = 0; seed < 10; ++seed)
        CHECK(nucleus_sample(logits, 0.5, seed) == 0);
}

TEST_CASE("nucleus sampling is deterministic given the seed") {
    std::vector<Real> logits = {1.0, 1.1, 0.9, 1.05, 0.2};
    CHECK(nucleus_sample(logits, 0.9, 1234u) == nucleus_sample(logits, 0.9, 1234u));
}

TEST_CASE("nucleus rejects bad p and non-finite logits") {
    std::vector<Real> logits = {0.0, 1.0};
    CHECK_THROWS_AS(nucleus_support(logits, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(nucleus_support(logits, 1.5), std::invalid_argument);
    std::vector<Real> bad = {0.0, std::numeric_limits<Real>::infinity()};
    CHECK_THROWS_AS(nucleus_support(bad, 0.5), std::invalid_argument);
}

TEST_CASE("nucleus samples only from the support") {
    std::vector<Real> logits = {static_cast<Real>(std::log(0.5)),
                                static_cast<Real>(std::log(0.3)),
                                static_cast<Real>(std::log(0.15)),
                                static_cast<Real>(std::log(0.05))};
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        const int tok = nucleus_sample(logits, 0.8, rng);
        CHECK(tok >= 0);
        CHECK(tok <= 1);
    }
}
