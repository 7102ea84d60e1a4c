#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "qcard/postproc.hpp"
#include "qcard/sim.hpp"
#include "test_helpers.hpp"

using namespace qcard;
using postproc::LayerKind;
using postproc::PostLayer;

namespace {

// Strictly positive entries keep every head smooth enough for central
// differences with h = 1e-6.
std::vector<double> random_probs(test_helpers::RandomStream& rnd, int count) {
    std::vector<double> p(static_cast<std::size_t>(count));
    double total = 0.0;
    for (double& v : p) {
        v = rnd.uniform(0.05, 1.0);
        total += v;
    }
    for (double& v : p) v /= total;
    return p;
}

bool near_kink(const PostLayer& layer, const std::vector<double>& probs) {
    if (layer.kind != LayerKind::Threshold &&
        layer.kind != LayerKind::ThresholdRatio) {
        return false;
    }
    return std::abs(probs[0] - layer.d) < 1e-4 || std::abs(probs[2] - layer.d) < 1e-4;
}

double eval_fd(const PostLayer& layer, std::vector<double> probs,
               std::size_t index, double h) {
    probs[index] += h;
    const double plus = postproc::eval(layer, probs);
    probs[index] -= 2.0 * h;
    const double minus = postproc::eval(layer, probs);
    return (plus - minus) / (2.0 * h);
}

double scalar_fd(PostLayer layer, const std::vector<double>& probs,
                 std::size_t index, double h) {
    layer.scalars[index] += h;
    const double plus = postproc::eval(layer, probs);
    layer.scalars[index] -= 2.0 * h;
    const double minus = postproc::eval(layer, probs);
    return (plus - minus) / (2.0 * h);
}

} // namespace

TEST_CASE("layer kind names round-trip", "[postproc]") {
    for (LayerKind kind : {LayerKind::Linear, LayerKind::Rational,
                           LayerKind::RationalLog, LayerKind::Threshold,
                           LayerKind::ThresholdRatio, LayerKind::PlaceValue,
                           LayerKind::PlaceValueNeg}) {
        REQUIRE(postproc::parse_kind(postproc::kind_name(kind)) == kind);
    }
    REQUIRE_THROWS_AS(postproc::parse_kind("quadratic"), ConfigError);
}

TEST_CASE("make_layer fills in per-kind defaults", "[postproc]") {
    REQUIRE(postproc::make_layer(LayerKind::Linear).width == 1);
    REQUIRE(postproc::make_layer(LayerKind::Linear).scalars ==
            std::vector<double>{1.0});
    REQUIRE(postproc::make_layer(LayerKind::Rational).width == 2);
    REQUIRE(postproc::make_layer(LayerKind::Rational).scalars.empty());
    REQUIRE(postproc::make_layer(LayerKind::Threshold).scalars ==
            std::vector<double>(2, 1.0));
    REQUIRE(postproc::make_layer(LayerKind::PlaceValue).width == 4);
    REQUIRE(postproc::make_layer(LayerKind::PlaceValue, 8).width == 8);
    REQUIRE(postproc::make_layer(LayerKind::PlaceValue).scalars ==
            std::vector<double>{2.0});
    REQUIRE(postproc::make_layer(LayerKind::ThresholdRatio, 0, true).scalars ==
            std::vector<double>{1.0});
}

TEST_CASE("validate rejects malformed layers", "[postproc]") {
    auto layer = postproc::make_layer(LayerKind::Linear);
    layer.width = 2;
    REQUIRE_THROWS_AS(postproc::validate(layer), ConfigError);

    layer = postproc::make_layer(LayerKind::PlaceValue);
    layer.scalars[0] = 1.0;
    REQUIRE_THROWS_AS(postproc::validate(layer), ConfigError);
    layer = postproc::make_layer(LayerKind::PlaceValue);
    layer.width = 6;
    REQUIRE_THROWS_AS(postproc::validate(layer), ConfigError);
    layer.width = 5;
    REQUIRE_THROWS_AS(postproc::validate(layer), ConfigError);

    layer = postproc::make_layer(LayerKind::Rational);
    layer.epsilon = 0.0;
    REQUIRE_THROWS_AS(postproc::validate(layer), ConfigError);

    layer = postproc::make_layer(LayerKind::Threshold);
    layer.d = 1.5;
    REQUIRE_THROWS_AS(postproc::validate(layer), ConfigError);
}

TEST_CASE("eval rejects a too-short probability vector", "[postproc]") {
    const auto layer = postproc::make_layer(LayerKind::Threshold);
    const std::vector<double> probs = {0.5, 0.5};
    REQUIRE_THROWS_AS(postproc::eval(layer, probs), UsageError);
}

TEST_CASE("linear head scales the first probability", "[postproc]") {
    auto layer = postproc::make_layer(LayerKind::Linear);
    REQUIRE(postproc::eval(layer, std::vector<double>{0.0, 1.0}) == 0.0);
    layer.scalars[0] = 20.0;
    REQUIRE(postproc::eval(layer, std::vector<double>{0.5, 0.5}) == 10.0);
    layer.scalars[0] = 7.5;
    REQUIRE(postproc::eval(layer, std::vector<double>{1.0, 0.0}) == 7.5);
}

TEST_CASE("rational head is a guarded ratio", "[postproc]") {
    const auto layer = postproc::make_layer(LayerKind::Rational);
    REQUIRE(postproc::eval(layer, std::vector<double>{0.3, 0.3}) == 1.0);
    REQUIRE(postproc::eval(layer, std::vector<double>{1.0, 0.0}) ==
            Catch::Approx((1.0 + 1e-6) / 1e-6));
}

TEST_CASE("rational head times its swap is one", "[postproc]") {
    const auto layer = postproc::make_layer(LayerKind::Rational);
    test_helpers::RandomStream rnd(7);
    for (int trial = 0; trial < 200; ++trial) {
        const auto probs = random_probs(rnd, 2);
        const std::vector<double> swapped = {probs[1], probs[0]};
        const double product =
            postproc::eval(layer, probs) * postproc::eval(layer, swapped);
        REQUIRE(product == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("rational_log head is an antisymmetric log-ratio", "[postproc]") {
    auto layer = postproc::make_layer(LayerKind::RationalLog);
    REQUIRE(postproc::eval(layer, std::vector<double>{0.4, 0.4}) == 0.0);
    test_helpers::RandomStream rnd(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto probs = random_probs(rnd, 2);
        const std::vector<double> swapped = {probs[1], probs[0]};
        REQUIRE(postproc::eval(layer, probs) ==
                Catch::Approx(-postproc::eval(layer, swapped)).margin(1e-9));
    }
    // With the guard shrunk to nothing the 2:1 ratio approaches ln 2.
    layer.epsilon = 1e-12;
    REQUIRE(postproc::eval(layer, std::vector<double>{0.2, 0.1}) ==
            Catch::Approx(std::log(2.0)).margin(1e-4));
}

TEST_CASE("threshold head is zero below the threshold", "[postproc]") {
    const auto layer = postproc::make_layer(LayerKind::Threshold);
    REQUIRE(postproc::eval(layer, std::vector<double>{0.05, 0.9, 0.03, 0.02}) ==
            0.0);
    // Only the first term is active: 0.1 * 0.5 * 2^2.
    auto scaled = layer;
    scaled.scalars = {2.0, 1.0};
    REQUIRE(postproc::eval(scaled, std::vector<double>{0.2, 0.5, 0.05, 0.25}) ==
            Catch::Approx(0.2));
}

TEST_CASE("threshold term obeys the simplex bound", "[postproc]") {
    // relu(x0 - d) * x1 is maximal at x0 - d = x1 = (1 - d) / 2 when
    // x0 + x1 <= 1; sweep a grid to confirm the closed-form cap.
    const double d = 0.1;
    const double bound = (1.0 - d) / 2.0 * ((1.0 - d) / 2.0);
    double grid_max = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double x0 = i / 1000.0;
        const double x1 = 1.0 - x0;
        const double term = std::max(x0 - d, 0.0) * x1;
        REQUIRE(term <= bound + 1e-12);
        grid_max = std::max(grid_max, term);
    }
    REQUIRE(grid_max == Catch::Approx(bound).margin(1e-3));
}

TEST_CASE("threshold_ratio head is a guarded quotient", "[postproc]") {
    const auto layer = postproc::make_layer(LayerKind::ThresholdRatio);
    REQUIRE(postproc::eval(layer, std::vector<double>{0.05, 0.9, 0.03, 0.02}) ==
            1.0);
    REQUIRE(postproc::eval(layer, std::vector<double>{0.2, 0.5, 0.2, 0.5}) ==
            Catch::Approx(1.0));
    // Denominator inactive: 1 + 0.1 * 0.5 = 1.05... over 1.
    REQUIRE(postproc::eval(layer, std::vector<double>{0.2, 0.5, 0.05, 0.25}) ==
            Catch::Approx(1.05));
    REQUIRE(postproc::eval(layer, std::vector<double>{0.3, 0.3, 0.3, 0.1}) > 0.0);
}

TEST_CASE("tied threshold_ratio reuses one scalar for both terms", "[postproc]") {
    auto tied = postproc::make_layer(LayerKind::ThresholdRatio, 0, true);
    tied.scalars = {3.0};
    auto untied = postproc::make_layer(LayerKind::ThresholdRatio);
    untied.scalars = {3.0, 3.0};
    const std::vector<double> probs = {0.4, 0.2, 0.3, 0.1};
    REQUIRE(postproc::eval(tied, probs) == postproc::eval(untied, probs));
}

TEST_CASE("place_value head weights entries by powers of the base", "[postproc]") {
    const auto layer = postproc::make_layer(LayerKind::PlaceValue);
    REQUIRE(postproc::eval(layer, std::vector<double>{1.0, 0.0, 0.0, 0.0}) == 1.0);
    REQUIRE(postproc::eval(layer, std::vector<double>{1.0, 1.0, 1.0, 1.0}) == 15.0);
    REQUIRE(postproc::eval(layer, std::vector<double>{0.0, 0.0, 0.0, 0.0}) == 0.0);
    REQUIRE(postproc::eval(layer, std::vector<double>{0.0, 0.0, 0.0, 1.0}) == 8.0);
}

TEST_CASE("place_value_neg head subtracts the upper half", "[postproc]") {
    const auto layer = postproc::make_layer(LayerKind::PlaceValueNeg);
    REQUIRE(postproc::eval(layer, std::vector<double>{0.3, 0.2, 0.3, 0.2}) == 0.0);
    REQUIRE(postproc::eval(layer, std::vector<double>{1.0, 1.0, 0.0, 0.0}) == 3.0);
    test_helpers::RandomStream rnd(13);
    for (int trial = 0; trial < 100; ++trial) {
        const auto probs = random_probs(rnd, 4);
        const std::vector<double> swapped = {probs[2], probs[3], probs[0], probs[1]};
        REQUIRE(postproc::eval(layer, probs) ==
                Catch::Approx(-postproc::eval(layer, swapped)).margin(1e-9));
    }
}

TEST_CASE("neutral outputs dominate on Haar-random states", "[postproc]") {
    // Most 4-qubit Haar states keep both threshold terms inactive, so the
    // neutral value carries more mass than any single active-value bin.
    const auto threshold = postproc::make_layer(LayerKind::Threshold);
    const auto ratio = postproc::make_layer(LayerKind::ThresholdRatio);
    const int samples = 100000;
    std::vector<double> active_t, active_r;
    int neutral_t = 0;
    int neutral_r = 0;
    for (int i = 0; i < samples; ++i) {
        const auto state = sim::haar_random_state(4, 9000 + i);
        const auto probs = sim::probabilities(state);
        const double vt = postproc::eval(threshold, probs);
        const double vr = postproc::eval(ratio, probs);
        if (vt == 0.0) ++neutral_t; else active_t.push_back(vt);
        if (vr == 1.0) ++neutral_r; else active_r.push_back(vr);
    }
    REQUIRE(neutral_t > 0);
    REQUIRE(neutral_r > 0);
    // Compare against the largest of 100 equal-width bins over the active values.
    const auto max_bin = [](std::vector<double>& values) {
        if (values.empty()) return 0;
        const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
        const double lo = *lo_it;
        const double span = std::max(*hi_it - lo, 1e-12);
        std::vector<int> bins(100, 0);
        for (double v : values) {
            const int idx = std::min(99, static_cast<int>((v - lo) / span * 100.0));
            ++bins[static_cast<std::size_t>(idx)];
        }
        return *std::max_element(bins.begin(), bins.end());
    };
    REQUIRE(neutral_t > max_bin(active_t));
    REQUIRE(neutral_r > max_bin(active_r));
}

TEST_CASE("linear and rational_log gradients match the closed forms",
          "[postproc]") {
    auto linear = postproc::make_layer(LayerKind::Linear);
    linear.scalars[0] = 4.0;
    const auto lg = postproc::grad(linear, std::vector<double>{0.3, 0.7});
    REQUIRE(lg.dx[0] == 4.0);
    REQUIRE(lg.dscalars[0] == 0.3);

    const auto rl = postproc::make_layer(LayerKind::RationalLog);
    const auto rg = postproc::grad(rl, std::vector<double>{0.25, 0.5});
    REQUIRE(rg.dx[0] == Catch::Approx(1.0 / (0.25 + 1e-6)));
    REQUIRE(rg.dx[1] == Catch::Approx(-1.0 / (0.5 + 1e-6)));
}

TEST_CASE("gradients match central finite differences", "[postproc]") {
    test_helpers::RandomStream rnd(17);
    const LayerKind kinds[] = {
        LayerKind::Linear,        LayerKind::Rational,
        LayerKind::RationalLog,   LayerKind::Threshold,
        LayerKind::ThresholdRatio, LayerKind::PlaceValue,
        LayerKind::PlaceValueNeg};
    int checked = 0;
    while (checked < 1000) {
        const LayerKind kind = kinds[rnd.uniform_int(0, 6)];
        const bool tie = kind == LayerKind::ThresholdRatio && rnd.uniform_int(0, 1) == 1;
        int width = 0;
        if (kind == LayerKind::PlaceValue || kind == LayerKind::PlaceValueNeg) {
            width = rnd.uniform_int(0, 1) == 0 ? 4 : 8;
        }
        auto layer = postproc::make_layer(kind, width, tie);
        for (double& s : layer.scalars) {
            s = (kind == LayerKind::PlaceValue || kind == LayerKind::PlaceValueNeg)
                    ? rnd.uniform(1.5, 3.0)
                    : rnd.uniform(0.5, 3.0);
        }
        const auto probs = random_probs(rnd, std::max(layer.width, 2));
        if (near_kink(layer, probs)) continue;
        const auto g = postproc::grad(layer, probs);
        REQUIRE(g.value == postproc::eval(layer, probs));
        for (std::size_t i = 0; i < g.dx.size(); ++i) {
            const double fd = eval_fd(layer, probs, i, 1e-6);
            REQUIRE(test_helpers::close(g.dx[i], fd, 1e-4, 1e-6));
        }
        for (std::size_t i = 0; i < g.dscalars.size(); ++i) {
            const double fd = scalar_fd(layer, probs, i, 1e-6);
            REQUIRE(test_helpers::close(g.dscalars[i], fd, 1e-4, 1e-6));
        }
        ++checked;
    }
}

TEST_CASE("gradient uses the zero subgradient exactly at the kink", "[postproc]") {
    const auto layer = postproc::make_layer(LayerKind::Threshold);
    const std::vector<double> probs = {0.1, 0.4, 0.1, 0.4};
    const auto g = postproc::grad(layer, probs);
    REQUIRE(g.dx[0] == 0.0);
    REQUIRE(g.dx[2] == 0.0);
}
