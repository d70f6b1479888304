#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "rhm/clustering.hpp"
#include "rhm/rng.hpp"

using namespace rhm;

namespace {

ClusterConfig config_for(std::uint32_t k, std::uint64_t seed = 1,
                         std::uint32_t restarts = 8) {
    ClusterConfig c;
    c.k = k;
    c.cluster_seed = seed;
    c.restarts = restarts;
    return c;
}

// Checks that same-group points share a cluster id and different groups do
// not, without caring which ids were used.
bool grouping_matches(const std::vector<std::uint32_t>& assignments,
                      const std::vector<std::uint32_t>& truth,
                      std::uint32_t k) {
    std::vector<int> forward(k, -1), backward(k, -1);
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        const auto a = assignments[i], t = truth[i];
        if (forward[t] == -1 && backward[a] == -1) {
            forward[t] = static_cast<int>(a);
            backward[a] = static_cast<int>(t);
        } else if (forward[t] != static_cast<int>(a) ||
                   backward[a] != static_cast<int>(t)) {
            return false;
        }
    }
    return true;
}

std::vector<std::uint32_t> brute_best_match(
    const std::vector<std::vector<double>>& counts) {
    const std::uint32_t k = static_cast<std::uint32_t>(counts.size());
    std::vector<std::uint32_t> sigma(k), best(k);
    std::iota(sigma.begin(), sigma.end(), 0);
    double best_total = -1.0;
    do {
        double total = 0.0;
        for (std::uint32_t i = 0; i < k; ++i) total += counts[i][sigma[i]];
        if (total > best_total) {
            best_total = total;
            best = sigma;
        }
    } while (std::next_permutation(sigma.begin(), sigma.end()));
    return best;
}

double match_value(const std::vector<std::vector<double>>& counts,
                   const std::vector<std::uint32_t>& sigma) {
    double total = 0.0;
    for (std::size_t i = 0; i < sigma.size(); ++i) total += counts[i][sigma[i]];
    return total;
}

}  // namespace

TEST_CASE("kmeans with k equal to n pins every point") {
    const std::vector<std::vector<double>> points{{0, 0}, {1, 0}, {0, 1}};
    const auto result = kmeans(points, config_for(3));
    CHECK(result.inertia == 0.0);
    std::vector<bool> used(3, false);
    for (const auto a : result.assignments) {
        REQUIRE(a < 3);
        used[a] = true;
    }
    CHECK(std::all_of(used.begin(), used.end(), [](bool b) { return b; }));
}

TEST_CASE("kmeans recovers groups of identical points exactly") {
    // v groups of m copies each, the shape the recovery feeds it in the
    // infinite-sample limit.
    const std::uint32_t v = 6, m = 4, dim = 5;
    std::vector<std::vector<double>> points;
    std::vector<std::uint32_t> truth;
    SplitMix64 rng(99);
    std::vector<std::vector<double>> prototypes;
    for (std::uint32_t c = 0; c < v; ++c) {
        std::vector<double> proto(dim);
        for (auto& x : proto) x = rng.next_double();
        prototypes.push_back(proto);
        for (std::uint32_t i = 0; i < m; ++i) {
            points.push_back(proto);
            truth.push_back(c);
        }
    }
    const auto result = kmeans(points, config_for(v, 5, 16));
    CHECK(result.inertia == doctest::Approx(0.0).epsilon(1e-18));
    CHECK(grouping_matches(result.assignments, truth, v));
}

TEST_CASE("kmeans separates noisy clusters with a wide margin") {
    SplitMix64 rng(1234);
    const std::uint32_t k = 4, per = 40, dim = 3;
    std::vector<std::vector<double>> points;
    std::vector<std::uint32_t> truth;
    for (std::uint32_t c = 0; c < k; ++c)
        for (std::uint32_t i = 0; i < per; ++i) {
            std::vector<double> x(dim);
            for (std::uint32_t d = 0; d < dim; ++d)
                x[d] = 8.0 * c + (rng.next_double() - 0.5);  // gap/noise = 8
            points.push_back(std::move(x));
            truth.push_back(c);
        }
    const auto result = kmeans(points, config_for(k, 7, 16));
    CHECK(grouping_matches(result.assignments, truth, k));
}

TEST_CASE("kmeans is deterministic and thread-count invariant") {
    SplitMix64 rng(555);
    std::vector<std::vector<double>> points;
    for (int i = 0; i < 60; ++i)
        points.push_back({rng.next_double(), rng.next_double()});
    auto config = config_for(5, 11, 12);
    const auto a = kmeans(points, config);
    const auto b = kmeans(points, config);
    CHECK(a.assignments == b.assignments);
    CHECK(a.inertia == b.inertia);
    CHECK(a.best_restart == b.best_restart);
    config.threads = 4;
    const auto c = kmeans(points, config);
    CHECK(a.assignments == c.assignments);
    CHECK(a.inertia == c.inertia);
    CHECK(a.best_restart == c.best_restart);
}

TEST_CASE("kmeans inertia history never increases") {
    SplitMix64 rng(777);
    std::vector<std::vector<double>> points;
    for (int i = 0; i < 100; ++i)
        points.push_back({rng.next_double() * 3, rng.next_double() * 3});
    const auto result = kmeans(points, config_for(6, 13, 4));
    REQUIRE(!result.inertia_history.empty());
    for (std::size_t i = 1; i < result.inertia_history.size(); ++i)
        CHECK(result.inertia_history[i] <= result.inertia_history[i - 1] + 1e-12);
    CHECK(result.inertia ==
          doctest::Approx(result.inertia_history.back()).epsilon(1e-12));

    // Assignments must be nearest-center consistent on return.
    for (std::size_t i = 0; i < points.size(); ++i) {
        double own = 0.0;
        for (std::size_t d = 0; d < 2; ++d) {
            const double diff = points[i][d] - result.centers[result.assignments[i]][d];
            own += diff * diff;
        }
        for (const auto& center : result.centers) {
            double alt = 0.0;
            for (std::size_t d = 0; d < 2; ++d) {
                const double diff = points[i][d] - center[d];
                alt += diff * diff;
            }
            CHECK(own <= alt + 1e-12);
        }
    }
}

TEST_CASE("kmeans validates its inputs") {
    const std::vector<std::vector<double>> points{{0.0}, {1.0}};
    CHECK_THROWS_AS(kmeans(points, config_for(3)), std::invalid_argument);
    CHECK_THROWS_AS(kmeans({}, config_for(1)), std::invalid_argument);
    auto config = config_for(1);
    config.restarts = 0;
    CHECK_THROWS_AS(kmeans(points, config), std::invalid_argument);
    const std::vector<std::vector<double>> ragged{{0.0, 1.0}, {1.0}};
    CHECK_THROWS_AS(kmeans(ragged, config_for(2)), std::invalid_argument);
}

TEST_CASE("hungarian matches brute force on random matrices") {
    SplitMix64 rng(31337);
    for (int trial = 0; trial < 100; ++trial) {
        const std::uint32_t k = 2 + static_cast<std::uint32_t>(rng.next_below(5));
        std::vector<std::vector<double>> counts(k, std::vector<double>(k));
        for (auto& row : counts)
            for (auto& x : row)
                x = static_cast<double>(rng.next_below(50));
        const auto sigma = hungarian_match(counts);
        const auto reference = brute_best_match(counts);
        // Optima can tie; compare achieved value, not the permutation.
        CHECK(match_value(counts, sigma) ==
              doctest::Approx(match_value(counts, reference)).epsilon(1e-12));
        std::vector<bool> used(k, false);
        for (const auto c : sigma) {
            REQUIRE(c < k);
            CHECK_FALSE(used[c]);
            used[c] = true;
        }
    }
}

TEST_CASE("hungarian rejects bad matrices") {
    CHECK_THROWS_AS(hungarian_match({{1.0, 2.0}}), std::invalid_argument);
    CHECK_THROWS_AS(
        hungarian_match({{1.0, std::numeric_limits<double>::infinity()},
                         {0.0, 1.0}}),
        std::invalid_argument);
}

TEST_CASE("permuted accuracy undoes a relabeling") {
    // Truth 0..3 cycled by +1 in the predictions: a pure relabel, so the
    // matched accuracy is perfect.
    std::vector<Symbol> truth, predicted;
    for (int rep = 0; rep < 5; ++rep)
        for (Symbol c = 0; c < 4; ++c) {
            truth.push_back(c);
            predicted.push_back(static_cast<Symbol>((c + 1) % 4));
        }
    CHECK(permuted_accuracy(predicted, truth, 4) == doctest::Approx(1.0));

    // Break one position: exactly one mismatch after matching.
    predicted[0] = 2;
    CHECK(permuted_accuracy(predicted, truth, 4) ==
          doctest::Approx(19.0 / 20.0));
}

TEST_CASE("unlabeled predictions count against accuracy") {
    std::vector<Symbol> truth{0, 0, 1, 1}, predicted{0, kNoSymbol, 1, 1};
    CHECK(permuted_accuracy(predicted, truth, 2) == doctest::Approx(0.75));
    CHECK_THROWS_AS(permuted_accuracy(std::vector<Symbol>{0, 1}, truth, 2),
                    std::invalid_argument);
    const std::vector<Symbol> wide{0, 5, 1, 1};
    CHECK_THROWS_AS(permuted_accuracy(predicted, wide, 2),
                    std::invalid_argument);
}

TEST_CASE("matched accuracy of random labels sits near one over k") {
    // Null behavior the recovery metrics are judged against. Mean matched
    // accuracy for k = 4, n = 400 measured once offline: about 0.272 with
    // sigma about 0.02 over draws; the matching inflates it above 1/k.
    const std::uint32_t k = 4;
    const std::size_t n = 400;
    SplitMix64 rng(2718);
    double total = 0.0;
    const int trials = 20;
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<Symbol> truth(n), predicted(n);
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = static_cast<Symbol>(rng.next_below(k));
            predicted[i] = static_cast<Symbol>(rng.next_below(k));
        }
        total += permuted_accuracy(predicted, truth, k);
    }
    const double mean = total / trials;
    CHECK(mean > 0.25);
    CHECK(mean < 0.31);
}
