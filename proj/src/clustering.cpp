#include "rhm/clustering.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "rhm/rng.hpp"

namespace rhm {
namespace {

double dist2(const std::vector<double>& a, const std::vector<double>& b) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        d2 += d * d;
    }
    return d2;
}

struct Restart {
    std::vector<std::uint32_t> assignments;
    std::vector<std::vector<double>> centers;
    double inertia = 0.0;
    std::uint32_t iterations = 0;
    std::vector<double> history;
};

void assign_nearest(const std::vector<std::vector<double>>& points,
                    const std::vector<std::vector<double>>& centers,
                    std::vector<std::uint32_t>& assignments, double& inertia) {
    inertia = 0.0;
    for (std::size_t p = 0; p < points.size(); ++p) {
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t who = 0;
        for (std::uint32_t c = 0; c < centers.size(); ++c) {
            const double d2 = dist2(points[p], centers[c]);
            if (d2 < best) {
                best = d2;
                who = c;
            }
        }
        assignments[p] = who;
        inertia += best;
    }
}

Restart run_restart(const std::vector<std::vector<double>>& points,
                    const ClusterConfig& cfg, std::uint32_t restart) {
    const std::size_t n = points.size();
    const std::uint32_t k = cfg.k;
    SplitMix64 rng(derive_stream(cfg.cluster_seed, restart));

    Restart out;
    out.centers.reserve(k);
    std::vector<char> is_center(n, 0);

    // Greedy seeding: first uniform, then proportional to squared distance
    // from the chosen set. Coincident points leave zero weight; fall back to
    // the lowest unused index.
    {
        const std::size_t first = rng.next_below(n);
        out.centers.push_back(points[first]);
        is_center[first] = 1;
        std::vector<double> d2(n);
        for (std::size_t p = 0; p < n; ++p) d2[p] = dist2(points[p], out.centers[0]);
        while (out.centers.size() < k) {
            double total = 0.0;
            for (double w : d2) total += w;
            std::size_t pick = n;
            if (total > 0.0) {
                const double u = rng.next_double() * total;
                double cum = 0.0;
                for (std::size_t p = 0; p < n; ++p) {
                    cum += d2[p];
                    if (u < cum) {
                        pick = p;
                        break;
                    }
                }
                if (pick == n) {  // u landed on the total: last positive weight
                    for (std::size_t p = n; p-- > 0;)
                        if (d2[p] > 0.0) {
                            pick = p;
                            break;
                        }
                }
            }
            if (pick == n) {
                for (std::size_t p = 0; p < n; ++p)
                    if (!is_center[p]) {
                        pick = p;
                        break;
                    }
            }
            out.centers.push_back(points[pick]);
            is_center[pick] = 1;
            for (std::size_t p = 0; p < n; ++p)
                d2[p] = std::min(d2[p], dist2(points[p], out.centers.back()));
        }
    }

    out.assignments.resize(n);
    double inertia;
    assign_nearest(points, out.centers, out.assignments, inertia);
    out.history.push_back(inertia);

    const std::size_t dim = points[0].size();
    std::vector<std::uint32_t> previous = out.assignments;
    for (std::uint32_t iter = 1; iter <= cfg.max_iters; ++iter) {
        // Means of the assigned points.
        std::vector<std::size_t> sizes(k, 0);
        for (auto& c : out.centers) std::fill(c.begin(), c.end(), 0.0);
        for (std::size_t p = 0; p < n; ++p) {
            ++sizes[out.assignments[p]];
            for (std::size_t i = 0; i < dim; ++i)
                out.centers[out.assignments[p]][i] += points[p][i];
        }
        for (std::uint32_t c = 0; c < k; ++c)
            if (sizes[c] > 0)
                for (std::size_t i = 0; i < dim; ++i)
                    out.centers[c][i] /= static_cast<double>(sizes[c]);

        // Empty clusters grab the point farthest from its own center.
        for (std::uint32_t c = 0; c < k; ++c) {
            if (sizes[c] > 0) continue;
            double far = -1.0;
            std::size_t who = 0;
            for (std::size_t p = 0; p < n; ++p) {
                if (sizes[out.assignments[p]] <= 1) continue;
                const double d2 = dist2(points[p], out.centers[out.assignments[p]]);
                if (d2 > far) {
                    far = d2;
                    who = p;
                }
            }
            --sizes[out.assignments[who]];
            out.assignments[who] = c;
            sizes[c] = 1;
            out.centers[c] = points[who];
        }

        const double before = out.history.back();
        assign_nearest(points, out.centers, out.assignments, inertia);
        out.history.push_back(inertia);
        out.iterations = iter;
        if (out.assignments == previous) break;
        previous = out.assignments;
        if (before - inertia <= cfg.tol * std::max(before, 1e-300)) break;
    }
    out.inertia = out.history.back();
    return out;
}

}  // namespace

ClusterResult kmeans(const std::vector<std::vector<double>>& points,
                     const ClusterConfig& cfg) {
    if (cfg.k < 1) throw std::invalid_argument("k must be at least 1");
    if (points.size() < cfg.k)
        throw std::invalid_argument("fewer points than clusters");
    if (cfg.restarts < 1) throw std::invalid_argument("need at least one restart");
    for (const auto& p : points)
        if (p.size() != points[0].size())
            throw std::invalid_argument("points have mixed dimension");

    std::vector<Restart> results(cfg.restarts);
    if (cfg.threads <= 1 || cfg.restarts == 1) {
        for (std::uint32_t r = 0; r < cfg.restarts; ++r)
            results[r] = run_restart(points, cfg, r);
    } else {
        const unsigned n = std::min<unsigned>(cfg.threads, cfg.restarts);
        std::vector<std::thread> pool;
        pool.reserve(n);
        for (unsigned t = 0; t < n; ++t) {
            pool.emplace_back([&, t] {
                for (std::uint32_t r = t; r < cfg.restarts; r += n)
                    results[r] = run_restart(points, cfg, r);
            });
        }
        for (auto& th : pool) th.join();
    }

    std::uint32_t best = 0;
    for (std::uint32_t r = 1; r < cfg.restarts; ++r)
        if (results[r].inertia < results[best].inertia) best = r;

    ClusterResult out;
    out.assignments = std::move(results[best].assignments);
    out.centers = std::move(results[best].centers);
    out.inertia = results[best].inertia;
    out.best_restart = best;
    out.iterations = results[best].iterations;
    out.inertia_history = std::move(results[best].history);
    return out;
}

std::vector<std::uint32_t> hungarian_match(
    const std::vector<std::vector<double>>& counts) {
    const std::size_t n = counts.size();
    if (n == 0) throw std::invalid_argument("empty matrix");
    for (const auto& row : counts) {
        if (row.size() != n) throw std::invalid_argument("matrix must be square");
        for (double x : row)
            if (!std::isfinite(x)) throw std::invalid_argument("non-finite entry");
    }

    // Kuhn-Munkres with potentials on the negated matrix (maximize trace).
    const double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = -counts[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<std::uint32_t> sigma(n, 0);
    for (std::size_t j = 1; j <= n; ++j)
        sigma[p[j] - 1] = static_cast<std::uint32_t>(j - 1);
    return sigma;
}

double permuted_accuracy(std::span<const Symbol> predicted,
                         std::span<const Symbol> truth, std::uint32_t k) {
    if (predicted.size() != truth.size())
        throw std::invalid_argument("sequence length mismatch");
    if (predicted.empty()) throw std::invalid_argument("empty sequences");
    if (k < 1) throw std::invalid_argument("k must be at least 1");

    std::vector<std::vector<double>> confusion(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (truth[i] >= k) throw std::invalid_argument("truth label out of range");
        if (predicted[i] == kNoSymbol) continue;  // counted, never matches
        if (predicted[i] >= k)
            throw std::invalid_argument("predicted label out of range");
        confusion[predicted[i]][truth[i]] += 1.0;
    }
    const auto sigma = hungarian_match(confusion);
    double matched = 0.0;
    for (std::uint32_t c = 0; c < k; ++c) matched += confusion[c][sigma[c]];
    return matched / static_cast<double>(predicted.size());
}

}  // namespace rhm
