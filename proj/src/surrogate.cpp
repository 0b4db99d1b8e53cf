#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "tunekit/tuner.h"

namespace tunekit {

namespace {

double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); k++) {
        double d = a[k] - b[k];
        sum += d * d;
    }
    return std::sqrt(sum);
}

}  // namespace

std::size_t select_from_pool(
    std::span<const std::vector<double>> pool,
    std::span<const Observation> observations,
    const SurrogateParams& params) {
    if (pool.empty()) {
        throw Error("candidate pool is empty");
    }

    std::vector<const Observation*> ok;
    for (const auto& o : observations) {
        if (o.objective) {
            ok.push_back(&o);
        }
    }

    double sigma = 0.0;
    if (ok.size() >= 2) {
        double mean = 0.0;
        for (const auto* o : ok) {
            mean += *o->objective;
        }
        mean /= static_cast<double>(ok.size());

        double ss = 0.0;
        for (const auto* o : ok) {
            ss += (*o->objective - mean) * (*o->objective - mean);
        }
        sigma = std::sqrt(ss / static_cast<double>(ok.size() - 1));
    }

    std::size_t best = 0;
    double best_acq = std::numeric_limits<double>::infinity();
    double best_dmin = -1.0;
    std::vector<std::pair<double, std::size_t>> nearest;

    for (std::size_t c = 0; c < pool.size(); c++) {
        const auto& x = pool[c];

        double d_min = observations.empty() ? 0.0 : std::numeric_limits<double>::infinity();
        for (const auto& o : observations) {
            d_min = std::min(d_min, distance(x, o.x));
        }

        double prediction = 0.0;
        if (!ok.empty()) {
            nearest.clear();
            for (std::size_t i = 0; i < ok.size(); i++) {
                nearest.emplace_back(distance(x, ok[i]->x), i);
            }
            std::size_t k = std::min(params.neighbors, nearest.size());
            std::partial_sort(nearest.begin(), nearest.begin() + static_cast<std::ptrdiff_t>(k), nearest.end());

            double weight_sum = 0.0;
            double value_sum = 0.0;
            for (std::size_t i = 0; i < k; i++) {
                double w = 1.0 / (nearest[i].first + params.epsilon);
                weight_sum += w;
                value_sum += w * *ok[nearest[i].second]->objective;
            }
            prediction = value_sum / weight_sum;
        }

        double acq = prediction - params.beta * d_min * sigma;
        if (acq < best_acq || (acq == best_acq && d_min > best_dmin)) {
            best = c;
            best_acq = acq;
            best_dmin = d_min;
        }
    }

    return best;
}

std::optional<Configuration> surrogate_propose(
    std::span<const Evaluation> history,
    const ConfigSpace& space,
    std::uint64_t seed,
    const SurrogateParams& params) {
    if (history.empty()) {
        throw Error("surrogate model needs at least one evaluation");
    }

    std::set<PointIndex> seen;
    std::vector<Observation> observations;
    for (const auto& e : history) {
        auto point = space.point_of(e.config);
        if (!point) {
            throw Error("evaluated configuration is not part of the space: " + e.config.to_string());
        }
        seen.insert(*point);
        observations.push_back({space.normalized(*point), e.measurement.objective});
    }

    std::vector<PointIndex> pool;
    RandomSampler sampler(space, seed);
    auto is_seen = [&](const PointIndex& p) { return seen.count(p) > 0; };
    while (pool.size() < params.pool_size) {
        auto p = sampler.next_point_unless(is_seen);
        if (!p) {
            break;
        }
        pool.push_back(std::move(*p));
    }

    if (pool.empty()) {
        Enumerator e = space.enumerate();
        while (const PointIndex* p = e.next_point()) {
            if (seen.count(*p) == 0) {
                pool.push_back(*p);
                if (pool.size() == params.pool_size) {
                    break;
                }
            }
        }
    }

    if (pool.empty()) {
        return std::nullopt;
    }

    std::vector<std::vector<double>> xs;
    xs.reserve(pool.size());
    for (const auto& p : pool) {
        xs.push_back(space.normalized(p));
    }

    return space.configuration_at(pool[select_from_pool(xs, observations, params)]);
}

}  // namespace tunekit
