#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tunekit/expr.h"
#include "tunekit/rng.h"

namespace tunekit {

struct TunableParam {
    std::string name;
    std::vector<Value> values;
    Value default_value;

    std::optional<std::size_t> index_of(const Value& v) const;
};

// One point of a search space: a value per parameter, kept sorted by name.
class Configuration {
  public:
    using Entry = std::pair<std::string, Value>;

    Configuration() = default;
    Configuration(std::initializer_list<Entry> entries);

    // Inserts or replaces.
    void insert(std::string name, Value v);

    const Value* find(std::string_view name) const;
    // Throws Error if absent.
    const Value& at(std::string_view name) const;

    std::size_t size() const {
        return entries_.size();
    }

    bool empty() const {
        return entries_.empty();
    }

    auto begin() const {
        return entries_.begin();
    }

    auto end() const {
        return entries_.end();
    }

    // `block_x=256, tile_x=1, ...`
    std::string to_string() const;

    friend bool operator==(const Configuration&, const Configuration&) = default;
    friend auto operator<=>(const Configuration&, const Configuration&) = default;

  private:
    std::vector<Entry> entries_;
};

std::ostream& operator<<(std::ostream& os, const Configuration& c);

nlohmann::json to_json(const Configuration& c);
Configuration configuration_from_json(const nlohmann::json& j);

// Exposes a configuration's values to expressions.
class ConfigEnv: public Env {
  public:
    explicit ConfigEnv(const Configuration& config) : config_(config) {}

    const Value* find(std::string_view name) const override {
        return config_.find(name);
    }

  private:
    const Configuration& config_;
};

using PointIndex = std::vector<std::uint32_t>;

class ConfigSpace;

/**
 * Streams restriction-satisfying points in index-lexicographic order, the
 * last parameter varying fastest.
 */
class Enumerator {
  public:
    explicit Enumerator(const ConfigSpace& space);

    // Next valid point, or nullptr when exhausted. The pointer stays valid
    // until the following call.
    const PointIndex* next_point();

    std::optional<Configuration> next();

  private:
    bool advance();

    const ConfigSpace* space_;
    PointIndex current_;
    bool started_ = false;
    bool done_ = false;
};

// Draws independent uniform indices per parameter and rejects points that
// violate a restriction.
class RandomSampler {
  public:
    static constexpr std::size_t rejection_limit = 10'000;

    RandomSampler(const ConfigSpace& space, std::uint64_t seed);

    // Throws SpaceError after `rejection_limit` consecutive rejections.
    PointIndex next_point();

    // Like next_point() but additionally rejects points for which
    // `reject(point)` is true; returns nullopt instead of throwing.
    template<typename F>
    std::optional<PointIndex> next_point_unless(F&& reject);

    SplitMix64& rng() {
        return rng_;
    }

  private:
    void draw(PointIndex& out);

    const ConfigSpace* space_;
    SplitMix64 rng_;
};

struct DefaultConfig {
    Configuration config;
    // Set when the declared defaults break a restriction.
    bool violates_restrictions = false;
};

/**
 * Named tunable parameters with ordered value lists plus conjunctive
 * boolean restrictions. Immutable once constructed.
 */
class ConfigSpace {
  public:
    ConfigSpace() = default;

    // Validates names, value lists, defaults and restriction identifiers.
    ConfigSpace(std::vector<TunableParam> params, std::vector<Expr> restrictions = {});

    const std::vector<TunableParam>& params() const {
        return params_;
    }

    const std::vector<Expr>& restrictions() const {
        return restrictions_;
    }

    std::size_t dimensions() const {
        return params_.size();
    }

    const TunableParam* find_param(std::string_view name) const;

    // Product of value-list lengths, ignoring restrictions. Throws on overflow.
    std::uint64_t cardinality() const;

    // Number of points satisfying every restriction, by enumeration.
    std::uint64_t valid_cardinality() const;

    Enumerator enumerate() const {
        return Enumerator(*this);
    }

    std::vector<Configuration> sample_random(std::uint64_t seed, std::size_t n) const;

    DefaultConfig default_config() const;

    bool is_valid(const Configuration& config) const;
    bool is_valid(std::span<const std::uint32_t> point) const;

    Configuration configuration_at(std::span<const std::uint32_t> point) const;

    // nullopt if a parameter is missing, unknown, or its value is not listed.
    std::optional<PointIndex> point_of(const Configuration& config) const;

    // x_k = i_k / (n_k - 1), or 0 for single-valued parameters.
    std::vector<double> normalized(std::span<const std::uint32_t> point) const;

    friend bool operator==(const ConfigSpace&, const ConfigSpace&);

  private:
    friend class PointEnv;

    std::vector<TunableParam> params_;
    std::vector<Expr> restrictions_;
    // Parameter indices sorted by name, for lookups from expressions.
    std::vector<std::size_t> by_name_;
};

template<typename F>
std::optional<PointIndex> RandomSampler::next_point_unless(F&& reject) {
    PointIndex point;
    for (std::size_t attempt = 0; attempt < rejection_limit; attempt++) {
        draw(point);
        if (space_->is_valid(point) && !reject(point)) {
            return point;
        }
    }
    return std::nullopt;
}

nlohmann::json to_json(const TunableParam& p);
TunableParam param_from_json(const nlohmann::json& j);

}  // namespace tunekit
