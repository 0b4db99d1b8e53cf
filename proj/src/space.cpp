#include "tunekit/space.h"

#include <algorithm>
#include <ostream>
#include <set>

#include "tunekit/error.h"

namespace tunekit {

std::optional<std::size_t> TunableParam::index_of(const Value& v) const {
    auto it = std::find(values.begin(), values.end(), v);
    if (it == values.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - values.begin());
}

Configuration::Configuration(std::initializer_list<Entry> entries) {
    for (const auto& [name, value] : entries) {
        insert(name, value);
    }
}

void Configuration::insert(std::string name, Value v) {
    auto it = std::lower_bound(
        entries_.begin(), entries_.end(), name, [](const Entry& e, const std::string& n) {
            return e.first < n;
        });

    if (it != entries_.end() && it->first == name) {
        it->second = std::move(v);
    } else {
        entries_.emplace(it, std::move(name), std::move(v));
    }
}

const Value* Configuration::find(std::string_view name) const {
    auto it = std::lower_bound(
        entries_.begin(), entries_.end(), name, [](const Entry& e, std::string_view n) {
            return e.first < n;
        });

    if (it != entries_.end() && it->first == name) {
        return &it->second;
    }
    return nullptr;
}

const Value& Configuration::at(std::string_view name) const {
    if (const Value* v = find(name)) {
        return *v;
    }
    throw Error("configuration has no parameter '" + std::string(name) + "'");
}

std::string Configuration::to_string() const {
    std::string out;
    for (const auto& [name, value] : entries_) {
        if (!out.empty()) {
            out += ", ";
        }
        out += name;
        out += '=';
        out += value.to_string();
    }
    return out;
}

std::ostream& operator<<(std::ostream& os, const Configuration& c) {
    return os << c.to_string();
}

nlohmann::json to_json(const Configuration& c) {
    auto j = nlohmann::json::object();
    for (const auto& [name, value] : c) {
        j[name] = to_json(value);
    }
    return j;
}

Configuration configuration_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw FormatError("configuration must be a JSON object");
    }

    Configuration c;
    for (const auto& [name, value] : j.items()) {
        c.insert(name, value_from_json(value));
    }
    return c;
}

// Binds parameter names to the values selected by a point.
class PointEnv: public Env {
  public:
    PointEnv(const ConfigSpace& space, std::span<const std::uint32_t> point) :
        space_(space),
        point_(point) {}

    const Value* find(std::string_view name) const override {
        const auto& params = space_.params_;
        auto it = std::lower_bound(
            space_.by_name_.begin(),
            space_.by_name_.end(),
            name,
            [&](std::size_t idx, std::string_view n) { return params[idx].name < n; });

        if (it == space_.by_name_.end() || params[*it].name != name) {
            return nullptr;
        }
        return &params[*it].values[point_[*it]];
    }

  private:
    const ConfigSpace& space_;
    std::span<const std::uint32_t> point_;
};

ConfigSpace::ConfigSpace(std::vector<TunableParam> params, std::vector<Expr> restrictions) :
    params_(std::move(params)),
    restrictions_(std::move(restrictions)) {
    std::set<std::string> names;

    for (const auto& p : params_) {
        if (p.name.empty()) {
            throw SpaceError("parameter name must not be empty");
        }
        if (!names.insert(p.name).second) {
            throw SpaceError("duplicate parameter '" + p.name + "'");
        }
        if (p.values.empty()) {
            throw SpaceError("parameter '" + p.name + "' has no values");
        }
        if (p.values.size() > UINT32_MAX) {
            throw SpaceError("parameter '" + p.name + "' has too many values");
        }

        for (std::size_t i = 0; i < p.values.size(); i++) {
            if (p.values[i].kind() != p.values[0].kind()) {
                throw SpaceError("parameter '" + p.name + "' mixes value types");
            }
            for (std::size_t j = 0; j < i; j++) {
                if (p.values[i] == p.values[j]) {
                    throw SpaceError(
                        "parameter '" + p.name + "' lists value " + p.values[i].to_string()
                        + " twice");
                }
            }
        }

        if (!p.index_of(p.default_value)) {
            throw SpaceError(
                "default value " + p.default_value.to_string() + " of parameter '" + p.name
                + "' is not among its values");
        }
    }

    for (const auto& r : restrictions_) {
        for (const auto& id : r.identifiers()) {
            if (names.count(id) == 0) {
                throw SpaceError(
                    "restriction '" + r.to_string() + "' references unknown parameter '" + id
                    + "'");
            }
        }
    }

    by_name_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); i++) {
        by_name_[i] = i;
    }
    std::sort(by_name_.begin(), by_name_.end(), [&](std::size_t a, std::size_t b) {
        return params_[a].name < params_[b].name;
    });
}

const TunableParam* ConfigSpace::find_param(std::string_view name) const {
    for (const auto& p : params_) {
        if (p.name == name) {
            return &p;
        }
    }
    return nullptr;
}

std::uint64_t ConfigSpace::cardinality() const {
    std::uint64_t total = 1;
    for (const auto& p : params_) {
        if (__builtin_mul_overflow(total, static_cast<std::uint64_t>(p.values.size()), &total)) {
            throw SpaceError("search space cardinality overflows 64 bits");
        }
    }
    return total;
}

std::uint64_t ConfigSpace::valid_cardinality() const {
    cardinality();  // overflow check

    std::uint64_t count = 0;
    Enumerator it(*this);
    while (it.next_point() != nullptr) {
        count++;
    }
    return count;
}

std::vector<Configuration> ConfigSpace::sample_random(std::uint64_t seed, std::size_t n) const {
    std::vector<Configuration> out;
    out.reserve(n);

    RandomSampler sampler(*this, seed);
    for (std::size_t i = 0; i < n; i++) {
        out.push_back(configuration_at(sampler.next_point()));
    }
    return out;
}

DefaultConfig ConfigSpace::default_config() const {
    DefaultConfig result;
    for (const auto& p : params_) {
        result.config.insert(p.name, p.default_value);
    }
    result.violates_restrictions = !is_valid(result.config);
    return result;
}

bool ConfigSpace::is_valid(const Configuration& config) const {
    auto point = point_of(config);
    return point && is_valid(*point);
}

bool ConfigSpace::is_valid(std::span<const std::uint32_t> point) const {
    PointEnv env(*this, point);
    for (const auto& r : restrictions_) {
        if (!evaluate(r, env).as_boolean()) {
            return false;
        }
    }
    return true;
}

Configuration ConfigSpace::configuration_at(std::span<const std::uint32_t> point) const {
    Configuration c;
    for (std::size_t i = 0; i < params_.size(); i++) {
        c.insert(params_[i].name, params_[i].values.at(point[i]));
    }
    return c;
}

std::optional<PointIndex> ConfigSpace::point_of(const Configuration& config) const {
    if (config.size() != params_.size()) {
        return std::nullopt;
    }

    PointIndex point(params_.size());
    for (std::size_t i = 0; i < params_.size(); i++) {
        const Value* v = config.find(params_[i].name);
        if (v == nullptr) {
            return std::nullopt;
        }
        auto idx = params_[i].index_of(*v);
        if (!idx) {
            return std::nullopt;
        }
        point[i] = static_cast<std::uint32_t>(*idx);
    }
    return point;
}

std::vector<double> ConfigSpace::normalized(std::span<const std::uint32_t> point) const {
    std::vector<double> x(params_.size(), 0.0);
    for (std::size_t i = 0; i < params_.size(); i++) {
        std::size_t n = params_[i].values.size();
        if (n > 1) {
            x[i] = static_cast<double>(point[i]) / static_cast<double>(n - 1);
        }
    }
    return x;
}

bool operator==(const ConfigSpace& a, const ConfigSpace& b) {
    if (a.params_.size() != b.params_.size() || a.restrictions_ != b.restrictions_) {
        return false;
    }
    for (std::size_t i = 0; i < a.params_.size(); i++) {
        const auto& x = a.params_[i];
        const auto& y = b.params_[i];
        if (x.name != y.name || x.values != y.values || x.default_value != y.default_value) {
            return false;
        }
    }
    return true;
}

Enumerator::Enumerator(const ConfigSpace& space) :
    space_(&space),
    current_(space.dimensions(), 0) {}

bool Enumerator::advance() {
    if (!started_) {
        started_ = true;
        return true;
    }

    const auto& params = space_->params();
    for (std::size_t k = params.size(); k-- > 0;) {
        if (current_[k] + 1 < params[k].values.size()) {
            current_[k]++;
            return true;
        }
        current_[k] = 0;
    }
    return false;
}

const PointIndex* Enumerator::next_point() {
    while (!done_) {
        if (!advance()) {
            done_ = true;
            break;
        }
        if (space_->is_valid(current_)) {
            return &current_;
        }
    }
    return nullptr;
}

std::optional<Configuration> Enumerator::next() {
    const PointIndex* p = next_point();
    if (p == nullptr) {
        return std::nullopt;
    }
    return space_->configuration_at(*p);
}

RandomSampler::RandomSampler(const ConfigSpace& space, std::uint64_t seed) :
    space_(&space),
    rng_(seed) {}

void RandomSampler::draw(PointIndex& out) {
    const auto& params = space_->params();
    out.resize(params.size());
    for (std::size_t k = 0; k < params.size(); k++) {
        out[k] = static_cast<std::uint32_t>(rng_.below(params[k].values.size()));
    }
}

PointIndex RandomSampler::next_point() {
    auto point = next_point_unless([](const PointIndex&) { return false; });
    if (!point) {
        throw SpaceError(
            "search space over-constrained: " + std::to_string(rejection_limit)
            + " consecutive random samples violated the restrictions");
    }
    return std::move(*point);
}

nlohmann::json to_json(const TunableParam& p) {
    auto values = nlohmann::json::array();
    for (const auto& v : p.values) {
        values.push_back(to_json(v));
    }
    return {{"name", p.name}, {"values", values}, {"default", to_json(p.default_value)}};
}

TunableParam param_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("name") || !j.contains("values")) {
        throw FormatError("parameter must be an object with 'name' and 'values'");
    }

    TunableParam p;
    p.name = j.at("name").get<std::string>();
    for (const auto& v : j.at("values")) {
        p.values.push_back(value_from_json(v));
    }
    if (j.contains("default")) {
        p.default_value = value_from_json(j.at("default"));
    } else if (!p.values.empty()) {
        p.default_value = p.values.front();
    }
    return p;
}

}  // namespace tunekit
