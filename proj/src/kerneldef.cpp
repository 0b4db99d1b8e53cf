#include "tunekit/kerneldef.h"

#include <charconv>
#include <set>

#include "tunekit/error.h"
#include "tunekit/fs.h"

namespace tunekit {

namespace {

bool is_arg_name(std::string_view name) {
    if (name.size() < 4 || name.substr(0, 3) != "arg") {
        return false;
    }
    for (char c : name.substr(3)) {
        if (c < '0' || c > '9') {
            return false;
        }
    }
    return true;
}

bool is_problem_name(std::string_view name) {
    return name == "problem_x" || name == "problem_y" || name == "problem_z";
}

const char* axis_name(std::size_t axis) {
    static const char* names[] = {"x", "y", "z"};
    return names[axis];
}

MapEnv problem_env(const ProblemSize& problem) {
    MapEnv env;
    env.set("problem_x", problem.x());
    env.set("problem_y", problem.y());
    env.set("problem_z", problem.z());
    return env;
}

Expr parse_field(const nlohmann::json& j, const char* field) {
    if (!j.is_string()) {
        throw FormatError(std::string("'") + field + "' entries must be expression strings");
    }
    try {
        return parse_expr(j.get<std::string>());
    } catch (const ParseError& e) {
        throw FormatError(std::string("in '") + field + "': " + e.what());
    }
}

std::string value_text(const Expr& e, const Env& env, const std::string& what) {
    try {
        return evaluate(e, env).to_string();
    } catch (const EvalError& err) {
        throw EvalError(what + ": " + err.what());
    }
}

}  // namespace

KernelSource KernelSource::file(std::filesystem::path path) {
    KernelSource s;
    s.is_file_ = true;
    s.data_ = path.string();
    return s;
}

KernelSource KernelSource::inline_text(std::string text) {
    KernelSource s;
    s.is_file_ = false;
    s.data_ = std::move(text);
    return s;
}

std::string KernelSource::read() const {
    return is_file_ ? read_file(data_) : data_;
}

ProblemSize::ProblemSize(std::initializer_list<std::int64_t> extents) :
    ProblemSize(std::vector<std::int64_t>(extents)) {}

ProblemSize::ProblemSize(const std::vector<std::int64_t>& extents) {
    if (extents.empty() || extents.size() > 3) {
        throw Error("problem size must have 1 to 3 components");
    }
    dims_ = extents.size();
    for (std::size_t i = 0; i < dims_; i++) {
        extents_[i] = extents[i];
    }
}

std::string ProblemSize::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < dims_; i++) {
        if (i > 0) {
            out += ',';
        }
        out += std::to_string(extents_[i]);
    }
    return out;
}

ProblemSize ProblemSize::parse(std::string_view text) {
    std::vector<std::int64_t> parts;
    std::size_t start = 0;
    while (true) {
        auto end = text.find(',', start);
        auto token = text.substr(start, end == std::string_view::npos ? text.npos : end - start);
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
            throw Error("invalid problem size '" + std::string(text) + "'");
        }
        parts.push_back(v);
        if (end == std::string_view::npos) {
            break;
        }
        start = end + 1;
    }
    return ProblemSize(parts);
}

nlohmann::json to_json(const ProblemSize& p) {
    return p.components();
}

ProblemSize problem_from_json(const nlohmann::json& j) {
    if (!j.is_array()) {
        throw FormatError("problem size must be an array");
    }
    return ProblemSize(j.get<std::vector<std::int64_t>>());
}

ArgsEnv::ArgsEnv(const ScalarArgs& args) {
    for (const auto& [pos, v] : args) {
        values_.emplace(pos, Value(v));
    }
}

const Value* ArgsEnv::find(std::string_view name) const {
    if (!is_arg_name(name)) {
        return nullptr;
    }
    std::size_t pos = 0;
    auto digits = name.substr(3);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), pos);
    if (ec != std::errc()) {
        return nullptr;
    }
    auto it = values_.find(pos);
    return it != values_.end() ? &it->second : nullptr;
}

ProblemSize KernelDefinition::derive_problem_size(const ScalarArgs& args) const {
    ArgsEnv env(args);
    std::vector<std::int64_t> extents;

    for (std::size_t i = 0; i < problem_size_.size(); i++) {
        std::int64_t v = 0;
        try {
            v = evaluate(problem_size_[i], env).as_integer();
        } catch (const EvalError& e) {
            throw EvalError(std::string("problem size ") + axis_name(i) + ": " + e.what());
        }
        if (v <= 0) {
            throw EvalError(
                std::string("problem size ") + axis_name(i) + " must be positive, got "
                + std::to_string(v));
        }
        extents.push_back(v);
    }

    return ProblemSize(extents);
}

LaunchGeometry KernelDefinition::derive_geometry(
    const Configuration& config,
    const ProblemSize& problem,
    const ScalarArgs& args) const {
    ConfigEnv config_env(config);
    ArgsEnv args_env(args);
    MapEnv prob_env = problem_env(problem);
    ChainEnv inner(args_env, prob_env);
    ChainEnv env(config_env, inner);

    auto extent = [&](const Expr& e, const std::string& what) {
        std::int64_t v = 0;
        try {
            v = evaluate(e, env).as_integer();
        } catch (const EvalError& err) {
            throw EvalError(what + ": " + err.what());
        }
        if (v < 1) {
            throw EvalError(what + " must be at least 1, got " + std::to_string(v));
        }
        return v;
    };

    LaunchGeometry g;
    g.block = {
        extent(block_[0], "block size x"),
        extent(block_[1], "block size y"),
        extent(block_[2], "block size z")};
    g.grid = {
        extent(grid_[0], "grid size x"),
        extent(grid_[1], "grid size y"),
        extent(grid_[2], "grid size z")};

    try {
        g.shared_mem_bytes = evaluate(shared_mem_, env).as_integer();
    } catch (const EvalError& err) {
        throw EvalError(std::string("shared memory: ") + err.what());
    }
    if (g.shared_mem_bytes < 0) {
        throw EvalError("shared memory must be non-negative");
    }

    return g;
}

CompileRequest KernelDefinition::render_compile_request(const Configuration& config) const {
    ConfigEnv env(config);

    CompileRequest req;
    req.source = source_;
    req.entry_name = name_;
    req.flags = flags_;
    req.config = config;

    if (!template_args_.empty()) {
        req.entry_name += '<';
        for (std::size_t i = 0; i < template_args_.size(); i++) {
            if (i > 0) {
                req.entry_name += ',';
            }
            req.entry_name += value_text(template_args_[i], env, "template argument");
        }
        req.entry_name += '>';
    }

    for (const auto& [name, e] : defines_) {
        req.defines.push_back("-D " + name + "=" + value_text(e, env, "define " + name));
    }

    return req;
}

std::string KernelDefinition::kernel_key() const {
    auto j = to_json();
    nlohmann::json keyed = {
        {"params", j["params"]},
        {"restrictions", j["restrictions"]},
        {"defines", j["defines"]},
        {"template_args", j["template_args"]},
    };
    return name_ + "-" + hex64(fnv1a64(canonical_json(keyed)));
}

void KernelDefinition::validate() const {
    if (name_.empty()) {
        throw DefinitionError("kernel name must not be empty");
    }

    std::set<std::string> params;
    for (const auto& p : space_.params()) {
        if (is_arg_name(p.name) || is_problem_name(p.name)) {
            throw DefinitionError("parameter name '" + p.name + "' is reserved");
        }
        params.insert(p.name);
    }

    auto check = [&](const Expr& e, const std::string& where) {
        for (const auto& id : e.identifiers()) {
            if (params.count(id) == 0 && !is_arg_name(id) && !is_problem_name(id)) {
                throw DefinitionError(where + " references unknown identifier '" + id + "'");
            }
        }
    };

    if (problem_size_.empty() || problem_size_.size() > 3) {
        throw DefinitionError("problem size needs 1 to 3 expressions");
    }
    for (const auto& e : problem_size_) {
        for (const auto& id : e.identifiers()) {
            if (!is_arg_name(id)) {
                throw DefinitionError(
                    "problem size may only reference kernel arguments, found '" + id + "'");
            }
        }
    }

    for (std::size_t i = 0; i < 3; i++) {
        check(block_[i], std::string("block size ") + axis_name(i));
        check(grid_[i], std::string("grid size ") + axis_name(i));
    }
    check(shared_mem_, "shared memory");

    // Compilation sees only the configuration.
    auto check_params_only = [&](const Expr& e, const std::string& where) {
        for (const auto& id : e.identifiers()) {
            if (params.count(id) == 0) {
                throw DefinitionError(where + " may only reference tunable parameters, found '" + id + "'");
            }
        }
    };
    for (const auto& [name, e] : defines_) {
        check_params_only(e, "define " + name);
    }
    for (const auto& e : template_args_) {
        check_params_only(e, "template argument");
    }
}

nlohmann::json KernelDefinition::to_json() const {
    using nlohmann::json;

    json params = json::array();
    for (const auto& p : space_.params()) {
        params.push_back(tunekit::to_json(p));
    }

    json restrictions = json::array();
    for (const auto& r : space_.restrictions()) {
        restrictions.push_back(r.to_string());
    }

    json defines = json::object();
    for (const auto& [name, e] : defines_) {
        defines[name] = e.to_string();
    }

    auto strings = [](const auto& exprs) {
        json out = json::array();
        for (const auto& e : exprs) {
            out.push_back(e.to_string());
        }
        return out;
    };

    json j = {
        {"name", name_},
        {"params", params},
        {"restrictions", restrictions},
        {"defines", defines},
        {"template_args", strings(template_args_)},
        {"block", strings(block_)},
        {"grid", strings(grid_)},
        {"problem_size", strings(problem_size_)},
        {"shared_mem", shared_mem_.to_string()},
        {"flags", flags_},
    };

    if (source_.is_file()) {
        j["source_file"] = source_.file_path();
    } else {
        j["source_text"] = source_.text();
    }

    return j;
}

KernelDefinition KernelDefinition::from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw FormatError("kernel definition must be a JSON object");
    }

    try {
        KernelSource source;
        if (j.contains("source_text")) {
            source = KernelSource::inline_text(j.at("source_text").get<std::string>());
        } else {
            source = KernelSource::file(j.value("source_file", std::string {}));
        }

        KernelBuilder builder(j.at("name").get<std::string>(), source);

        for (const auto& p : j.value("params", nlohmann::json::array())) {
            auto param = param_from_json(p);
            builder.tune(param.name, param.values, param.default_value);
        }

        for (const auto& r : j.value("restrictions", nlohmann::json::array())) {
            builder.restriction(parse_field(r, "restrictions"));
        }

        nlohmann::json defines = j.value("defines", nlohmann::json::object());
        if (!defines.is_object()) {
            throw FormatError("'defines' must be an object");
        }
        for (const auto& [name, e] : defines.items()) {
            builder.define(name, parse_field(e, "defines"));
        }

        for (const auto& e : j.value("template_args", nlohmann::json::array())) {
            builder.template_arg(parse_field(e, "template_args"));
        }

        std::vector<Expr> problem;
        for (const auto& e : j.at("problem_size")) {
            problem.push_back(parse_field(e, "problem_size"));
        }
        if (problem.size() == 1) {
            builder.problem_size(problem[0]);
        } else if (problem.size() == 2) {
            builder.problem_size(problem[0], problem[1]);
        } else if (problem.size() == 3) {
            builder.problem_size(problem[0], problem[1], problem[2]);
        } else {
            throw FormatError("'problem_size' needs 1 to 3 expressions");
        }

        auto triple = [&](const char* field) -> std::optional<std::array<Expr, 3>> {
            if (!j.contains(field)) {
                return std::nullopt;
            }
            const auto& arr = j.at(field);
            if (!arr.is_array() || arr.size() != 3) {
                throw FormatError(std::string("'") + field + "' needs exactly 3 expressions");
            }
            return std::array<Expr, 3> {
                parse_field(arr[0], field),
                parse_field(arr[1], field),
                parse_field(arr[2], field)};
        };

        if (auto block = triple("block")) {
            builder.block_size((*block)[0], (*block)[1], (*block)[2]);
        }
        if (auto grid = triple("grid")) {
            builder.grid_size((*grid)[0], (*grid)[1], (*grid)[2]);
        }

        if (j.contains("shared_mem")) {
            builder.shared_memory(parse_field(j.at("shared_mem"), "shared_mem"));
        }

        for (const auto& flag : j.value("flags", nlohmann::json::array())) {
            builder.compiler_flag(flag.get<std::string>());
        }

        return builder.build();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed kernel definition: ") + e.what());
    } catch (const SpaceError& e) {
        throw DefinitionError(e.what());
    }
}

KernelDefinition KernelDefinition::load(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
    return from_json(j);
}

void KernelDefinition::save(const std::filesystem::path& path) const {
    write_file_atomic(path, canonical_json(to_json()) + "\n");
}

KernelBuilder::KernelBuilder(std::string name, KernelSource source) {
    def_.name_ = std::move(name);
    def_.source_ = std::move(source);
}

Expr KernelBuilder::tune(std::string name, std::vector<Value> values) {
    Value def = values.empty() ? Value() : values.front();
    return tune(std::move(name), std::move(values), std::move(def));
}

Expr KernelBuilder::tune(std::string name, std::vector<Value> values, Value default_value) {
    Expr id = Expr::identifier(name);
    params_.push_back({std::move(name), std::move(values), std::move(default_value)});
    return id;
}

KernelBuilder& KernelBuilder::restriction(Expr e) {
    restrictions_.push_back(std::move(e));
    return *this;
}

KernelBuilder& KernelBuilder::problem_size(Expr x) {
    def_.problem_size_ = {std::move(x)};
    return *this;
}

KernelBuilder& KernelBuilder::problem_size(Expr x, Expr y) {
    def_.problem_size_ = {std::move(x), std::move(y)};
    return *this;
}

KernelBuilder& KernelBuilder::problem_size(Expr x, Expr y, Expr z) {
    def_.problem_size_ = {std::move(x), std::move(y), std::move(z)};
    return *this;
}

KernelBuilder& KernelBuilder::block_size(Expr x, Expr y, Expr z) {
    def_.block_ = {std::move(x), std::move(y), std::move(z)};
    return *this;
}

KernelBuilder& KernelBuilder::grid_size(Expr x, Expr y, Expr z) {
    grid_set_ = true;
    def_.grid_ = {std::move(x), std::move(y), std::move(z)};
    return *this;
}

KernelBuilder& KernelBuilder::grid_divisors(Expr x, Expr y, Expr z) {
    return grid_size(
        ceil_div(problem(0), std::move(x)),
        ceil_div(problem(1), std::move(y)),
        ceil_div(problem(2), std::move(z)));
}

KernelBuilder& KernelBuilder::shared_memory(Expr bytes) {
    def_.shared_mem_ = std::move(bytes);
    return *this;
}

KernelBuilder& KernelBuilder::template_arg(Expr e) {
    def_.template_args_.push_back(std::move(e));
    return *this;
}

KernelBuilder& KernelBuilder::define(std::string name, Expr value) {
    for (auto& entry : def_.defines_) {
        if (entry.first == name) {
            entry.second = std::move(value);
            return *this;
        }
    }
    def_.defines_.emplace_back(std::move(name), std::move(value));
    return *this;
}

KernelBuilder& KernelBuilder::compiler_flag(std::string flag) {
    def_.flags_.push_back(std::move(flag));
    return *this;
}

KernelDefinition KernelBuilder::build() const {
    KernelDefinition def = def_;
    try {
        def.space_ = ConfigSpace(params_, restrictions_);
    } catch (const SpaceError& e) {
        throw DefinitionError(e.what());
    }

    if (!grid_set_) {
        for (std::size_t i = 0; i < 3; i++) {
            def.grid_[i] = ceil_div(problem(i), def.block_[i]);
        }
    }

    def.validate();
    return def;
}

Expr arg(std::size_t index) {
    return Expr::identifier("arg" + std::to_string(index));
}

Expr problem(std::size_t axis) {
    return Expr::identifier(std::string("problem_") + axis_name(axis));
}

}  // namespace tunekit
