#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tunekit/expr.h"
#include "tunekit/space.h"

namespace tunekit {

// Kernel source handed opaquely to a compiler: inline text or a file path.
class KernelSource {
  public:
    KernelSource() = default;

    static KernelSource file(std::filesystem::path path);
    static KernelSource inline_text(std::string text);

    bool is_file() const {
        return is_file_;
    }

    const std::string& file_path() const {
        return data_;
    }

    const std::string& text() const {
        return data_;
    }

    // Contents; reads the file for file sources.
    std::string read() const;

    friend bool operator==(const KernelSource&, const KernelSource&) = default;

  private:
    bool is_file_ = true;
    std::string data_;
};

// Workload extent with 1 to 3 components; absent components read as 1.
class ProblemSize {
  public:
    ProblemSize() = default;
    ProblemSize(std::initializer_list<std::int64_t> extents);
    explicit ProblemSize(const std::vector<std::int64_t>& extents);

    std::size_t dims() const {
        return dims_;
    }

    std::int64_t operator[](std::size_t i) const {
        return extents_[i];
    }

    std::int64_t x() const {
        return extents_[0];
    }

    std::int64_t y() const {
        return extents_[1];
    }

    std::int64_t z() const {
        return extents_[2];
    }

    std::vector<std::int64_t> components() const {
        return {extents_.begin(), extents_.begin() + static_cast<std::ptrdiff_t>(dims_)};
    }

    // `256,256,256`
    std::string to_string() const;
    // Parses `X[,Y[,Z]]`.
    static ProblemSize parse(std::string_view text);

    friend bool operator==(const ProblemSize&, const ProblemSize&) = default;
    friend auto operator<=>(const ProblemSize&, const ProblemSize&) = default;

  private:
    std::size_t dims_ = 1;
    std::array<std::int64_t, 3> extents_ = {1, 1, 1};
};

nlohmann::json to_json(const ProblemSize& p);
ProblemSize problem_from_json(const nlohmann::json& j);

struct Dim3 {
    std::int64_t x = 1;
    std::int64_t y = 1;
    std::int64_t z = 1;

    friend bool operator==(const Dim3&, const Dim3&) = default;
};

struct LaunchGeometry {
    Dim3 block;
    Dim3 grid;
    std::int64_t shared_mem_bytes = 0;

    friend bool operator==(const LaunchGeometry&, const LaunchGeometry&) = default;
};

struct CompileRequest {
    KernelSource source;
    // Kernel name with template arguments substituted, e.g. `vector_add<128>`.
    std::string entry_name;
    // `-D name=value`, in declaration order.
    std::vector<std::string> defines;
    std::vector<std::string> flags;
    // The configuration the request was rendered for.
    Configuration config;

    friend bool operator==(const CompileRequest&, const CompileRequest&) = default;
};

// Integer scalar kernel arguments by position in the launch signature;
// position N is visible to expressions as `argN`.
using ScalarArgs = std::map<std::size_t, std::int64_t>;

class ArgsEnv: public Env {
  public:
    explicit ArgsEnv(const ScalarArgs& args);
    const Value* find(std::string_view name) const override;

  private:
    std::map<std::size_t, Value> values_;
};

class KernelBuilder;

/**
 * A tunable kernel: its configuration space, how to compile it for a
 * configuration, and how launch geometry follows from the arguments.
 */
class KernelDefinition {
  public:
    KernelDefinition() = default;

    const std::string& name() const {
        return name_;
    }

    const KernelSource& source() const {
        return source_;
    }

    const ConfigSpace& space() const {
        return space_;
    }

    const std::vector<std::pair<std::string, Expr>>& defines() const {
        return defines_;
    }

    const std::vector<Expr>& template_args() const {
        return template_args_;
    }

    const std::vector<std::string>& flags() const {
        return flags_;
    }

    const std::vector<Expr>& problem_size_exprs() const {
        return problem_size_;
    }

    const std::array<Expr, 3>& block_exprs() const {
        return block_;
    }

    const std::array<Expr, 3>& grid_exprs() const {
        return grid_;
    }

    const Expr& shared_mem_expr() const {
        return shared_mem_;
    }

    // Evaluates the problem-size expressions; every component must be > 0.
    ProblemSize derive_problem_size(const ScalarArgs& args) const;

    // Evaluates block, grid and shared memory under config, args and problem.
    LaunchGeometry derive_geometry(
        const Configuration& config,
        const ProblemSize& problem,
        const ScalarArgs& args = {}) const;

    CompileRequest render_compile_request(const Configuration& config) const;

    // Kernel name plus a hash of everything that changes what gets tuned
    // (parameters, restrictions, defines, template arguments).
    std::string kernel_key() const;

    nlohmann::json to_json() const;
    static KernelDefinition from_json(const nlohmann::json& j);

    static KernelDefinition load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    friend bool operator==(const KernelDefinition&, const KernelDefinition&) = default;

  private:
    friend class KernelBuilder;

    void validate() const;

    std::string name_;
    KernelSource source_;
    ConfigSpace space_;
    std::vector<std::pair<std::string, Expr>> defines_;
    std::vector<Expr> template_args_;
    std::vector<std::string> flags_;
    std::vector<Expr> problem_size_;
    std::array<Expr, 3> block_ = {Expr(1), Expr(1), Expr(1)};
    std::array<Expr, 3> grid_ = {Expr(1), Expr(1), Expr(1)};
    Expr shared_mem_ = Expr(0);
};

/**
 * Programmatic construction of a KernelDefinition:
 *
 *     KernelBuilder builder("vector_add", KernelSource::file("vector_add.cu"));
 *     auto bs = builder.tune("block_size", {32, 64, 128, 256, 1024});
 *     builder.problem_size(arg(3)).template_args(bs).block_size(bs);
 *     KernelDefinition def = builder.build();
 *
 * Unless grid_size() or grid_divisors() is called, the grid is
 * `ceil_div(problem_i, block_i)` per axis.
 */
class KernelBuilder {
  public:
    KernelBuilder(std::string name, KernelSource source);

    // Declares a parameter; the default is the first value unless given.
    Expr tune(std::string name, std::vector<Value> values);
    Expr tune(std::string name, std::vector<Value> values, Value default_value);

    KernelBuilder& restriction(Expr e);
    KernelBuilder& problem_size(Expr x);
    KernelBuilder& problem_size(Expr x, Expr y);
    KernelBuilder& problem_size(Expr x, Expr y, Expr z);
    KernelBuilder& block_size(Expr x, Expr y = 1, Expr z = 1);
    KernelBuilder& grid_size(Expr x, Expr y = 1, Expr z = 1);
    KernelBuilder& grid_divisors(Expr x, Expr y = 1, Expr z = 1);
    KernelBuilder& shared_memory(Expr bytes);

    template<typename... Args>
    KernelBuilder& template_args(Args&&... args) {
        (template_arg(Expr(std::forward<Args>(args))), ...);
        return *this;
    }

    KernelBuilder& template_arg(Expr e);
    KernelBuilder& define(std::string name, Expr value);
    KernelBuilder& compiler_flag(std::string flag);

    // Throws DefinitionError when the definition is inconsistent.
    KernelDefinition build() const;

  private:
    KernelDefinition def_;
    std::vector<TunableParam> params_;
    std::vector<Expr> restrictions_;
    bool grid_set_ = false;
};

// `argN` as an expression.
Expr arg(std::size_t index);
// `problem_x`, `problem_y`, `problem_z`.
Expr problem(std::size_t axis);

}  // namespace tunekit
