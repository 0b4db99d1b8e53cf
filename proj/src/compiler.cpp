#include <unistd.h>

#include <fstream>
#include <thread>

#include "tunekit/backend.h"
#include "tunekit/fs.h"

namespace tunekit {

namespace {

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) {
            out += ' ';
        }
        out += p;
    }
    return out;
}

}  // namespace

std::string substitute_placeholders(
    const std::string& text,
    const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t pos = 0;

    while (pos < text.size()) {
        std::size_t open = text.find('{', pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }

        out.append(text, pos, open - pos);
        std::size_t close = text.find('}', open + 1);
        if (close == std::string::npos) {
            out.append(text, open, std::string::npos);
            break;
        }

        auto it = values.find(text.substr(open + 1, close - open - 1));
        if (it != values.end()) {
            out += it->second;
            pos = close + 1;
        } else {
            out += '{';
            pos = open + 1;
        }
    }

    return out;
}

ExecutableHandle MockCompiler::compile(const CompileRequest& request, const DeviceIdent& device) {
    (void)device;
    std::uint64_t id = ++invocations_;

    if (delay_.count() > 0) {
        std::this_thread::sleep_for(delay_);
    }

    {
        std::lock_guard lock(mutex_);
        requests_.push_back(request);
    }

    if (fail_when_ && fail_when_(request)) {
        throw CompileError(
            "compilation of " + request.entry_name + " failed",
            "mock compiler rejected configuration: " + request.config.to_string());
    }

    ExecutableHandle handle;
    handle.id = id;
    handle.request = request;
    return handle;
}

std::vector<CompileRequest> MockCompiler::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

SubprocessCompiler::SubprocessCompiler(std::string command_template, std::filesystem::path work_dir) :
    template_(std::move(command_template)),
    work_dir_(std::move(work_dir)) {}

std::string SubprocessCompiler::render_command(
    const CompileRequest& request,
    const std::string& source_path,
    const std::string& output_path) const {
    std::vector<std::string> flags = request.defines;
    flags.insert(flags.end(), request.flags.begin(), request.flags.end());

    return substitute_placeholders(
        template_,
        {
            {"SOURCE", source_path},
            {"OUTPUT", output_path},
            {"FLAGS", join(flags)},
            {"ENTRY", request.entry_name},
        });
}

ExecutableHandle SubprocessCompiler::compile(const CompileRequest& request, const DeviceIdent& device) {
    (void)device;
    std::filesystem::create_directories(work_dir_);

    std::uint64_t id = ++counter_;
    std::string stem = "kernel_" + std::to_string(::getpid()) + "_" + std::to_string(id);
    auto source_path = work_dir_ / (stem + ".src");
    auto output_path = work_dir_ / (stem + ".out");

    write_file_atomic(source_path, request.source.read());

    std::string command = render_command(request, source_path.string(), output_path.string());
    CommandResult result = run_command(command);

    if (result.exit_code != 0) {
        throw CompileError(
            "compilation of " + request.entry_name + " failed (exit status "
                + std::to_string(result.exit_code) + ")",
            result.output);
    }

    ExecutableHandle handle;
    handle.id = id;
    handle.request = request;
    handle.artifact = output_path;
    handle.diagnostics = std::move(result.output);
    return handle;
}

}  // namespace tunekit
