#include "rustport/buildcheck.hpp"

#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "rustport/process.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rustport::build {

namespace {

bool is_summary_message(std::string_view message) {
    return message.starts_with("aborting due to") ||
           (message.find("warning") != std::string_view::npos && message.ends_with("emitted"));
}

}  // namespace

std::vector<Diagnostic> CompileResult::errors() const {
    std::vector<Diagnostic> out;
    for (const auto& d : diagnostics) {
        if (d.level == Level::error) out.push_back(d);
    }
    return out;
}

bool is_error_code(std::string_view text) {
    if (text.size() != 5 || text[0] != 'E') return false;
    for (std::size_t i = 1; i < 5; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
    }
    return true;
}

std::vector<Diagnostic> parse_json_diagnostics(std::string_view stream) {
    std::vector<Diagnostic> out;
    std::size_t pos = 0;
    while (pos < stream.size()) {
        std::size_t eol = stream.find('\n', pos);
        std::string_view line = stream.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
        pos = eol == std::string_view::npos ? stream.size() : eol + 1;
        if (!line.starts_with("{")) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        if (j.contains("$message_type") && j["$message_type"] != "diagnostic") continue;
        std::string level = j.value("level", std::string());
        Diagnostic d;
        if (level == "error" || level.starts_with("error:")) d.level = Level::error;
        else if (level == "warning") d.level = Level::warning;
        else continue;
        d.message = j.value("message", std::string());
        if (is_summary_message(d.message)) continue;
        if (j.contains("code") && j["code"].is_object() && j["code"].contains("code") &&
            j["code"]["code"].is_string()) {
            std::string code = j["code"]["code"].get<std::string>();
            if (is_error_code(code)) d.code = code;
        }
        if (j.contains("rendered") && j["rendered"].is_string()) d.rendered = j["rendered"].get<std::string>();
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<Diagnostic> parse_diagnostics(std::string_view raw) {
    static const std::regex header(R"(^(error|warning)(?:\[(E[0-9]{4})\])?: (.*)$)");
    std::vector<Diagnostic> out;
    Diagnostic* current = nullptr;
    std::size_t pos = 0;
    while (pos < raw.size()) {
        std::size_t eol = raw.find('\n', pos);
        std::string_view line = raw.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
        std::size_t next = eol == std::string_view::npos ? raw.size() : eol + 1;
        std::string_view with_newline = raw.substr(pos, next - pos);
        pos = next;

        std::string text(line);
        if (!text.empty() && text.back() == '\r') text.pop_back();
        std::smatch m;
        if (std::regex_match(text, m, header)) {
            std::string message = m[3].str();
            if (is_summary_message(message)) {
                current = nullptr;
                continue;
            }
            Diagnostic d;
            d.level = m[1].str() == "error" ? Level::error : Level::warning;
            if (m[2].matched) d.code = m[2].str();
            d.message = std::move(message);
            d.rendered = std::string(with_newline);
            out.push_back(std::move(d));
            current = &out.back();
            continue;
        }
        if (text.starts_with("For more information about") || text.starts_with("Some errors have detailed")) {
            current = nullptr;
            continue;
        }
        if (current) current->rendered.append(with_newline);
    }
    return out;
}

std::string render_errors(std::span<const Diagnostic> diagnostics) {
    std::string out;
    for (const auto& d : diagnostics) {
        if (d.level != Level::error) continue;
        if (!d.rendered.empty()) {
            out += d.rendered;
            if (!out.ends_with('\n')) out.push_back('\n');
        } else {
            out += "error";
            if (d.code) out += "[" + *d.code + "]";
            out += ": " + d.message + "\n";
        }
    }
    return out;
}

std::vector<std::string> error_codes(std::span<const Diagnostic> diagnostics) {
    std::vector<std::string> out;
    for (const auto& d : diagnostics) {
        if (d.level == Level::error && d.code) out.push_back(*d.code);
    }
    return out;
}

CompileResult compile(std::string_view translation, const fs::path& workdir, const CompilerConfig& config) {
    std::error_code ec;
    if (fs::exists(workdir, ec) && !fs::is_empty(workdir, ec)) {
        throw std::logic_error("compile: workdir already in use: " + workdir.string());
    }
    fs::create_directories(workdir);
    {
        std::ofstream src(workdir / config.source_name, std::ios::binary | std::ios::trunc);
        if (!src) throw std::runtime_error("cannot write " + (workdir / config.source_name).string());
        src.write(translation.data(), static_cast<std::streamsize>(translation.size()));
    }

    ProcessSpec spec;
    spec.argv = config.command;
    spec.argv.insert(spec.argv.end(), {"-o", config.binary_name, config.source_name});
    spec.cwd = workdir;
    spec.wall_timeout = config.timeout;
    spec.output_cap = 64u << 20;

    ProcessResult proc = run_process(spec);
    if (!proc.launched) throw CompilerMissing(proc.stderr_text);

    CompileResult result;
    result.duration = proc.duration;
    if (proc.timed_out) {
        result.status = CompileStatus::failure;
        result.diagnostics.push_back({std::nullopt, Level::error, "compiler timeout", "error: compiler timeout\n"});
        return result;
    }

    result.diagnostics = parse_json_diagnostics(proc.stderr_text);
    if (result.diagnostics.empty() && !proc.stderr_text.empty()) {
        result.diagnostics = parse_diagnostics(proc.stderr_text);
    }

    fs::path binary = workdir / config.binary_name;
    if (proc.exited_normally() && proc.exit_code == 0 && fs::exists(binary, ec)) {
        result.status = CompileStatus::success;
        result.binary_path = binary;
        return result;
    }
    result.status = CompileStatus::failure;
    if (result.errors().empty()) {
        std::string why = proc.signal ? "compiler terminated by " + signal_name(proc.signal)
                                      : "compiler exited with status " + std::to_string(proc.exit_code);
        result.diagnostics.push_back({std::nullopt, Level::error, why, "error: " + why + "\n" + proc.stderr_text});
    }
    return result;
}

std::size_t count_unsafe_blocks(std::string_view src) {
    std::size_t count = 0;
    std::size_t i = 0;
    const std::size_t n = src.size();
    auto ident_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };

    while (i < n) {
        char c = src[i];
        if (c == '/' && i + 1 < n && src[i + 1] == '/') {
            while (i < n && src[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '*') {
            int depth = 1;
            i += 2;
            while (i < n && depth > 0) {
                if (src[i] == '/' && i + 1 < n && src[i + 1] == '*') {
                    ++depth;
                    i += 2;
                } else if (src[i] == '*' && i + 1 < n && src[i + 1] == '/') {
                    --depth;
                    i += 2;
                } else {
                    ++i;
                }
            }
            continue;
        }
        // raw strings: r"..", r#".."#, br#".."#
        if ((c == 'r' || (c == 'b' && i + 1 < n && src[i + 1] == 'r')) && (i == 0 || !ident_char(src[i - 1]))) {
            std::size_t j = i + (c == 'b' ? 2 : 1);
            std::size_t hashes = 0;
            while (j < n && src[j] == '#') {
                ++hashes;
                ++j;
            }
            if (j < n && src[j] == '"') {
                std::string terminator = "\"" + std::string(hashes, '#');
                std::size_t close = src.find(terminator, j + 1);
                i = close == std::string_view::npos ? n : close + terminator.size();
                continue;
            }
            if (hashes > 0) {  // raw identifier r#name
                i = j;
                while (i < n && ident_char(src[i])) ++i;
                continue;
            }
        }
        if (c == '"') {
            ++i;
            while (i < n && src[i] != '"') {
                if (src[i] == '\\') ++i;
                ++i;
            }
            ++i;
            continue;
        }
        if (c == '\'') {
            // char literal or lifetime
            if (i + 2 < n && src[i + 1] == '\\') {
                std::size_t close = src.find('\'', i + 2);
                i = close == std::string_view::npos ? n : close + 1;
                continue;
            }
            if (i + 2 < n && src[i + 2] == '\'') {
                i += 3;
                continue;
            }
            // multi-byte UTF-8 char literal
            if (i + 1 < n && (static_cast<unsigned char>(src[i + 1]) & 0x80)) {
                std::size_t close = src.find('\'', i + 1);
                i = close == std::string_view::npos ? n : close + 1;
                continue;
            }
            ++i;
            while (i < n && ident_char(src[i])) ++i;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t begin = i;
            while (i < n && ident_char(src[i])) ++i;
            if (src.substr(begin, i - begin) == "unsafe") ++count;
            continue;
        }
        ++i;
    }
    return count;
}

ErrorCatalogue::ErrorCatalogue()
    : entries_{
          {"E0061", "An invalid number of arguments was passed when calling a function."},
          {"E0106", "Missing lifetime specifier in a type."},
          {"E0133", "Use of unsafe code without an unsafe block."},
          {"E0252", "A name is defined multiple times in the same scope."},
          {"E0277", "A type does not implement a required trait."},
          {"E0282", "Type annotations needed because the compiler cannot infer the type."},
          {"E0284", "Overlapping implementations of a trait."},
          {"E0308", "Mismatched types."},
          {"E0369", "Binary operation cannot be applied to the given types."},
          {"E0382", "Use of moved value."},
          {"E0384", "Cannot assign twice to immutable variable."},
          {"E0425", "Cannot find value in this scope."},
          {"E0428", "Duplicate definitions with the same name."},
          {"E0432", "Unresolved import."},
          {"E0433", "Failed to resolve a path."},
          {"E0434", "Can't capture dynamic environment in a function item."},
          {"E0499", "Cannot borrow as mutable more than once at a time."},
          {"E0502", "Cannot borrow as mutable because it is also borrowed as immutable."},
          {"E0506", "Cannot assign to a variable that is borrowed."},
          {"E0530", "Use of self in a static method."},
          {"E0596", "Cannot borrow immutable item as mutable."},
          {"E0599", "No method found for the given type."},
          {"E0600", "Cannot call a non-function."},
          {"E0608", "Cannot index into a value of this type."},
          {"E0609", "Cannot access field of a primitive type."},
      } {}

const ErrorCatalogue& ErrorCatalogue::standard() {
    static const ErrorCatalogue catalogue;
    return catalogue;
}

std::optional<std::string_view> ErrorCatalogue::describe(std::string_view code) const {
    auto it = entries_.find(code);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

CodeTally tally_codes(std::span<const Diagnostic> diagnostics, const ErrorCatalogue& catalogue) {
    CodeTally tally;
    for (const auto& d : diagnostics) {
        if (d.level != Level::error) continue;
        if (!d.code) {
            ++tally.uncoded;
        } else if (catalogue.contains(*d.code)) {
            ++tally.known[*d.code];
        } else {
            ++tally.unknown[*d.code];
        }
    }
    return tally;
}

}  // namespace rustport::build
