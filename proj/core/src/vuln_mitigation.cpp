#include "rustport/vuln_mitigation.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include "rustport/process.hpp"

namespace fs = std::filesystem;

namespace rustport::vuln {

namespace {

std::string lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool contains(std::string_view hay, std::string_view needle) { return hay.find(needle) != std::string_view::npos; }

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

struct Pair {
    VulnType type;
    std::string_view key;
};

// Longer, more specific phrases first.
constexpr Pair kPatterns[] = {
    {VulnType::invalid_free, "invalid pointer freed"},
    {VulnType::misaligned_access, "misaligned"},
    {VulnType::invalidated_object, "invalidated dynamic object"},
    {VulnType::forgotten_memory, "forgotten memory"},
    {VulnType::null_deref, "null pointer"},
    {VulnType::invalid_pointer, "invalid pointer"},
    {VulnType::vla_overflow, "vla array size"},
    {VulnType::array_bounds, "array bounds"},
    {VulnType::buffer_overflow, "buffer overflow"},
    {VulnType::div_by_zero, "division by zero"},
    {VulnType::arithmetic_overflow, "arithmetic overflow"},
    {VulnType::arithmetic_overflow, "overflow on"},
};

bool is_input_line(std::string_view line) {
    return contains(line, "scanf") || contains(line, "getchar") || contains(line, "fgets") ||
           contains(line, "getc(");
}

std::string render(const exec::Termination& t) {
    if (t.timed_out) return "timeout";
    if (t.output_overflow) return "output limit exceeded";
    if (t.signal != 0) return "signal " + signal_name(t.signal);
    return "exit " + std::to_string(t.exit_code);
}

bool sanitizer_text(std::string_view err) {
    return contains(err, "ERROR: AddressSanitizer") || contains(err, "runtime error:") ||
           contains(err, "ERROR: LeakSanitizer");
}

Behavior run_one(const fs::path& binary, const std::string& input, const exec::ExecLimits& limits,
                 std::uint64_t memory_cap, std::vector<std::string> env = {}) {
    ProcessSpec spec;
    spec.argv = {binary.string()};
    spec.stdin_data = input;
    spec.wall_timeout = limits.wall_timeout;
    spec.memory_cap = memory_cap;
    spec.output_cap = limits.output_cap;
    spec.extra_env = std::move(env);
    auto r = run_process(spec);
    Behavior b;
    b.ran = r.launched;
    b.termination.exit_code = r.exit_code;
    b.termination.signal = r.signal;
    b.termination.timed_out = r.timed_out;
    b.termination.output_overflow = r.output_truncated;
    b.stdout_text = std::move(r.stdout_text);
    b.stderr_text = std::move(r.stderr_text);
    b.sanitizer_report = sanitizer_text(b.stderr_text);
    return b;
}

bool c_abnormal(const Behavior& c) { return c.ran && (c.termination.signal != 0 || c.sanitizer_report); }

bool is_panic(const Behavior& b, const PanicSignature& panic) {
    return b.ran && b.termination.signal == 0 && !b.termination.timed_out && b.termination.exit_code == panic.exit_code &&
           contains(b.stderr_text, panic.marker);
}

bool plain_exit(const Behavior& b) {
    return b.ran && b.termination.signal == 0 && !b.termination.timed_out && !b.termination.output_overflow;
}

}  // namespace

std::string_view to_string(VulnType type) {
    switch (type) {
        case VulnType::buffer_overflow: return "buffer_overflow";
        case VulnType::array_bounds: return "array_bounds";
        case VulnType::arithmetic_overflow: return "arithmetic_overflow";
        case VulnType::null_deref: return "null_deref";
        case VulnType::div_by_zero: return "div_by_zero";
        case VulnType::vla_overflow: return "vla_overflow";
        case VulnType::forgotten_memory: return "forgotten_memory";
        case VulnType::invalid_pointer: return "invalid_pointer";
        case VulnType::invalidated_object: return "invalidated_object";
        case VulnType::invalid_free: return "invalid_free";
        case VulnType::misaligned_access: return "misaligned_access";
        case VulnType::other: return "other";
    }
    return "other";
}

VulnType vuln_type_from_string(std::string_view text) {
    for (int i = 0; i <= static_cast<int>(VulnType::other); ++i) {
        auto t = static_cast<VulnType>(i);
        if (to_string(t) == text) return t;
    }
    throw std::invalid_argument("unknown vulnerability type: " + std::string(text));
}

VulnType classify_finding(std::string_view raw_line) {
    const auto text = lower(raw_line);
    for (const auto& p : kPatterns) {
        if (contains(text, p.key)) return p.type;
    }
    return VulnType::other;
}

std::string_view to_string(VerificationKind kind) {
    switch (kind) {
        case VerificationKind::failed: return "failed";
        case VerificationKind::successful: return "successful";
        case VerificationKind::scan_error: return "scan_error";
    }
    return "scan_error";
}

VerificationKind verification_kind_from_string(std::string_view text) {
    if (text == "failed") return VerificationKind::failed;
    if (text == "successful") return VerificationKind::successful;
    if (text == "scan_error") return VerificationKind::scan_error;
    throw std::invalid_argument("unknown verification kind: " + std::string(text));
}

VerificationOutcome parse_checker_output(std::string_view output, std::string_view c_source) {
    static const std::regex state_re(R"(^State \d+ file (\S+) line (\d+))");
    static const std::regex assign_re(R"(^\s+([A-Za-z_][A-Za-z0-9_.\[\]]*)\s*=\s*(-?[0-9]+)\b)");
    static const std::regex where_re(R"(^\s*file (\S+) line (\d+))");

    const auto src_lines = split_lines(c_source);
    const bool reads_input = std::any_of(src_lines.begin(), src_lines.end(), [](const std::string& l) {
        return is_input_line(l);
    });
    auto source_line = [&](long n) -> std::string_view {
        if (n < 1 || static_cast<std::size_t>(n) > src_lines.size()) return {};
        return src_lines[static_cast<std::size_t>(n - 1)];
    };

    VerificationOutcome out;
    const auto lines = split_lines(output);
    std::vector<std::string> inputs;
    bool input_state = false;
    bool saw_failed = false, saw_success = false;

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& line = lines[i];
        std::smatch m;
        if (std::regex_search(line, m, state_re)) {
            auto at = source_line(std::stol(m[2].str()));
            input_state = is_input_line(at);
            continue;
        }
        if (input_state && std::regex_search(line, m, assign_re)) {
            auto at_value = m[2].str();
            inputs.push_back(at_value);
            continue;
        }
        if (contains(line, "Violated property:")) {
            Finding f;
            std::size_t j = i + 1;
            for (; j < lines.size() && trim(lines[j]).empty(); ++j) {
            }
            if (j < lines.size() && std::regex_search(lines[j], m, where_re)) {
                f.location = fs::path(m[1].str()).filename().string() + ":" + m[2].str();
                ++j;
            }
            for (; j < lines.size() && trim(lines[j]).empty(); ++j) {
            }
            if (j < lines.size()) f.raw = trim(lines[j]);
            f.vuln_type = classify_finding(f.raw);
            if (!reads_input) {
                f.trigger_input = std::string();
            } else if (!inputs.empty()) {
                std::string t;
                for (std::size_t k = 0; k < inputs.size(); ++k) t += (k ? " " : "") + inputs[k];
                f.trigger_input = t + "\n";
            }
            out.findings.push_back(std::move(f));
            inputs.clear();
            input_state = false;
            i = j;
            continue;
        }
        if (contains(line, "VERIFICATION FAILED")) saw_failed = true;
        if (contains(line, "VERIFICATION SUCCESSFUL")) saw_success = true;
    }

    if (!out.findings.empty()) {
        out.kind = VerificationKind::failed;
    } else if (saw_success && !saw_failed) {
        out.kind = VerificationKind::successful;
    } else {
        out.kind = VerificationKind::scan_error;
        out.detail = saw_failed ? "checker reported failure without a parsable property" : "no verdict in checker output";
    }
    return out;
}

bool checker_available(const CheckerConfig& config) {
    ProcessSpec spec;
    spec.argv = {config.command, "--version"};
    spec.wall_timeout = std::chrono::milliseconds(10'000);
    return run_process(spec).launched;
}

VerificationOutcome verify_c_program(const corpus::SourceProgram& program, const CheckerConfig& config,
                                     const fs::path& workdir) {
    fs::create_directories(workdir);
    const auto source = workdir / "main.c";
    {
        std::ofstream f(source, std::ios::binary);
        f << program.source_text;
    }
    ProcessSpec spec;
    spec.argv.push_back(config.command);
    spec.argv.push_back("main.c");
    spec.argv.insert(spec.argv.end(), config.args.begin(), config.args.end());
    spec.cwd = workdir;
    spec.wall_timeout = config.timeout;
    auto r = run_process(spec);
    if (!r.launched) throw CheckerUnavailable("checker not available: " + config.command);

    VerificationOutcome out;
    if (r.timed_out) {
        out.kind = VerificationKind::scan_error;
        out.detail = "checker timeout";
    } else if (r.signal != 0) {
        out.kind = VerificationKind::scan_error;
        out.detail = "checker crashed: " + signal_name(r.signal);
    } else {
        out = parse_checker_output(r.stdout_text + "\n" + r.stderr_text, program.source_text);
    }
    out.duration = r.duration;
    return out;
}

CBinaries build_c_binaries(std::string_view c_source, const fs::path& dir, const CBuildConfig& config) {
    fs::create_directories(dir);
    const auto source = dir / "main.c";
    {
        std::ofstream f(source, std::ios::binary);
        f << c_source;
    }
    auto build = [&](const std::vector<std::string>& flags, const std::string& name) {
        ProcessSpec spec;
        spec.argv.push_back(config.compiler);
        spec.argv.insert(spec.argv.end(), flags.begin(), flags.end());
        spec.argv.insert(spec.argv.end(), {"-o", name, "main.c"});
        spec.argv.insert(spec.argv.end(), config.libs.begin(), config.libs.end());
        spec.cwd = dir;
        spec.wall_timeout = config.timeout;
        return run_process(spec);
    };
    auto plain = build(config.plain_flags, "c_plain");
    if (!plain.launched) throw std::runtime_error("C compiler not available: " + config.compiler);
    if (plain.exit_code != 0 || plain.signal != 0) {
        throw std::runtime_error("C build failed:\n" + plain.stderr_text);
    }
    CBinaries out{dir / "c_plain", std::nullopt};
    auto inst = build(config.instrumented_flags, "c_instrumented");
    if (inst.launched && inst.exit_code == 0 && inst.signal == 0) out.instrumented = dir / "c_instrumented";
    return out;
}

std::string Behavior::summary() const {
    if (!ran) return "not run";
    std::string s = render(termination);
    if (sanitizer_report) s += ", sanitizer report";
    auto first = stderr_text.substr(0, stderr_text.find('\n'));
    if (!first.empty()) s += ": " + trim(first.substr(0, 200));
    return s;
}

std::string_view to_string(MitigationKind kind) {
    switch (kind) {
        case MitigationKind::mitigated_panic: return "mitigated_panic";
        case MitigationKind::mitigated_graceful: return "mitigated_graceful";
        case MitigationKind::not_triggered: return "not_triggered";
        case MitigationKind::still_vulnerable: return "still_vulnerable";
        case MitigationKind::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

MitigationKind mitigation_kind_from_string(std::string_view text) {
    for (auto k : {MitigationKind::mitigated_panic, MitigationKind::mitigated_graceful, MitigationKind::not_triggered,
                   MitigationKind::still_vulnerable, MitigationKind::inconclusive}) {
        if (to_string(k) == text) return k;
    }
    throw std::invalid_argument("unknown mitigation kind: " + std::string(text));
}

MitigationKind classify_mitigation(const Behavior& c, const Behavior& translated, const PanicSignature& panic) {
    if (!c.ran || !translated.ran) return MitigationKind::inconclusive;
    if (translated.termination.signal != 0) return MitigationKind::still_vulnerable;
    const bool panicked = is_panic(translated, panic);
    if (c_abnormal(c)) {
        if (panicked) return MitigationKind::mitigated_panic;
        if (plain_exit(translated) && translated.termination.exit_code != 0 && !trim(translated.stderr_text).empty()) {
            return MitigationKind::mitigated_graceful;
        }
        return MitigationKind::inconclusive;
    }
    if (plain_exit(c) && plain_exit(translated) && !panicked) return MitigationKind::not_triggered;
    return MitigationKind::inconclusive;
}

MitigationVerdict replay_mitigation(const CBinaries& c_binaries, const fs::path& translated_binary,
                                    const std::optional<std::string>& trigger, const ReplayOptions& options) {
    MitigationVerdict v;
    if (!trigger) {
        v.kind = MitigationKind::inconclusive;
        v.reason = "no trigger input";
        v.c_behavior = v.translated_behavior = "not run";
        return v;
    }
    options.limits.validate();
    v.c = run_one(c_binaries.plain, *trigger, options.limits, options.limits.memory_cap);
    v.c_build = "plain";
    if (!c_abnormal(v.c) && c_binaries.instrumented) {
        auto inst = run_one(*c_binaries.instrumented, *trigger, options.limits, 0,
                            {"ASAN_OPTIONS=detect_leaks=0:abort_on_error=0", "UBSAN_OPTIONS=print_stacktrace=0"});
        if (c_abnormal(inst)) {
            v.c = std::move(inst);
            v.c_build = "instrumented";
        }
    }
    v.translated = run_one(translated_binary, *trigger, options.limits, options.limits.memory_cap);
    v.c_behavior = v.c.summary();
    v.translated_behavior = v.translated.summary();
    v.kind = classify_mitigation(v.c, v.translated, options.panic);
    if (!v.c.ran) v.reason = "C binary could not be started";
    else if (!v.translated.ran) v.reason = "translated binary could not be started";
    return v;
}

std::size_t ContingencyTable::row_total(VulnType type) const {
    auto it = cells.find(type);
    if (it == cells.end()) return 0;
    std::size_t n = 0;
    for (const auto& [_, c] : it->second) n += c;
    return n;
}

}  // namespace rustport::vuln
