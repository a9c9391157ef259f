#include "rustport/promptkit.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace rustport::prompt {

namespace {

constexpr std::string_view kTask =
    "Given some code written in the C programming language, translate it into equivalent Rust code that "
    "solves the exact same problem as the original code does. Ensure the following:\n"
    "\n"
    "- Produce only safe Rust code.\n"
    "- The translated Rust code can be compiled and executed with all the necessary imports.\n"
    "- Output only the code without any additional explanation or comments.\n"
    "- Wrap the code with ```rust\n";

constexpr std::string_view kCompileFailure =
    "Executing your generated code gives the following errors because it is syntactically incorrect:\n";

constexpr std::string_view kCorrectionRequest =
    "Please suggest a corrected version of the complete code wrapped in ```rust";

constexpr std::string_view kGuidanceIntro =
    "The errors above are commonly caused by the following mistakes. Use these instructions and examples "
    "to fix them:\n";

void append_block(std::string& out, std::string_view text) {
    out.append(text);
    if (!text.ends_with('\n')) out.push_back('\n');
}

std::string faulty_code_section(std::string_view c_source, std::string_view bad_translation) {
    std::string out = build_base_prompt(c_source);
    out += "\n\nRust code:\n";
    append_block(out, bad_translation);
    out += "\n";
    return out;
}

}  // namespace

std::string_view to_string(PromptKind kind) {
    switch (kind) {
        case PromptKind::base: return "base";
        case PromptKind::basic_repair: return "basic_repair";
        case PromptKind::guided_repair: return "guided_repair";
        case PromptKind::dynamic_repair: return "dynamic_repair";
    }
    return "base";
}

PromptKind prompt_kind_from_string(std::string_view text) {
    if (text == "base") return PromptKind::base;
    if (text == "basic_repair") return PromptKind::basic_repair;
    if (text == "guided_repair") return PromptKind::guided_repair;
    if (text == "dynamic_repair") return PromptKind::dynamic_repair;
    throw std::invalid_argument("unknown prompt kind: " + std::string(text));
}

const std::array<std::string_view, 8>& guided_target_codes() {
    static constexpr std::array<std::string_view, 8> codes = {
        "E0277", "E0308", "E0425", "E0599", "E0384", "E0282", "E0502", "E0499",
    };
    return codes;
}

bool is_guided_target(std::string_view code) {
    const auto& codes = guided_target_codes();
    return std::find(codes.begin(), codes.end(), code) != codes.end();
}

GuidanceEntry parse_guidance(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("guidance file: ") + e.what());
    }
    GuidanceEntry entry;
    try {
        entry.error_code = j.at("error_code").get<std::string>();
        entry.title = j.at("title").get<std::string>();
        for (const auto& c : j.at("causes")) {
            entry.causes.push_back({c.at("explanation").get<std::string>(), c.at("bad_snippet").get<std::string>(),
                                    c.at("fixed_snippet").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("guidance file: ") + e.what());
    }
    if (!is_guided_target(entry.error_code)) {
        throw std::invalid_argument("guidance for non-targeted code " + entry.error_code);
    }
    if (entry.causes.empty()) throw std::invalid_argument(entry.error_code + ": no causes");
    for (const auto& c : entry.causes) {
        if (c.explanation.empty() || c.bad_snippet.empty() || c.fixed_snippet.empty()) {
            throw std::invalid_argument(entry.error_code + ": every cause needs an explanation and both snippets");
        }
    }
    return entry;
}

std::vector<GuidanceEntry> load_knowledge_base(const fs::path& dir) {
    std::vector<GuidanceEntry> entries;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw std::runtime_error("knowledge base directory missing: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::set<std::string> seen;
    for (const auto& f : files) {
        std::ifstream in(f);
        std::ostringstream ss;
        ss << in.rdbuf();
        GuidanceEntry entry = parse_guidance(ss.str());
        if (!seen.insert(entry.error_code).second) {
            throw std::invalid_argument("duplicate guidance for " + entry.error_code);
        }
        entries.push_back(std::move(entry));
    }
    std::sort(entries.begin(), entries.end(),
              [](const GuidanceEntry& a, const GuidanceEntry& b) { return a.error_code < b.error_code; });
    return entries;
}

fs::path default_guidance_dir() {
    if (const char* env = std::getenv("RUSTPORT_GUIDANCE_DIR"); env && *env) return env;
    std::error_code ec;
#ifdef RUSTPORT_INSTALLED_GUIDANCE_DIR
    if (fs::is_directory(RUSTPORT_INSTALLED_GUIDANCE_DIR, ec)) return RUSTPORT_INSTALLED_GUIDANCE_DIR;
#endif
#ifdef RUSTPORT_SOURCE_GUIDANCE_DIR
    return RUSTPORT_SOURCE_GUIDANCE_DIR;
#else
    return "guidance";
#endif
}

std::string truncate_head(std::string_view text, std::size_t budget) {
    if (text.size() <= budget) return std::string(text);
    std::size_t cut = budget;
    // do not split a UTF-8 sequence
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    std::string out(text.substr(0, cut));
    if (!out.ends_with('\n')) out.push_back('\n');
    out += "[... " + std::to_string(text.size() - cut) + " bytes truncated]\n";
    return out;
}

std::string build_base_prompt(std::string_view c_source) {
    if (c_source.empty()) throw std::invalid_argument("build_base_prompt: empty C source");
    std::string out(kTask);
    out += "C code:\n";
    append_block(out, c_source);
    out += "Rust code:";
    return out;
}

std::string build_repair_prompt(std::string_view c_source, std::string_view bad_translation,
                                std::string_view diagnostics_text, const PromptOptions& options) {
    if (diagnostics_text.empty()) throw std::invalid_argument("build_repair_prompt: empty diagnostics");
    std::string out = faulty_code_section(c_source, bad_translation);
    out += kCompileFailure;
    append_block(out, truncate_head(diagnostics_text, options.message_budget));
    out += kCorrectionRequest;
    return out;
}

std::vector<const GuidanceEntry*> select_guidance(std::span<const build::Diagnostic> diagnostics,
                                                  std::span<const GuidanceEntry> knowledge_base) {
    std::vector<const GuidanceEntry*> picked;
    for (const auto& d : diagnostics) {
        if (d.level != build::Level::error || !d.code) continue;
        auto it = std::find_if(knowledge_base.begin(), knowledge_base.end(),
                               [&](const GuidanceEntry& e) { return e.error_code == *d.code; });
        if (it == knowledge_base.end()) continue;
        if (std::find(picked.begin(), picked.end(), &*it) == picked.end()) picked.push_back(&*it);
    }
    return picked;
}

std::string render_guidance(const GuidanceEntry& entry) {
    std::string out = "Error " + entry.error_code + " (" + entry.title + "):\n";
    for (std::size_t i = 0; i < entry.causes.size(); ++i) {
        const auto& c = entry.causes[i];
        out += std::to_string(i + 1) + ". " + c.explanation + " Example:\n";
        out += "```rust\n//Cause:\n";
        append_block(out, c.bad_snippet);
        out += "//Fix:\n";
        append_block(out, c.fixed_snippet);
        out += "```\n";
    }
    return out;
}

std::string build_guided_prompt(std::string_view c_source, std::string_view bad_translation,
                                std::span<const build::Diagnostic> diagnostics,
                                std::span<const GuidanceEntry> knowledge_base, const PromptOptions& options) {
    auto picked = select_guidance(diagnostics, knowledge_base);
    if (picked.empty()) {
        throw std::invalid_argument("build_guided_prompt: no diagnostic matches a guidance entry");
    }
    std::string out = faulty_code_section(c_source, bad_translation);
    out += kCompileFailure;
    append_block(out, truncate_head(build::render_errors(diagnostics), options.message_budget));
    out += "\n";
    out += kGuidanceIntro;
    for (const auto* entry : picked) {
        out += "\n";
        out += render_guidance(*entry);
    }
    out += "\n";
    out += kCorrectionRequest;
    return out;
}

std::string_view describe(DynamicErrorType type) {
    switch (type) {
        case DynamicErrorType::runtime: return "runtime";
        case DynamicErrorType::infinite_loop: return "infinite loop";
        case DynamicErrorType::test_case: return "test case";
    }
    return "runtime";
}

std::string build_dynamic_prompt(std::string_view c_source, std::string_view bad_translation,
                                 DynamicErrorType error_type, std::string_view error_message,
                                 const PromptOptions& options) {
    std::string message(error_message);
    if (message.empty()) {
        if (error_type != DynamicErrorType::infinite_loop) {
            throw std::invalid_argument("build_dynamic_prompt: empty error message");
        }
        message = "the program did not terminate within the time limit";
    }
    std::string out = faulty_code_section(c_source, bad_translation);
    out += "Executing your generated code gives the following ";
    out += describe(error_type);
    out += " error:\n\n";
    append_block(out, truncate_head(message, options.message_budget));
    return out;
}

}  // namespace rustport::prompt
