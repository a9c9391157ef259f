#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rustport {

struct ProcessSpec {
    std::vector<std::string> argv;
    std::filesystem::path cwd;  // empty: inherit
    std::string stdin_data;
    std::vector<std::string> extra_env;    // NAME=value entries added to the inherited environment
    std::chrono::milliseconds wall_timeout{10'000};
    std::uint64_t memory_cap = 0;          // bytes of address space, 0 = unlimited
    std::size_t output_cap = 8u << 20;     // per captured stream
};

struct ProcessResult {
    bool launched = false;  // false when the executable could not be started
    int exit_code = -1;     // meaningful only when signal == 0
    int signal = 0;
    bool timed_out = false;
    bool output_truncated = false;
    std::string stdout_text;
    std::string stderr_text;
    std::chrono::milliseconds duration{0};

    bool exited_normally() const { return launched && !timed_out && !output_truncated && signal == 0; }
};

/// Runs a child process to completion. The child gets its own process group;
/// on timeout or output overflow the whole group is killed with SIGKILL.
/// Blocks on the global process gate (see set_process_slots).
ProcessResult run_process(const ProcessSpec& spec);

/// Bounds the number of simultaneously running child processes across all
/// threads (compiler, test binaries, checker). Defaults to hardware concurrency.
void set_process_slots(std::size_t slots);

std::string signal_name(int sig);

}  // namespace rustport
