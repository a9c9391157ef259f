#include "rustport/process.hpp"

#include <algorithm>
#include <cerrno>
#include <condition_variable>
#include <csignal>
#include <cstring>
#include <mutex>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace rustport {

namespace {

class ProcessGate {
public:
    static ProcessGate& instance() {
        static ProcessGate gate;
        return gate;
    }

    void resize(std::size_t slots) {
        std::lock_guard lock(mutex_);
        capacity_ = std::max<std::size_t>(slots, 1);
        cv_.notify_all();
    }

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return in_use_ < capacity_; });
        ++in_use_;
    }

    void release() {
        std::lock_guard lock(mutex_);
        --in_use_;
        cv_.notify_one();
    }

private:
    ProcessGate() : capacity_(std::max(1u, std::thread::hardware_concurrency())) {}

    std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t capacity_;
    std::size_t in_use_ = 0;
};

struct GateSlot {
    GateSlot() { ProcessGate::instance().acquire(); }
    ~GateSlot() { ProcessGate::instance().release(); }
    GateSlot(const GateSlot&) = delete;
    GateSlot& operator=(const GateSlot&) = delete;
};

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(Fd&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    Fd& operator=(Fd&& other) noexcept {
        if (this != &other) {
            reset();
            fd_ = std::exchange(other.fd_, -1);
        }
        return *this;
    }
    ~Fd() { reset(); }

    int get() const { return fd_; }
    void reset() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_ = -1;
};

struct Pipe {
    Fd read;
    Fd write;
};

Pipe make_pipe() {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) {
        throw std::system_error(errno, std::generic_category(), "pipe2");
    }
    return {Fd(fds[0]), Fd(fds[1])};
}

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

void set_nonblocking(int fd) {
    int flags = ::fcntl(fd, F_GETFL);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

}  // namespace

void set_process_slots(std::size_t slots) { ProcessGate::instance().resize(slots); }

std::string signal_name(int sig) {
    switch (sig) {
        case SIGSEGV: return "SIGSEGV";
        case SIGABRT: return "SIGABRT";
        case SIGFPE: return "SIGFPE";
        case SIGBUS: return "SIGBUS";
        case SIGILL: return "SIGILL";
        case SIGKILL: return "SIGKILL";
        case SIGTERM: return "SIGTERM";
        case SIGTRAP: return "SIGTRAP";
        default: return "signal " + std::to_string(sig);
    }
}

ProcessResult run_process(const ProcessSpec& spec) {
    if (spec.argv.empty()) throw std::invalid_argument("run_process: empty argv");
    ignore_sigpipe();
    GateSlot slot;

    ProcessResult result;
    const auto started = std::chrono::steady_clock::now();

    Pipe in = make_pipe();
    Pipe out = make_pipe();
    Pipe err = make_pipe();
    Pipe status = make_pipe();

    std::vector<std::string> args = spec.argv;
    std::vector<char*> argv;
    argv.reserve(args.size() + 1);
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    const std::string cwd = spec.cwd.string();

    std::vector<std::string> env_storage;
    std::vector<char*> envp;
    if (!spec.extra_env.empty()) {
        for (char** e = environ; *e; ++e) {
            std::string_view entry(*e);
            auto name = entry.substr(0, entry.find('='));
            bool overridden = std::any_of(spec.extra_env.begin(), spec.extra_env.end(), [&](const std::string& x) {
                return x.substr(0, x.find('=')) == name;
            });
            if (!overridden) env_storage.emplace_back(entry);
        }
        env_storage.insert(env_storage.end(), spec.extra_env.begin(), spec.extra_env.end());
        for (auto& e : env_storage) envp.push_back(e.data());
        envp.push_back(nullptr);
    }

    pid_t pid = ::fork();
    if (pid < 0) throw std::system_error(errno, std::generic_category(), "fork");
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(in.read.get(), STDIN_FILENO);
        ::dup2(out.write.get(), STDOUT_FILENO);
        ::dup2(err.write.get(), STDERR_FILENO);
        if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) {
            int e = errno;
            (void)!::write(status.write.get(), &e, sizeof e);
            ::_exit(127);
        }
        if (spec.memory_cap > 0) {
            rlimit lim{spec.memory_cap, spec.memory_cap};
            ::setrlimit(RLIMIT_AS, &lim);
        }
        ::signal(SIGPIPE, SIG_DFL);
        if (envp.empty()) ::execvp(argv[0], argv.data());
        else ::execvpe(argv[0], argv.data(), envp.data());
        int e = errno;
        (void)!::write(status.write.get(), &e, sizeof e);
        ::_exit(127);
    }
    ::setpgid(pid, pid);

    in.read.reset();
    out.write.reset();
    err.write.reset();
    status.write.reset();

    int exec_errno = 0;
    if (::read(status.read.get(), &exec_errno, sizeof exec_errno) == sizeof exec_errno) {
        int wstatus = 0;
        ::waitpid(pid, &wstatus, 0);
        result.launched = false;
        result.stderr_text = std::string("failed to start ") + spec.argv[0] + ": " + std::strerror(exec_errno);
        result.duration = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
        return result;
    }
    result.launched = true;

    set_nonblocking(in.write.get());
    std::size_t written = 0;
    if (spec.stdin_data.empty()) in.write.reset();

    const auto deadline = started + spec.wall_timeout;
    bool exited = false;
    int wstatus = 0;
    bool killed = false;
    char buffer[65536];

    auto kill_group = [&] {
        if (!killed) {
            ::kill(-pid, SIGKILL);
            ::kill(pid, SIGKILL);
            killed = true;
        }
    };

    while (true) {
        std::vector<pollfd> fds;
        if (in.write.get() >= 0) fds.push_back({in.write.get(), POLLOUT, 0});
        if (out.read.get() >= 0) fds.push_back({out.read.get(), POLLIN, 0});
        if (err.read.get() >= 0) fds.push_back({err.read.get(), POLLIN, 0});

        if (!exited) {
            pid_t r = ::waitpid(pid, &wstatus, WNOHANG);
            if (r == pid) exited = true;
        }
        if (exited && out.read.get() < 0 && err.read.get() < 0) break;

        auto now = std::chrono::steady_clock::now();
        if (!killed && now >= deadline) {
            result.timed_out = true;
            kill_group();
        }
        if (exited && killed) {
            // Grandchildren may still hold the pipes; stop collecting.
            break;
        }
        if (fds.empty()) {
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            continue;
        }

        int wait_ms = 20;
        if (!killed) {
            auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
            wait_ms = static_cast<int>(std::clamp<long long>(remaining, 1, 20));
        }
        int n = ::poll(fds.data(), fds.size(), wait_ms);
        if (n < 0 && errno != EINTR) break;
        if (n <= 0) {
            if (exited) {
                // Child gone but a descendant still holds the pipes.
                ::kill(-pid, SIGKILL);
                killed = true;
            }
            continue;
        }

        for (const auto& p : fds) {
            if (p.revents == 0) continue;
            if (p.fd == in.write.get()) {
                if (p.revents & (POLLERR | POLLHUP)) {
                    in.write.reset();
                    continue;
                }
                ssize_t w = ::write(p.fd, spec.stdin_data.data() + written,
                                    spec.stdin_data.size() - written);
                if (w > 0) written += static_cast<std::size_t>(w);
                else if (w < 0 && errno != EAGAIN && errno != EINTR) in.write.reset();
                if (written >= spec.stdin_data.size()) in.write.reset();
                continue;
            }
            bool is_out = p.fd == out.read.get();
            Fd& fd = is_out ? out.read : err.read;
            std::string& sink = is_out ? result.stdout_text : result.stderr_text;
            ssize_t r = ::read(p.fd, buffer, sizeof buffer);
            if (r > 0) {
                std::size_t room = spec.output_cap > sink.size() ? spec.output_cap - sink.size() : 0;
                sink.append(buffer, std::min<std::size_t>(room, static_cast<std::size_t>(r)));
                if (static_cast<std::size_t>(r) > room) {
                    result.output_truncated = true;
                    kill_group();
                }
            } else if (r == 0 || (errno != EAGAIN && errno != EINTR)) {
                fd.reset();
            }
        }
    }

    if (!exited) ::waitpid(pid, &wstatus, 0);
    ::kill(-pid, SIGKILL);  // reap any leftover descendants in the group

    if (WIFEXITED(wstatus)) {
        result.exit_code = WEXITSTATUS(wstatus);
    } else if (WIFSIGNALED(wstatus)) {
        result.signal = WTERMSIG(wstatus);
    }
    // A kill we issued is reported through timed_out / output_truncated, not as a fault signal.
    if (killed && result.signal == SIGKILL) result.signal = 0;

    result.duration = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    return result;
}

}  // namespace rustport
