#include "deid/adapter/process.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <mutex>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "deid/error.hpp"

extern char** environ;

namespace deid::adapter {

namespace {

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

Process::Process(const std::string& command, std::chrono::milliseconds read_timeout)
    : command_(command), read_timeout_(read_timeout) {
    ignore_sigpipe();
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw ProtocolError("pipe failed: " + std::string(std::strerror(errno)));
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw ProtocolError("pipe failed: " + std::string(std::strerror(errno)));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

    const char* argv[] = {"/bin/sh", "-c", command_.c_str(), nullptr};
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
        ::close(to_child[1]);
        ::close(from_child[0]);
        throw ProtocolError("cannot start adapter '" + command_ + "': " + std::strerror(rc));
    }
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
}

Process::~Process() {
    if (in_fd_ >= 0) ::close(in_fd_);
    if (out_fd_ >= 0) ::close(out_fd_);
    if (pid_ <= 0) return;
    int status = 0;
    for (int i = 0; i < 100; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
}

void Process::write_all(const char* data, std::size_t size) {
    while (size > 0) {
        const ssize_t n = ::write(in_fd_, data, size);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError("adapter '" + command_ + "' closed its input: " + std::strerror(errno));
        }
        data += n;
        size -= static_cast<std::size_t>(n);
    }
}

void Process::write_line(const std::string& line) {
    std::string framed = line;
    framed.push_back('\n');
    write_all(framed.data(), framed.size());
}

void Process::write_bytes(std::span<const std::uint8_t> bytes) {
    write_all(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void Process::fill() {
    if (read_timeout_.count() > 0) {
        pollfd pfd{out_fd_, POLLIN, 0};
        int rc;
        do {
            rc = ::poll(&pfd, 1, static_cast<int>(read_timeout_.count()));
        } while (rc < 0 && errno == EINTR);
        if (rc == 0) throw ProtocolError("adapter '" + command_ + "' timed out");
    }
    char chunk[65536];
    ssize_t n;
    do {
        n = ::read(out_fd_, chunk, sizeof chunk);
    } while (n < 0 && errno == EINTR);
    if (n < 0) throw ProtocolError("read from adapter '" + command_ + "' failed: " + std::strerror(errno));
    if (n == 0) throw ProtocolError("adapter '" + command_ + "' closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
}

std::string Process::read_line() {
    std::size_t pos;
    while ((pos = buffer_.find('\n')) == std::string::npos) fill();
    std::string line = buffer_.substr(0, pos);
    buffer_.erase(0, pos + 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::vector<std::uint8_t> Process::read_bytes(std::size_t count) {
    while (buffer_.size() < count) fill();
    std::vector<std::uint8_t> out(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(count));
    buffer_.erase(0, count);
    return out;
}

void JsonLineChannel::send(const nlohmann::json& message) { process_.write_line(message.dump()); }

nlohmann::json JsonLineChannel::receive() {
    const std::string line = process_.read_line();
    try {
        return nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError("adapter '" + process_.command() + "' sent malformed JSON: " + e.what());
    }
}

}  // namespace deid::adapter
