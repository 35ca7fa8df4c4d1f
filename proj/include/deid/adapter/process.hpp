#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <sys/types.h>

#include <json.hpp>

namespace deid::adapter {

/// A child process spoken to over its stdin/stdout. The command runs under
/// `/bin/sh -c`; its stderr is inherited. The destructor closes stdin and
/// reaps the child, killing it if it does not exit promptly.
class Process {
public:
    explicit Process(const std::string& command, std::chrono::milliseconds read_timeout = std::chrono::milliseconds{0});
    ~Process();

    Process(const Process&) = delete;
    Process& operator=(const Process&) = delete;

    void write_line(const std::string& line);
    void write_bytes(std::span<const std::uint8_t> bytes);

    /// Next line without its terminator. Throws ProtocolError on EOF or timeout.
    std::string read_line();
    std::vector<std::uint8_t> read_bytes(std::size_t count);

    const std::string& command() const { return command_; }
    pid_t pid() const { return pid_; }

private:
    void fill();  // reads more bytes into buffer_
    void write_all(const char* data, std::size_t size);

    std::string command_;
    std::chrono::milliseconds read_timeout_;
    pid_t pid_ = -1;
    int in_fd_ = -1;   // child's stdin
    int out_fd_ = -1;  // child's stdout
    std::string buffer_;
};

/// Line-delimited JSON request/response over a Process.
class JsonLineChannel {
public:
    explicit JsonLineChannel(const std::string& command,
                             std::chrono::milliseconds read_timeout = std::chrono::milliseconds{0})
        : process_(command, read_timeout) {}

    void send(const nlohmann::json& message);
    nlohmann::json receive();

    nlohmann::json request(const nlohmann::json& message) {
        send(message);
        return receive();
    }

    Process& process() { return process_; }

private:
    Process process_;
};

}  // namespace deid::adapter
