#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace nesvmdb {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unsupported input data (bad headers, truncated chunks, ...).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Filesystem or subprocess failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Arguments that violate an operation's preconditions.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError("read failure on '" + path.string() + "'");
    }
    return bytes;
}

inline void write_file_bytes(const std::filesystem::path &path, const std::vector<std::uint8_t> &bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failure on '" + path.string() + "'");
    }
}

inline void write_file_text(const std::filesystem::path &path, std::string_view text) {
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

inline std::string read_file_text(const std::filesystem::path &path) {
    auto bytes = read_file_bytes(path);
    return {bytes.begin(), bytes.end()};
}

/// Little-endian byte sink.
class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        std::uint64_t bits;
        static_assert(sizeof bits == sizeof v);
        std::memcpy(&bits, &v, sizeof bits);
        u64(bits);
    }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes_.insert(bytes_.end(), s.begin(), s.end());
    }
    void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

    [[nodiscard]] const std::vector<std::uint8_t> &bytes() const noexcept { return bytes_; }
    [[nodiscard]] std::vector<std::uint8_t> take() noexcept { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

/// Little-endian byte source with bounds checking; overruns raise FormatError.
class ByteReader {
public:
    ByteReader(const std::uint8_t *data, std::size_t size, std::string context) :
        data_{ data }, size_{ size }, context_{ std::move(context) } {}

    [[nodiscard]] std::size_t remaining() const noexcept { return size_ - pos_; }
    [[nodiscard]] std::size_t position() const noexcept { return pos_; }
    [[nodiscard]] bool at_end() const noexcept { return pos_ == size_; }

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        return raw(n);
    }
    std::string raw(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char *>(data_ + pos_), n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n) const {
        if (n > size_ - pos_) {
            throw FormatError(context_ + ": truncated data at byte " + std::to_string(pos_));
        }
    }
    std::uint64_t le(int width) {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) {
            v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
        }
        return v;
    }

    const std::uint8_t *data_;
    std::size_t size_;
    std::size_t pos_ = 0;
    std::string context_;
};

/// Runs body(i) for i in [0, count) on up to `threads` workers (0 = hardware concurrency).
/// The first exception thrown by any invocation is rethrown after all workers join.
template <typename Body>
void parallel_for(std::size_t count, Body &&body, unsigned threads = 0) {
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{ 0 };
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto &w : workers) w.join();
    if (failure) std::rethrow_exception(failure);
}

inline std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c);
    });
    return out;
}

inline std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

/// Regular files under `dir` with one of `extensions` (lowercase, with dot), sorted by path.
inline std::vector<std::filesystem::path> list_files(const std::filesystem::path &dir,
                                                     const std::vector<std::string> &extensions,
                                                     bool recursive = false) {
    std::vector<std::filesystem::path> files;
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("not a directory: '" + dir.string() + "'");
    }
    const auto accept = [&](const std::filesystem::directory_entry &e) {
        if (!e.is_regular_file()) return;
        const auto ext = to_lower_ascii(e.path().extension().string());
        if (std::find(extensions.begin(), extensions.end(), ext) != extensions.end()) {
            files.push_back(e.path());
        }
    };
    if (recursive) {
        for (const auto &e : std::filesystem::recursive_directory_iterator(dir)) accept(e);
    } else {
        for (const auto &e : std::filesystem::directory_iterator(dir)) accept(e);
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace detail
}  // namespace nesvmdb
