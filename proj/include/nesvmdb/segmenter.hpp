#pragma once

// Fixed-length clip slicing and audio extraction through an external decoder process.

#include "nesvmdb/audio.hpp"
#include "nesvmdb/common.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

namespace nesvmdb {

inline constexpr double default_clip_seconds = 15.0;

struct ClipSpec {
    std::string clip_id;
    std::string source;
    double start_seconds = 0.0;
    double length_seconds = default_clip_seconds;
    friend bool operator==(const ClipSpec &, const ClipSpec &) = default;
};

inline void to_json(nlohmann::json &j, const ClipSpec &c) {
    j = nlohmann::json{ { "clip_id", c.clip_id }, { "source", c.source }, { "start_s", c.start_seconds }, { "length_s", c.length_seconds } };
}

inline void from_json(const nlohmann::json &j, ClipSpec &c) {
    j.at("clip_id").get_to(c.clip_id);
    c.source = j.value("source", std::string{});
    j.at("start_s").get_to(c.start_seconds);
    c.length_seconds = j.value("length_s", default_clip_seconds);
}

struct Clip {
    ClipSpec spec;
    AudioBuffer audio;
};

[[nodiscard]] inline std::string clip_id_for(std::string_view game_id, std::size_t index) {
    char digits[32];
    std::snprintf(digits, sizeof digits, "%05zu", index);
    return std::string(game_id) + "/" + digits;
}

/// Consecutive non-overlapping windows of `clip_seconds`, starting at 0. A trailing remainder
/// shorter than one clip is dropped unless `keep_remainder` is set.
[[nodiscard]] inline std::vector<Clip> slice_clips(const AudioBuffer &audio, double clip_seconds, std::string_view game_id,
                                                   std::string_view source = {}, bool keep_remainder = false) {
    if (!(clip_seconds > 0.0)) throw InvalidArgument("clip length must be positive");
    const auto clip_samples = static_cast<std::size_t>(std::llround(clip_seconds * audio.sample_rate));
    if (clip_samples == 0) throw InvalidArgument("clip length is shorter than one sample");
    std::vector<Clip> clips;
    const std::size_t n = audio.samples.size();
    for (std::size_t i = 0, first = 0; first < n; ++i, first += clip_samples) {
        const std::size_t count = std::min(clip_samples, n - first);
        if (count < clip_samples && !keep_remainder) break;
        ClipSpec spec{ clip_id_for(game_id, i), std::string(source), static_cast<double>(first) / audio.sample_rate,
                       static_cast<double>(count) / audio.sample_rate };
        clips.push_back(Clip{ std::move(spec), audio.slice(first, count) });
    }
    return clips;
}

/// Writes `<out_dir>/<clip_id>.wav` for every clip and appends their specs to `<out_dir>/clips.jsonl`.
inline void write_clips(const std::vector<Clip> &clips, const std::filesystem::path &out_dir, bool append_listing = false) {
    std::filesystem::create_directories(out_dir);
    std::string listing;
    for (const auto &c : clips) {
        write_wav(c.audio, out_dir / (c.spec.clip_id + ".wav"));
        listing += nlohmann::json(c.spec).dump() + "\n";
    }
    const auto path = out_dir / "clips.jsonl";
    std::ofstream out(path, append_listing ? std::ios::app : std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << listing;
}

[[nodiscard]] inline std::vector<ClipSpec> read_clip_listing(const std::filesystem::path &path) {
    std::vector<ClipSpec> specs;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (detail::trim(line).empty()) continue;
        try {
            specs.push_back(nlohmann::json::parse(line).get<ClipSpec>());
        } catch (const nlohmann::json::exception &e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return specs;
}

/// How to invoke the external media decoder. The template may use {input}, {output} and {rate};
/// substituted paths are shell-quoted. The decoder must write mono 16-bit PCM WAV to {output}.
struct DecoderConfig {
    static constexpr const char *env_variable = "NVM_DECODER_CMD";
    static constexpr const char *default_template =
        "ffmpeg -nostdin -v error -y -i {input} -vn -ac 1 -ar {rate} -c:a pcm_s16le {output}";

    std::string command_template = default_template;

    /// NVM_DECODER_CMD if set, else the ffmpeg default.
    [[nodiscard]] static DecoderConfig from_environment() {
        DecoderConfig cfg;
        if (const char *env = std::getenv(env_variable); env != nullptr && *env != '\0') cfg.command_template = env;
        return cfg;
    }

    /// JSON file {"decoder": "<template>"}; NVM_DECODER_CMD, when set, takes precedence.
    [[nodiscard]] static DecoderConfig load(const std::filesystem::path &path) {
        DecoderConfig cfg;
        try {
            const auto j = nlohmann::json::parse(detail::read_file_text(path));
            cfg.command_template = j.at("decoder").get<std::string>();
        } catch (const nlohmann::json::exception &e) {
            throw FormatError("decoder config '" + path.string() + "': " + e.what());
        }
        if (const char *env = std::getenv(env_variable); env != nullptr && *env != '\0') cfg.command_template = env;
        return cfg;
    }

    [[nodiscard]] std::string executable() const {
        const auto s = detail::trim(command_template);
        return std::string(s.substr(0, s.find_first_of(" \t")));
    }
};

namespace detail {

inline std::string shell_quote(std::string_view s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

inline std::optional<std::filesystem::path> find_executable(const std::string &name) {
    const auto runnable = [](const std::filesystem::path &p) {
        return std::filesystem::is_regular_file(p) && ::access(p.c_str(), X_OK) == 0;
    };
    if (name.find('/') != std::string::npos) {
        if (runnable(name)) return std::filesystem::path(name);
        return std::nullopt;
    }
    const char *path = std::getenv("PATH");
    std::string_view dirs = path != nullptr ? path : "/usr/bin:/bin";
    while (!dirs.empty()) {
        const auto sep = dirs.find(':');
        const auto dir = dirs.substr(0, sep);
        if (!dir.empty()) {
            const auto candidate = std::filesystem::path(dir) / name;
            if (runnable(candidate)) return candidate;
        }
        if (sep == std::string_view::npos) break;
        dirs.remove_prefix(sep + 1);
    }
    return std::nullopt;
}

inline std::string substitute(std::string tmpl, std::string_view key, const std::string &value) {
    for (std::size_t pos = tmpl.find(key); pos != std::string::npos; pos = tmpl.find(key, pos + value.size())) {
        tmpl.replace(pos, key.size(), value);
    }
    return tmpl;
}

struct ProcessResult {
    int exit_code = -1;
    std::string output;
};

/// Runs `command` through /bin/sh, capturing stdout and stderr together.
inline ProcessResult run_command(const std::string &command) {
    ProcessResult result;
    FILE *pipe = ::popen((command + " 2>&1").c_str(), "r");
    if (pipe == nullptr) throw IoError("failed to start subprocess: " + command);
    char buf[4096];
    while (std::fgets(buf, sizeof buf, pipe) != nullptr) result.output += buf;
    const int status = ::pclose(pipe);
    result.exit_code = (status != -1 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    return result;
}

inline std::filesystem::path unique_temp_path(std::string_view suffix) {
    static std::atomic<unsigned> counter{ 0 };
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    return std::filesystem::temp_directory_path() /
           ("nesvmdb-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" + std::to_string(counter++) +
            std::string(suffix));
}

}  // namespace detail

/// Decodes `media_path` to mono PCM at `sample_rate`. WAV files already at that rate are read
/// directly; everything else goes through the configured decoder subprocess.
[[nodiscard]] inline AudioBuffer extract_audio(const std::filesystem::path &media_path, int sample_rate,
                                               const DecoderConfig &decoder = DecoderConfig::from_environment()) {
    if (sample_rate <= 0) throw InvalidArgument("sample rate must be positive");
    if (!std::filesystem::exists(media_path)) throw IoError("media file not found: '" + media_path.string() + "'");
    if (detail::to_lower_ascii(media_path.extension().string()) == ".wav") {
        try {
            auto audio = read_wav(media_path);
            if (audio.sample_rate == sample_rate) {
                if (audio.empty()) throw IoError("zero-length audio stream in '" + media_path.string() + "'");
                return audio;
            }
        } catch (const FormatError &) {
            // not 16-bit PCM; let the decoder handle it
        }
    }

    const std::string exe = decoder.executable();
    if (exe.empty()) throw InvalidArgument("decoder command template is empty");
    if (!detail::find_executable(exe)) {
        throw IoError("media decoder '" + exe + "' not found; install it or point " + DecoderConfig::env_variable +
                      " at a command that writes mono PCM WAV (template keys {input} {output} {rate})");
    }
    const auto out_path = detail::unique_temp_path(".wav");
    std::string cmd = decoder.command_template;
    cmd = detail::substitute(cmd, "{input}", detail::shell_quote(media_path.string()));
    cmd = detail::substitute(cmd, "{output}", detail::shell_quote(out_path.string()));
    cmd = detail::substitute(cmd, "{rate}", std::to_string(sample_rate));

    const auto result = detail::run_command(cmd);
    const auto cleanup = [&] {
        std::error_code ec;
        std::filesystem::remove(out_path, ec);
    };
    if (result.exit_code != 0) {
        cleanup();
        throw IoError("decoder '" + exe + "' exited with status " + std::to_string(result.exit_code) + " on '" +
                      media_path.string() + "': " + std::string(detail::trim(result.output)));
    }
    AudioBuffer audio;
    try {
        audio = read_wav(out_path);
    } catch (const Error &e) {
        cleanup();
        throw IoError("decoder '" + exe + "' produced no readable WAV for '" + media_path.string() + "': " + e.what() +
                      (result.output.empty() ? "" : " (decoder said: " + std::string(detail::trim(result.output)) + ")"));
    }
    cleanup();
    if (audio.empty()) throw IoError("zero-length audio stream decoded from '" + media_path.string() + "'");
    if (audio.sample_rate != sample_rate) {
        throw IoError("decoder wrote " + std::to_string(audio.sample_rate) + " Hz audio, expected " + std::to_string(sample_rate));
    }
    return audio;
}

}  // namespace nesvmdb
