#pragma once

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include "errors.hpp"

namespace cityalert {

inline std::uint32_t crc32_of(std::string_view s) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

inline std::string crc32_hex(std::uint32_t v) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

// Append-only line log: `<record>\t<crc32-hex>\n`. Each append is fsynced
// before returning. On open, a damaged final line (a torn write) is dropped
// and truncated away; damage anywhere earlier is reported as CorruptLog.
class ChecksummedLog {
public:
    static constexpr std::uint64_t kUnlimited = 0;

    explicit ChecksummedLog(std::string path, std::uint64_t max_bytes = kUnlimited)
        : path_(std::move(path)), max_bytes_(max_bytes) {
        if (auto dir = std::filesystem::path(path_).parent_path(); !dir.empty()) {
            std::filesystem::create_directories(dir);
        }
        recover();
        fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
        if (fd_ < 0) throw Error("cannot open " + path_ + ": " + std::strerror(errno));
    }

    ~ChecksummedLog() {
        if (fd_ >= 0) ::close(fd_);
    }

    ChecksummedLog(const ChecksummedLog&) = delete;
    ChecksummedLog& operator=(const ChecksummedLog&) = delete;

    // Records recovered at open, in append order.
    const std::vector<std::string>& recovered() const { return recovered_; }
    std::size_t torn_lines() const { return torn_lines_; }

    void append(std::string_view record) {
        if (record.find('\n') != std::string_view::npos) throw FormatError("log record contains a newline");
        std::lock_guard lock(mu_);
        std::uint32_t crc = crc32_of(record);
        std::string line;
        line.reserve(record.size() + 10);
        line.append(record).append("\t").append(crc32_hex(crc)).append("\n");
        if (max_bytes_ != kUnlimited && bytes_ + line.size() > max_bytes_) {
            throw StorageFull(path_ + ": log would exceed " + std::to_string(max_bytes_) + " bytes");
        }
        std::size_t done = 0;
        while (done < line.size()) {
            auto n = ::write(fd_, line.data() + done, line.size() - done);
            if (n < 0) {
                if (errno == EINTR) continue;
                if (errno == ENOSPC) throw StorageFull(path_ + ": no space left on device");
                throw Error(path_ + ": write failed: " + std::strerror(errno));
            }
            done += static_cast<std::size_t>(n);
        }
        if (::fsync(fd_) != 0) throw Error(path_ + ": fsync failed: " + std::strerror(errno));
        bytes_ += line.size();
        ++count_;
        last_checksum_ = crc;
    }

    const std::string& path() const { return path_; }
    std::uint64_t size_bytes() const { return bytes_; }
    std::size_t record_count() const { return count_; }
    std::uint32_t last_checksum() const { return last_checksum_; }

private:
    // Returns the record when the line carries a matching checksum.
    static std::optional<std::string_view> check_line(std::string_view line) {
        auto tab = line.rfind('\t');
        if (tab == std::string_view::npos || line.size() - tab - 1 != 8) return std::nullopt;
        auto record = line.substr(0, tab);
        if (crc32_hex(crc32_of(record)) != line.substr(tab + 1)) return std::nullopt;
        return record;
    }

    void recover() {
        std::ifstream in(path_, std::ios::binary);
        if (!in) return;
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string data = buf.str();

        std::size_t pos = 0;
        std::size_t good_end = 0;
        std::size_t lineno = 0;
        while (pos < data.size()) {
            ++lineno;
            auto nl = data.find('\n', pos);
            bool terminated = nl != std::string::npos;
            std::size_t end = terminated ? nl : data.size();
            auto record = check_line(std::string_view(data).substr(pos, end - pos));
            bool last = !terminated || end + 1 == data.size();
            if (!record || !terminated) {
                if (!last) throw CorruptLog(path_ + ":" + std::to_string(lineno) + ": checksum mismatch");
                ++torn_lines_;
                break;
            }
            recovered_.emplace_back(*record);
            last_checksum_ = crc32_of(*record);
            pos = end + 1;
            good_end = pos;
        }
        if (good_end < data.size()) std::filesystem::resize_file(path_, good_end);
        bytes_ = good_end;
        count_ = recovered_.size();
    }

    std::string path_;
    std::uint64_t max_bytes_;
    int fd_ = -1;
    std::mutex mu_;
    std::vector<std::string> recovered_;
    std::size_t torn_lines_ = 0;
    std::uint64_t bytes_ = 0;
    std::size_t count_ = 0;
    std::uint32_t last_checksum_ = 0;
};

} // namespace cityalert
