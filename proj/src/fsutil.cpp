#include "mapsat/fsutil.hpp"

#include "mapsat/errors.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <functional>
#include <thread>

namespace mapsat {

namespace fs = std::filesystem;

std::optional<std::vector<std::uint8_t>> read_file(fs::path const &path)
{
    std::ifstream in{path, std::ios::binary};
    if (!in) {
        return std::nullopt;
    }
    in.seekg(0, std::ios::end);
    auto const size = in.tellg();
    if (size < 0) {
        return std::nullopt;
    }
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> data(static_cast<std::size_t>(size));
    if (!data.empty() &&
        !in.read(reinterpret_cast<char *>(data.data()), size)) {
        return std::nullopt;
    }
    return data;
}

std::optional<std::string> read_text_file(fs::path const &path)
{
    auto bytes = read_file(path);
    if (!bytes) {
        return std::nullopt;
    }
    return std::string{bytes->begin(), bytes->end()};
}

namespace {

std::atomic<std::uint64_t> temp_counter{0};

[[noreturn]] void throw_io(std::string const &what, fs::path const &path)
{
    throw Error{what + " '" + path.string() + "': " + std::strerror(errno)};
}

void fsync_dir(fs::path const &dir)
{
    int const fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (fd >= 0) {
        ::fsync(fd);
        ::close(fd);
    }
}

} // namespace

void write_file_atomic(fs::path const &path, std::span<std::uint8_t const> bytes)
{
    auto const dir = path.parent_path();
    if (!dir.empty()) {
        fs::create_directories(dir);
    }
    auto const tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(tid) +
           "." + std::to_string(temp_counter.fetch_add(1));

    int const fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC,
                          0644);
    if (fd < 0) {
        throw_io("cannot create", tmp);
    }
    std::size_t written = 0;
    while (written < bytes.size()) {
        auto const n = ::write(fd, bytes.data() + written, bytes.size() - written);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            ::close(fd);
            ::unlink(tmp.c_str());
            throw_io("cannot write", tmp);
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0 || ::close(fd) != 0) {
        ::unlink(tmp.c_str());
        throw_io("cannot flush", tmp);
    }
    if (::rename(tmp.c_str(), path.c_str()) != 0) {
        ::unlink(tmp.c_str());
        throw_io("cannot rename into", path);
    }
    fsync_dir(dir.empty() ? fs::path{"."} : dir);
}

} // namespace mapsat
