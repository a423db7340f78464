#include "camfuse/common.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>
#include <vector>

namespace camfuse {

std::string_view to_string(Errc code)
{
    switch (code) {
        case Errc::argument: return "argument";
        case Errc::dimension: return "dimension";
        case Errc::bounds: return "bounds";
        case Errc::shape: return "shape";
        case Errc::format: return "format";
        case Errc::truncation: return "truncation";
        case Errc::io: return "io";
        case Errc::dependency: return "dependency";
        case Errc::plan: return "plan";
        case Errc::usage: return "usage";
        case Errc::invariant: return "invariant";
    }
    return "unknown";
}

void fail(Errc code, const std::string& message)
{
    throw Error(code, message);
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_string(std::string_view s)
{
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index)
{
    return splitmix64(splitmix64(base ^ hash_string(tag)) + index);
}

namespace {
std::atomic<int> g_default_jobs{0};
}

int default_jobs()
{
    const int configured = g_default_jobs.load();
    if (configured > 0) return configured;
    return std::max(1u, std::thread::hardware_concurrency());
}

void set_default_jobs(int jobs)
{
    g_default_jobs.store(std::max(0, jobs));
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int jobs)
{
    if (jobs <= 0) jobs = default_jobs();
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    pool.clear();
    if (first_error) std::rethrow_exception(first_error);
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer)
{
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) fail(Errc::io, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(Errc::io, "cannot open " + tmp.string() + " for writing");
        writer(out);
        out.flush();
        if (!out) fail(Errc::io, "write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail(Errc::io, "cannot rename into " + path.string());
    }
}

}  // namespace camfuse
